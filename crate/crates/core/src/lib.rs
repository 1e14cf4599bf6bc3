pub mod backends;
pub mod baselines;
pub mod cli;
pub mod contextual;
pub mod corpus;
pub mod evaluation;
pub mod projection;
