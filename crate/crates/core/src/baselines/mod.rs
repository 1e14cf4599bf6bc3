//! Comparison projection methods: markers, word alignment, independent
//! label translation and constrained substring selection.

mod alignment;
mod constrained;
mod independent;
mod markers;
mod tokenize;

pub use alignment::{
    lexical_align, load_alignments, parse_pharaoh_line, project_alignment, AlignmentError, AlignmentSet,
};
pub use constrained::{best_substring, length_cap, project_constrained, LENGTH_CAP_FACTOR, LENGTH_CAP_OFFSET};
pub use independent::project_independent;
pub use markers::{
    extract_markers, insert_markers, project_marker, Extraction, MarkedSentence, MarkedVariant, MarkerScheme,
};
pub use tokenize::{is_cjk, tokenize, Token};
