use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::backends::{canonical_json, CacheMode, RemoteConfig};
use crate::baselines::MarkerScheme;
use crate::contextual::ClapConfig;
use crate::corpus::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TranslatorConfig {
    /// Copies text through unchanged.
    Identity,
    /// Phrase-table file, see `PhraseTableTranslator::load`.
    PhraseTable(PathBuf),
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContextualConfig {
    Dictionary {
        path: PathBuf,
        /// Send labels missing from the dictionary through the sentence translator.
        #[serde(default)]
        fallback: bool,
    },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub mode: CacheMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentConfig {
    /// Pharaoh file with one line per corpus sentence, in corpus order.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Phrase-table file whose source-to-target table drives the lexical aligner.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source_language: String,
    pub target_language: String,
    #[serde(default)]
    pub method: Option<Method>,
    pub translator: TranslatorConfig,
    #[serde(default)]
    pub contextual: Option<ContextualConfig>,
    #[serde(default)]
    pub cache: Option<CacheConfig>,
    #[serde(default)]
    pub clap: ClapConfig,
    #[serde(default)]
    pub examples_path: Option<PathBuf>,
    #[serde(default)]
    pub marker_scheme: MarkerScheme,
    #[serde(default)]
    pub alignment: Option<AlignmentConfig>,
    #[serde(default)]
    pub roles_path: Option<PathBuf>,
    #[serde(default)]
    pub roles: Option<Vec<String>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Fields that do not change what a run produces.
const UNHASHED: [&str; 4] = ["cache", "corpus", "out", "max_concurrency"];

pub(crate) fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

pub(crate) fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunConfig {
    /// Reads a config file, or the `config` member of a run manifest.
    /// Relative paths are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut value: Value =
            serde_json::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if value.get("config_hash").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        let mut config: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = match path.parent() {
            Some(dir) if !dir.as_os_str().is_empty() => absolute(dir),
            _ => absolute(Path::new(".")),
        };
        config.for_each_path(|p| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        });
        Ok(config)
    }

    fn for_each_path(&mut self, mut f: impl FnMut(&mut PathBuf)) {
        if let TranslatorConfig::PhraseTable(p) = &mut self.translator {
            f(p);
        }
        if let Some(ContextualConfig::Dictionary { path, .. }) = &mut self.contextual {
            f(path);
        }
        if let Some(cache) = &mut self.cache {
            f(&mut cache.path);
        }
        if let Some(alignment) = &mut self.alignment {
            alignment.path.iter_mut().for_each(&mut f);
            alignment.lexicon.iter_mut().for_each(&mut f);
        }
        for p in [
            &mut self.examples_path,
            &mut self.roles_path,
            &mut self.corpus,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            f(p);
        }
    }

    /// Hash of everything that shapes the output. Referenced files enter by
    /// content, so moving a run directory keeps the hash.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut copy = self.clone();
        copy.cache = None;
        copy.corpus = None;
        copy.out = None;
        let mut result = Ok(());
        copy.for_each_path(|p| {
            if result.is_ok() {
                match sha256_file(p) {
                    Ok(digest) => *p = PathBuf::from(format!("sha256:{digest}")),
                    Err(e) => result = Err(e),
                }
            }
        });
        result?;
        let mut value = serde_json::to_value(&copy).map_err(|e| CliError::Config(e.to_string()))?;
        if let Value::Object(map) = &mut value {
            for key in UNHASHED {
                map.remove(key);
            }
        }
        Ok(hex::encode(Sha256::digest(canonical_json(&value).as_bytes())))
    }

    fn hashed_paths(&self) -> Vec<PathBuf> {
        let mut copy = self.clone();
        copy.cache = None;
        copy.corpus = None;
        copy.out = None;
        let mut paths = Vec::new();
        copy.for_each_path(|p| paths.push(p.clone()));
        paths
    }

    pub fn require_method(&self) -> Result<Method, CliError> {
        self.method
            .ok_or_else(|| CliError::Config("no method given (set \"method\" or pass --method)".into()))
    }

    /// Checks method-specific requirements before any work starts.
    pub fn validate(&self, method: Method) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.source_language.trim().is_empty() || self.target_language.trim().is_empty() {
            return fail("source_language and target_language must be set".into());
        }
        if self.max_concurrency == 0 {
            return fail("max_concurrency must be at least 1".into());
        }
        if self.roles.is_some() && self.roles_path.is_some() {
            return fail("give roles or roles_path, not both".into());
        }
        self.clap
            .validate()
            .map_err(|e| CliError::Config(format!("clap: {e}")))?;
        self.marker_scheme
            .validate()
            .map_err(|e| CliError::Config(format!("marker_scheme: {e}")))?;
        match method {
            Method::Clap => {
                if self.contextual.is_none() {
                    return fail("method clap needs a contextual translator".into());
                }
                if self.clap.num_incontext_examples > 0 && self.examples_path.is_none() {
                    return fail(format!(
                        "method clap with {} in-context examples needs examples_path",
                        self.clap.num_incontext_examples
                    ));
                }
            }
            Method::Align => match &self.alignment {
                Some(AlignmentConfig {
                    path: Some(_),
                    lexicon: None,
                })
                | Some(AlignmentConfig {
                    path: None,
                    lexicon: Some(_),
                }) => {}
                Some(AlignmentConfig {
                    path: Some(_),
                    lexicon: Some(_),
                }) => return fail("alignment: give path or lexicon, not both".into()),
                _ => return fail("method align needs alignment.path or alignment.lexicon".into()),
            },
            Method::Marker | Method::Independent | Method::Constrained => {}
        }
        for p in self.hashed_paths() {
            if !p.is_file() {
                return fail(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }
}
