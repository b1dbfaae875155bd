//! Run configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use openrule_core::corpus::MaskedExample;
use openrule_core::scorer::{train_ngram, RemoteConfig, RemoteScorer, TrainingPair};
use openrule_core::{InstantiationConfig, SbsConfig, Scorer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramBackend {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Corpus-builder JSONL the model is trained on, relative to the config file.
    pub model_path: PathBuf,
}

fn default_order() -> usize {
    3
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Ngram(NgramBackend),
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instantiation_scorer: Backend,
    pub applicability_scorer: Backend,
    #[serde(default)]
    pub instantiation: InstantiationConfig,
    #[serde(default)]
    pub sbs: SbsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.instantiation.validate()?;
        self.sbs.validate()?;
        for backend in [&self.instantiation_scorer, &self.applicability_scorer] {
            if let Backend::Ngram(n) = backend {
                if n.order == 0 || !(n.alpha > 0.0 && n.alpha.is_finite()) {
                    bail!("n-gram backend needs order >= 1 and alpha > 0");
                }
            }
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Training pairs from a corpus-builder JSONL file: the input text is the
/// condition and the placeholder-space target is the sequence.
pub fn training_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading corpus {}", path.display()))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: MaskedExample =
            serde_json::from_str(line).with_context(|| format!("{}:{}: bad corpus record", path.display(), n + 1))?;
        pairs.push(TrainingPair::from_text(ex.input_text.clone(), &ex.placeholder_target()));
    }
    Ok(pairs)
}

pub fn build_scorer(backend: &Backend, loaded: &LoadedConfig) -> Result<Box<dyn Scorer>> {
    Ok(match backend {
        Backend::Ngram(n) => {
            let path = loaded.resolve(&n.model_path);
            let pairs = training_pairs(&path)?;
            Box::new(train_ngram(&pairs, n.order, n.alpha).with_context(|| format!("training on {}", path.display()))?)
        }
        Backend::Remote(r) => {
            Box::new(RemoteScorer::connect(r.clone()).with_context(|| format!("connecting to {}", r.base_url))?)
        }
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
