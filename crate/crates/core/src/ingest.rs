//! Relation-extraction samples and gold hypothesis files.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rule::{check_span_pair, make_premise_atom, sample_to_premise_atom, Atom, CharSpan, RelationStyle, RuleError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("per_relation must be at least 1")]
    PerRelation,
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// One line of the interchange format: `{"text", "head": [s, e], "tail": [s, e], "relation"}`
/// with character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSample {
    pub text: String,
    pub head: CharSpan,
    pub tail: CharSpan,
    pub relation: String,
}

impl RelationSample {
    pub fn validate(&self) -> Result<(), RuleError> {
        check_span_pair(self.head, self.tail, self.text.chars().count())
    }

    pub fn premise_atom(&self) -> Result<Atom, RuleError> {
        sample_to_premise_atom(&self.text, self.head, self.tail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub samples: Vec<RelationSample>,
    pub malformed: usize,
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Load interchange JSONL. Malformed or invalid lines are skipped and
/// counted; more than half malformed, or no lines at all, is a format error.
pub fn load_relation_dataset(path: &Path) -> Result<LoadedDataset, IngestError> {
    let contents = read(path)?;
    let format_error = |reason: String| IngestError::Format { path: path.display().to_string(), reason };
    let mut samples = Vec::new();
    let mut malformed = 0;
    let mut lines = 0;
    for (n, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let parsed = serde_json::from_str::<RelationSample>(line)
            .map_err(|e| e.to_string())
            .and_then(|s| s.validate().map(|_| s).map_err(|e| e.to_string()));
        match parsed {
            Ok(s) => samples.push(s),
            Err(e) => {
                log::warn!("{}:{}: skipping line: {e}", path.display(), n + 1);
                malformed += 1;
            }
        }
    }
    if lines == 0 {
        return Err(format_error("no records".into()));
    }
    if malformed * 2 > lines {
        return Err(format_error(format!("{malformed} of {lines} lines are malformed")));
    }
    Ok(LoadedDataset { samples, malformed })
}

pub fn to_jsonl(samples: &[RelationSample]) -> String {
    samples.iter().map(|s| serde_json::to_string(s).expect("plain data") + "\n").collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub samples: Vec<RelationSample>,
    /// Relations with fewer samples than requested, with their sizes.
    pub short_relations: Vec<(String, usize)>,
}

/// Seeded uniform sampling without replacement of `per_relation` samples per
/// relation label. Relations are visited in sorted order; chosen samples keep
/// their input order.
pub fn sample_relation_subset(samples: &[RelationSample], per_relation: usize, seed: u64) -> Result<Subset, IngestError> {
    if per_relation == 0 {
        return Err(IngestError::PerRelation);
    }
    let mut by_relation: BTreeMap<&str, Vec<&RelationSample>> = BTreeMap::new();
    for s in samples {
        by_relation.entry(&s.relation).or_default().push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Subset { samples: Vec::new(), short_relations: Vec::new() };
    for (relation, group) in by_relation {
        if group.len() <= per_relation {
            if group.len() < per_relation {
                log::warn!("relation {relation:?} has only {} samples", group.len());
                out.short_relations.push((relation.to_string(), group.len()));
            }
            out.samples.extend(group.into_iter().cloned());
            continue;
        }
        let mut picked = sample(&mut rng, group.len(), per_relation).into_vec();
        picked.sort_unstable();
        out.samples.extend(picked.into_iter().map(|i| group[i].clone()));
    }
    Ok(out)
}

/// Gold hypothesis atom for a relation label.
pub fn gold_hypothesis_for(relation: &str) -> Result<Atom, RuleError> {
    make_premise_atom(relation, RelationStyle::infer(relation)?)
}

/// One gold record: a premise and its annotated hypotheses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub premise: String,
    pub hypotheses: Vec<String>,
}

/// Load a gold file, one `{"premise", "hypotheses"}` object per line.
pub fn load_gold(path: &Path) -> Result<Vec<GoldItem>, IngestError> {
    let contents = read(path)?;
    let mut items = Vec::new();
    for (n, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: GoldItem = serde_json::from_str(line).map_err(|e| IngestError::Format {
            path: path.display().to_string(),
            reason: format!("line {}: {e}", n + 1),
        })?;
        if item.hypotheses.is_empty() {
            return Err(IngestError::Format {
                path: path.display().to_string(),
                reason: format!("line {}: no hypotheses", n + 1),
            });
        }
        items.push(item);
    }
    Ok(items)
}
