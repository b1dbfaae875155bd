//! Top-k instantiation search for a premise atom.

mod diverse;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diverse::{diverse_beam_search, diverse_beam_step, DiverseBeamConfig, ScoredSequence, Selection, StepBeam};

use crate::corpus::is_numeric_or_date;
use crate::logspace::{logsumexp, rank_order};
use crate::rule::{render_instantiation_prompt, Atom, Instantiation};
use crate::scorer::{Scorer, ScorerError, TokenId};

#[derive(Debug, Error)]
pub enum InstantiateError {
    #[error("invalid instantiation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("no instantiation survived filtering ({decoded} decoded sequences)")]
    Empty { decoded: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstantiationConfig {
    pub k: usize,
    pub beam_groups: usize,
    pub group_width: usize,
    pub diversity_penalty: f64,
    /// Counts the separator and `<eos>`.
    pub max_len: usize,
    pub drop_numeric_date: bool,
    pub dedupe_case_insensitive: bool,
}

impl Default for InstantiationConfig {
    fn default() -> Self {
        Self {
            k: 10,
            beam_groups: 120,
            group_width: 1,
            diversity_penalty: 1.0,
            max_len: 24,
            drop_numeric_date: true,
            dedupe_case_insensitive: true,
        }
    }
}

impl InstantiationConfig {
    pub fn validate(&self) -> Result<(), InstantiateError> {
        let fail = |m: &str| Err(InstantiateError::Config(m.to_string()));
        if self.k == 0 {
            return fail("k must be at least 1");
        }
        if self.beam_groups == 0 || self.group_width == 0 {
            return fail("beam_groups and group_width must be at least 1");
        }
        if !(self.diversity_penalty >= 0.0 && self.diversity_penalty.is_finite()) {
            return fail("diversity_penalty must be a finite non-negative number");
        }
        if self.max_len < 2 {
            return fail("max_len must be at least 2");
        }
        Ok(())
    }

    pub fn beam_width(&self) -> usize {
        self.beam_groups * self.group_width
    }
}

/// A decoded `(x, y)` pair with its unnormalized sequence log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: String,
    pub y: String,
    pub tokens: Vec<TokenId>,
    pub log_likelihood: f64,
}

/// Split a finished `x <sep> y <eos>` sequence and detokenize both sides.
/// Returns `None` for sequences without exactly one separator, with an empty
/// side, or containing other reserved tokens.
pub fn split_candidate<S: Scorer + ?Sized>(
    scorer: &S,
    seq: &ScoredSequence,
) -> Result<Option<Candidate>, ScorerError> {
    let r = scorer.vocab().reserved();
    let Some((&last, body)) = seq.tokens.split_last() else {
        return Ok(None);
    };
    if last != r.eos {
        return Ok(None);
    }
    if body.iter().any(|&t| [r.bos, r.eos, r.x, r.y, r.z].contains(&t)) {
        return Ok(None);
    }
    let mut parts = body.split(|&t| t == r.sep);
    let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
        return Ok(None);
    };
    if x.is_empty() || y.is_empty() {
        return Ok(None);
    }
    let xs = scorer.detokenize(x)?.trim().to_string();
    let ys = scorer.detokenize(y)?.trim().to_string();
    if xs.is_empty() || ys.is_empty() {
        return Ok(None);
    }
    Ok(Some(Candidate { x: xs, y: ys, tokens: seq.tokens.clone(), log_likelihood: seq.log_prob }))
}

/// Apply the configured filters and dedup to candidates, keeping the
/// higher-likelihood duplicate. Output is ranked by likelihood.
pub fn filter_candidates(mut candidates: Vec<Candidate>, cfg: &InstantiationConfig) -> Vec<Candidate> {
    candidates.sort_by(|a, b| rank_order(a.log_likelihood, &a.tokens, b.log_likelihood, &b.tokens));
    let mut seen = std::collections::HashSet::new();
    candidates
        .into_iter()
        .filter(|c| !(cfg.drop_numeric_date && (is_numeric_or_date(&c.x) || is_numeric_or_date(&c.y))))
        .filter(|c| {
            let key = if cfg.dedupe_case_insensitive {
                (c.x.to_lowercase(), c.y.to_lowercase())
            } else {
                (c.x.clone(), c.y.clone())
            };
            seen.insert(key)
        })
        .collect()
}

/// Keep the first `k` ranked candidates and renormalize their weights.
pub fn select_instantiations(candidates: &[Candidate], k: usize) -> Vec<Instantiation> {
    let top = &candidates[..candidates.len().min(k)];
    let total = logsumexp(&top.iter().map(|c| c.log_likelihood).collect::<Vec<_>>());
    top.iter().map(|c| Instantiation::pair(c.x.clone(), c.y.clone(), c.log_likelihood - total)).collect()
}

/// Decode, split and filter instantiation candidates for `premise`.
pub fn decode_candidates<S: Scorer + ?Sized>(
    premise: &Atom,
    scorer: &S,
    cfg: &InstantiationConfig,
) -> Result<(Vec<Candidate>, usize), InstantiateError> {
    cfg.validate()?;
    let condition = render_instantiation_prompt(premise);
    let search = DiverseBeamConfig {
        beam_groups: cfg.beam_groups,
        group_width: cfg.group_width,
        diversity_penalty: cfg.diversity_penalty,
        max_len: cfg.max_len,
    };
    let decoded: Vec<ScoredSequence> =
        diverse_beam_search(scorer, &condition, &search)?.into_iter().filter(|s| s.finished).collect();
    let mut candidates = Vec::new();
    for seq in &decoded {
        if let Some(c) = split_candidate(scorer, seq)? {
            candidates.push(c);
        }
    }
    Ok((filter_candidates(candidates, cfg), decoded.len()))
}

/// Top-k instantiations of `premise`, weights renormalized over the returned
/// set, in descending weight order.
pub fn generate_instantiations<S: Scorer + ?Sized>(
    premise: &Atom,
    scorer: &S,
    cfg: &InstantiationConfig,
) -> Result<Vec<Instantiation>, InstantiateError> {
    let (candidates, decoded) = decode_candidates(premise, scorer, cfg)?;
    if candidates.is_empty() {
        return Err(InstantiateError::Empty { decoded });
    }
    Ok(select_instantiations(&candidates, cfg.k))
}

/// Collapse pairs to their `x` surfaces for new-variable induction. Weights
/// of pairs sharing an `x` are summed; first-seen order is kept.
pub fn collapse_to_unary(ins: &[Instantiation]) -> Vec<Instantiation> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut grouped: Vec<(&str, Vec<f64>)> = Vec::new();
    for i in ins {
        match index.get(i.x.as_str()) {
            Some(&at) => grouped[at].1.push(i.log_weight),
            None => {
                index.insert(&i.x, grouped.len());
                grouped.push((&i.x, vec![i.log_weight]));
            }
        }
    }
    grouped.into_iter().map(|(x, w)| Instantiation::unary(x, logsumexp(&w))).collect()
}
