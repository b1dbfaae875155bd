//! Rule-quality and coverage evaluation.

mod metrics;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    bleu_n, meteor, metric_tokens, rouge_l, self_bleu2, BLEU_EPSILON, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA,
};

use crate::ingest::GoldItem;
use crate::rule::{normalize_for_compare, Atom, OpenRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("at least one reference is required")]
    NoReferences,
    #[error("BLEU order must be at least 1, got {0}")]
    Order(usize),
    #[error("self-BLEU needs at least 2 hypotheses, got {0}")]
    Arity(usize),
    #[error("no induced hypotheses for premise {0:?}")]
    MissingPremise(String),
    #[error("nothing to evaluate")]
    Empty,
}

/// Mean scores on a 0–100 scale. `self_bleu2` averages over premises with at
/// least two hypotheses and is absent when there are none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub self_bleu2: Option<f64>,
    pub premises: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Scores {
    bleu1: f64,
    bleu2: f64,
    bleu4: f64,
    rouge_l: f64,
    meteor: f64,
}

impl Scores {
    fn of(candidate: &str, references: &[&str]) -> Result<Self, EvalError> {
        Ok(Self {
            bleu1: bleu_n(candidate, references, 1)?,
            bleu2: bleu_n(candidate, references, 2)?,
            bleu4: bleu_n(candidate, references, 4)?,
            rouge_l: rouge_l(candidate, references)?,
            meteor: meteor(candidate, references)?,
        })
    }

    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            bleu1: f(self.bleu1, other.bleu1),
            bleu2: f(self.bleu2, other.bleu2),
            bleu4: f(self.bleu4, other.bleu4),
            rouge_l: f(self.rouge_l, other.rouge_l),
            meteor: f(self.meteor, other.meteor),
        }
    }

    fn scale(self, c: f64) -> Self {
        self.zip(self, |a, _| a * c)
    }
}

fn report(per_premise: Vec<(Scores, Option<f64>)>) -> Result<MetricReport, EvalError> {
    if per_premise.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = per_premise.len();
    let total = per_premise.iter().fold(Scores::default(), |acc, (s, _)| acc.zip(*s, |a, b| a + b));
    let mean = total.scale(1.0 / n as f64);
    let selfs: Vec<f64> = per_premise.iter().filter_map(|(_, s)| *s).collect();
    Ok(MetricReport {
        bleu1: mean.bleu1,
        bleu2: mean.bleu2,
        bleu4: mean.bleu4,
        rouge_l: mean.rouge_l,
        meteor: mean.meteor,
        self_bleu2: (!selfs.is_empty()).then(|| selfs.iter().sum::<f64>() / selfs.len() as f64),
        premises: n,
    })
}

fn diversity(hypotheses: &[&str]) -> Result<Option<f64>, EvalError> {
    if hypotheses.len() < 2 {
        Ok(None)
    } else {
        self_bleu2(hypotheses).map(Some)
    }
}

/// Group rule hypotheses by normalized premise text, keeping file order.
pub fn hypotheses_by_premise(rules: &[OpenRule]) -> HashMap<String, Vec<String>> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for r in rules {
        map.entry(normalize_for_compare(r.premise.as_str())).or_default().push(r.hypothesis.as_str().to_string());
    }
    map
}

/// Gold-reference evaluation: every induced hypothesis is scored against all
/// gold hypotheses of its premise; scores are averaged per premise, then
/// across premises.
pub fn evaluate_openrule(gold: &[GoldItem], rules: &[OpenRule]) -> Result<MetricReport, EvalError> {
    let induced = hypotheses_by_premise(rules);
    let per_premise = gold
        .par_iter()
        .map(|item| {
            let key = normalize_for_compare(&item.premise);
            let hyps = induced.get(&key).ok_or_else(|| EvalError::MissingPremise(item.premise.clone()))?;
            let refs: Vec<&str> = item.hypotheses.iter().map(String::as_str).collect();
            let mut sum = Scores::default();
            for h in hyps {
                sum = sum.zip(Scores::of(h, &refs)?, |a, b| a + b);
            }
            let hyp_refs: Vec<&str> = hyps.iter().map(String::as_str).collect();
            Ok((sum.scale(1.0 / hyps.len() as f64), diversity(&hyp_refs)?))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    report(per_premise)
}

/// Coverage evaluation: per premise, each metric takes its best value over
/// the induced hypotheses against the single gold hypothesis.
pub fn coverage_eval(
    premises: &[(Atom, Atom)],
    induced: &HashMap<String, Vec<String>>,
) -> Result<MetricReport, EvalError> {
    let per_premise = premises
        .par_iter()
        .map(|(premise, gold)| {
            let hyps = induced
                .get(&normalize_for_compare(premise.as_str()))
                .filter(|h| !h.is_empty())
                .ok_or_else(|| EvalError::MissingPremise(premise.as_str().to_string()))?;
            let mut best = Scores::default();
            for h in hyps {
                best = best.zip(Scores::of(h, &[gold.as_str()])?, f64::max);
            }
            let hyp_refs: Vec<&str> = hyps.iter().map(String::as_str).collect();
            Ok((best, diversity(&hyp_refs)?))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    report(per_premise)
}
