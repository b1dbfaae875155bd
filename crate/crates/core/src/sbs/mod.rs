//! Supported beam search: hypothesis decoding with beams shared across all
//! instantiations of a premise.

mod oracle;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{exhaustive_rule_oracle, rescore_sequence, ORACLE_LIMIT};

use crate::instantiate::{diverse_beam_step, Selection, StepBeam};
use crate::logspace::{logsumexp, rank_order};
use crate::rule::{normalize_for_compare, render_applicability_prompt, Atom, Instantiation, OpenRule, RuleError};
use crate::scorer::{LogProbRow, Scorer, ScorerError, TokenId};

#[derive(Debug, Error)]
pub enum SbsError {
    #[error("instantiation set is empty")]
    EmptyInstantiations,
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("decode aborted at step {step} with {live_beams} live beams: {source}")]
    DecodeAborted { step: usize, live_beams: usize, source: ScorerError },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("oracle would enumerate {sequences} sequences (limit {limit})")]
    OracleTooLarge { sequences: f64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbsConfig {
    /// Number of hypotheses returned.
    pub k: usize,
    /// Maximum hypothesis length in tokens, counting `<eos>`.
    pub max_len: usize,
    /// Beams kept per step; `None` means `k`. Must be a multiple of
    /// `beam_groups`.
    pub beam_width: Option<usize>,
    pub beam_groups: usize,
    pub diversity_penalty: f64,
    pub new_variable: bool,
    /// Final ranking divides global scores by `len^length_penalty`.
    pub length_penalty: f64,
    /// Drop hypotheses equal to a higher-ranked one after normalization.
    pub dedupe: bool,
}

impl Default for SbsConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_len: 24,
            beam_width: None,
            beam_groups: 10,
            diversity_penalty: 1.0,
            new_variable: false,
            length_penalty: 0.0,
            dedupe: false,
        }
    }
}

impl SbsConfig {
    pub fn width(&self) -> usize {
        self.beam_width.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<(), SbsError> {
        let fail = |m: String| Err(SbsError::Config(m));
        if self.k == 0 || self.max_len == 0 || self.beam_groups == 0 {
            return fail("k, max_len and beam_groups must be at least 1".into());
        }
        if self.k < self.beam_groups {
            return fail(format!("k ({}) must be at least beam_groups ({})", self.k, self.beam_groups));
        }
        let width = self.width();
        if width == 0 || !width.is_multiple_of(self.beam_groups) {
            return fail(format!("beam width {width} is not a multiple of beam_groups {}", self.beam_groups));
        }
        if !(self.diversity_penalty >= 0.0 && self.diversity_penalty.is_finite()) {
            return fail("diversity_penalty must be a finite non-negative number".into());
        }
        if !self.length_penalty.is_finite() {
            return fail("length_penalty must be finite".into());
        }
        Ok(())
    }
}

/// A hypothesis prefix shared by every instantiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub tokens: Vec<TokenId>,
    /// `log P(tokens | ins_i)` per instantiation.
    pub local_log: Vec<f64>,
    /// `logsumexp_i(local_log[i] + log_weight[i])`.
    pub global_log: f64,
    pub finished: bool,
}

fn global_score(local: &[f64], log_weights: &[f64]) -> f64 {
    let terms: Vec<f64> = local.iter().zip(log_weights).map(|(l, w)| l + w).collect();
    logsumexp(&terms)
}

fn ranking_score(beam: &Beam, length_penalty: f64) -> f64 {
    if length_penalty == 0.0 || beam.tokens.is_empty() {
        beam.global_log
    } else {
        beam.global_log / (beam.tokens.len() as f64).powf(length_penalty)
    }
}

/// Applicability prompts for each instantiation, in order.
pub fn conditions(ins_set: &[Instantiation], new_variable: bool) -> Result<Vec<String>, RuleError> {
    ins_set.iter().map(|i| render_applicability_prompt(i, new_variable)).collect()
}

/// Token-level supported beam search. Returns every distinct beam alive at
/// the end: finished beams first, each part in final ranking order.
pub fn supported_decode<S: Scorer + ?Sized>(
    ins_set: &[Instantiation],
    scorer: &S,
    cfg: &SbsConfig,
) -> Result<Vec<Beam>, SbsError> {
    supported_decode_observed(ins_set, scorer, cfg, |_, _| {})
}

/// [`supported_decode`] with a callback receiving the step number and the
/// beam groups after every selection.
pub fn supported_decode_observed<S, F>(
    ins_set: &[Instantiation],
    scorer: &S,
    cfg: &SbsConfig,
    mut observe: F,
) -> Result<Vec<Beam>, SbsError>
where
    S: Scorer + ?Sized,
    F: FnMut(usize, &[Vec<Beam>]),
{
    cfg.validate()?;
    if ins_set.is_empty() {
        return Err(SbsError::EmptyInstantiations);
    }
    let conds = conditions(ins_set, cfg.new_variable)?;
    let log_weights: Vec<f64> = ins_set.iter().map(|i| i.log_weight).collect();
    let eos = scorer.vocab().eos_id;
    let group_width = cfg.width() / cfg.beam_groups;

    let root = Beam {
        tokens: Vec::new(),
        local_log: vec![0.0; ins_set.len()],
        global_log: global_score(&vec![0.0; ins_set.len()], &log_weights),
        finished: false,
    };
    let mut groups = vec![vec![root]; cfg.beam_groups];

    for step in 0..cfg.max_len {
        let mut prefix_index: HashMap<&[TokenId], usize> = HashMap::new();
        let mut prefixes: Vec<&[TokenId]> = Vec::new();
        let mut locals: Vec<&[f64]> = Vec::new();
        for beam in groups.iter().flatten().filter(|b| !b.finished) {
            prefix_index.entry(&beam.tokens).or_insert_with(|| {
                prefixes.push(&beam.tokens);
                locals.push(&beam.local_log);
                prefixes.len() - 1
            });
        }
        if prefixes.is_empty() {
            break;
        }

        // one batch per instantiation, all over the same prefixes
        let rows: Vec<Vec<LogProbRow>> = conds
            .par_iter()
            .map(|c| scorer.next_token_logprobs(c, &prefixes))
            .collect::<Result<_, _>>()
            .map_err(|source| SbsError::DecodeAborted { step, live_beams: prefixes.len(), source })?;
        if let Some(bad) = rows.iter().find(|r| r.len() != prefixes.len()) {
            let source = ScorerError::Protocol(format!("expected {} rows, got {}", prefixes.len(), bad.len()));
            return Err(SbsError::DecodeAborted { step, live_beams: prefixes.len(), source });
        }

        // global score of every one-token extension of every live prefix
        let vocab_len = scorer.vocab().len();
        let extension_scores: Vec<Vec<f64>> = locals
            .iter()
            .enumerate()
            .map(|(p, local)| {
                let mut terms = vec![0.0; ins_set.len()];
                (0..vocab_len)
                    .map(|w| {
                        for (i, term) in terms.iter_mut().enumerate() {
                            *term = local[i] + rows[i][p].values[w] + log_weights[i];
                        }
                        logsumexp(&terms)
                    })
                    .collect()
            })
            .collect();

        let step_groups: Vec<Vec<StepBeam<'_>>> = groups
            .iter()
            .map(|group| {
                group
                    .iter()
                    .map(|b| StepBeam {
                        tokens: &b.tokens,
                        score: b.global_log,
                        extensions: (!b.finished).then(|| extension_scores[prefix_index[b.tokens.as_slice()]].as_slice()),
                    })
                    .collect()
            })
            .collect();
        let selections = diverse_beam_step(&step_groups, group_width, cfg.diversity_penalty);

        groups = groups
            .iter()
            .zip(selections)
            .map(|(group, picks)| {
                picks
                    .into_iter()
                    .map(|pick| match pick {
                        Selection::Carry { beam } => group[beam].clone(),
                        Selection::Extend { beam, token, score } => {
                            let parent = &group[beam];
                            let p = prefix_index[parent.tokens.as_slice()];
                            let mut tokens = parent.tokens.clone();
                            tokens.push(token);
                            let local_log =
                                parent.local_log.iter().enumerate().map(|(i, l)| l + rows[i][p].get(token)).collect();
                            Beam { tokens, local_log, global_log: score, finished: token == eos }
                        }
                    })
                    .collect()
            })
            .collect();
        observe(step + 1, &groups);
    }

    let mut seen = HashSet::new();
    let mut out: Vec<Beam> = groups.into_iter().flatten().filter(|b| seen.insert(b.tokens.clone())).collect();
    out.sort_by(|a, b| {
        b.finished.cmp(&a.finished).then_with(|| {
            rank_order(ranking_score(a, cfg.length_penalty), &a.tokens, ranking_score(b, cfg.length_penalty), &b.tokens)
        })
    });
    Ok(out)
}

/// Decode the top-k hypothesis atoms for `premise` shared across `ins_set`.
/// Beams that do not detokenize into a valid atom of the configured mode,
/// or that restate the premise, are discarded before truncation.
pub fn supported_beam_search<S: Scorer + ?Sized>(
    premise: &Atom,
    ins_set: &[Instantiation],
    scorer: &S,
    cfg: &SbsConfig,
) -> Result<Vec<OpenRule>, SbsError> {
    let beams = supported_decode(ins_set, scorer, cfg)?;
    let eos = scorer.vocab().eos_id;
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    for beam in beams {
        if rules.len() == cfg.k {
            break;
        }
        let body = beam.tokens.strip_suffix(&[eos]).unwrap_or(&beam.tokens);
        let text = scorer.detokenize(body)?;
        let Ok(hypothesis) = Atom::new(text.trim()) else {
            continue;
        };
        if hypothesis.is_new_variable() != cfg.new_variable {
            continue;
        }
        if cfg.dedupe && !seen.insert(normalize_for_compare(hypothesis.as_str())) {
            continue;
        }
        match OpenRule::new(premise.clone(), hypothesis, beam.global_log, ins_set.to_vec()) {
            Ok(rule) => rules.push(rule),
            Err(RuleError::SameAsPremise(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instantiate::{diverse_beam_search, DiverseBeamConfig};
    use crate::scorer::{train_ngram, NgramModel, TrainingPair};

    fn model() -> NgramModel {
        let pairs = [
            ("Steve Jobs <mask> Apple.", "[X] founded [Y] ."),
            ("Steve Jobs <mask> Apple.", "[X] is founder of [Y] ."),
            ("Steve Jobs <mask> Apple.", "[X] founded [Y] ."),
            ("Bill Gates <mask> Microsoft.", "[X] is founder of [Y] ."),
            ("Bill Gates <mask> Microsoft.", "[X] created [Y] ."),
            ("Bill Gates <mask> Microsoft.", "[X] founded [Y] ."),
            ("Bill Gates <mask> Microsoft.", "[X] is founder of [Y] ."),
        ];
        let corpus: Vec<_> = pairs.iter().map(|(c, t)| TrainingPair::from_text(*c, t)).collect();
        train_ngram(&corpus, 2, 0.1).unwrap()
    }

    fn ins() -> Vec<Instantiation> {
        vec![
            Instantiation::pair("Steve Jobs", "Apple", 0.6f64.ln()),
            Instantiation::pair("Bill Gates", "Microsoft", 0.4f64.ln()),
        ]
    }

    fn cfg(k: usize) -> SbsConfig {
        SbsConfig { k, max_len: 8, beam_groups: 1, diversity_penalty: 0.0, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SbsConfig::default().validate().is_ok());
        assert!(SbsConfig { beam_groups: 11, ..Default::default() }.validate().is_err());
        assert!(SbsConfig { beam_width: Some(15), ..Default::default() }.validate().is_err());
        assert!(SbsConfig { beam_width: Some(30), ..Default::default() }.validate().is_ok());
        assert!(SbsConfig { max_len: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_instantiations_are_rejected() {
        let premise = Atom::new("[X] owns [Y].").unwrap();
        assert!(matches!(
            supported_beam_search(&premise, &[], &model(), &cfg(3)),
            Err(SbsError::EmptyInstantiations)
        ));
    }

    #[test]
    fn rules_are_ranked_and_scored() {
        let premise = Atom::new("[X] owns [Y].").unwrap();
        let rules = supported_beam_search(&premise, &ins(), &model(), &cfg(3)).unwrap();
        let hyps: Vec<&str> = rules.iter().map(|r| r.hypothesis.as_str()).collect();
        assert_eq!(hyps[0], "[X] founded [Y].");
        assert!(hyps.contains(&"[X] is founder of [Y]."));
        for pair in rules.windows(2) {
            assert!(pair[0].log_score >= pair[1].log_score);
        }
        for r in &rules {
            assert!(r.log_score <= 0.0);
        }
    }

    #[test]
    fn premise_restatements_are_dropped() {
        let premise = Atom::new("[X] founded [Y].").unwrap();
        let rules = supported_beam_search(&premise, &ins(), &model(), &cfg(3)).unwrap();
        assert!(rules.iter().all(|r| r.hypothesis.as_str() != "[X] founded [Y]."));
    }

    #[test]
    fn global_scores_stay_consistent_at_every_step() {
        let ins = ins();
        let logw: Vec<f64> = ins.iter().map(|i| i.log_weight).collect();
        let mut steps = 0;
        supported_decode_observed(&ins, &model(), &SbsConfig { beam_groups: 2, k: 4, ..cfg(4) }, |_, groups| {
            steps += 1;
            for beam in groups.iter().flatten() {
                assert!((global_score(&beam.local_log, &logw) - beam.global_log).abs() < 1e-9);
            }
        })
        .unwrap();
        assert!(steps > 0);
    }

    #[test]
    fn single_instantiation_matches_diverse_beam_search() {
        let one = [Instantiation::pair("Bill Gates", "Microsoft", 0.0)];
        let sbs_cfg = SbsConfig { k: 4, beam_groups: 2, diversity_penalty: 0.5, max_len: 8, ..Default::default() };
        let sbs = supported_decode(&one, &model(), &sbs_cfg).unwrap();
        let dbs = diverse_beam_search(
            &model(),
            "Bill Gates <mask> Microsoft.",
            &DiverseBeamConfig { beam_groups: 2, group_width: 2, diversity_penalty: 0.5, max_len: 8 },
        )
        .unwrap();
        assert_eq!(sbs.len(), dbs.len());
        for (a, b) in sbs.iter().zip(&dbs) {
            assert_eq!(a.tokens, b.tokens);
            assert_eq!(a.global_log, b.log_prob);
        }
    }

    #[test]
    fn new_variable_mode_requires_unary_instantiations() {
        let premise = Atom::new("[X] owns [Y].").unwrap();
        let err = supported_beam_search(&premise, &ins(), &model(), &SbsConfig { new_variable: true, ..cfg(2) });
        assert!(matches!(err, Err(SbsError::Rule(RuleError::ModeConflict(_)))));
    }
}
