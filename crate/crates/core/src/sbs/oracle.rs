//! Exhaustive reference scoring for small search problems.

use super::{conditions, SbsError};
use crate::logspace::{logsumexp, rank_order};
use crate::rule::Instantiation;
use crate::scorer::{sequence_log_likelihood, Scorer, TokenId};

/// Largest `|V|^max_len` the oracle agrees to enumerate.
pub const ORACLE_LIMIT: u64 = 1_000_000;

/// Instantiation-weighted probability of a fixed sequence, computed from
/// scratch with one scorer query per prefix and instantiation.
pub fn rescore_sequence<S: Scorer + ?Sized>(
    ins_set: &[Instantiation],
    scorer: &S,
    tokens: &[TokenId],
    new_variable: bool,
) -> Result<f64, SbsError> {
    let conds = conditions(ins_set, new_variable)?;
    let mut terms = Vec::with_capacity(ins_set.len());
    for (ins, cond) in ins_set.iter().zip(&conds) {
        terms.push(ins.log_weight + sequence_log_likelihood(scorer, cond, tokens)?);
    }
    Ok(logsumexp(&terms))
}

/// Score every `<eos>`-terminated sequence of at most `max_len` tokens and
/// rank them by global score. Sequences with zero probability are omitted.
pub fn exhaustive_rule_oracle<S: Scorer + ?Sized>(
    ins_set: &[Instantiation],
    scorer: &S,
    max_len: usize,
    new_variable: bool,
) -> Result<Vec<(Vec<TokenId>, f64)>, SbsError> {
    if ins_set.is_empty() {
        return Err(SbsError::EmptyInstantiations);
    }
    let vocab_len = scorer.vocab().len();
    let size = (vocab_len as f64).powi(max_len as i32);
    if size > ORACLE_LIMIT as f64 {
        return Err(SbsError::OracleTooLarge { sequences: size, limit: ORACLE_LIMIT });
    }
    let conds = conditions(ins_set, new_variable)?;
    let log_weights: Vec<f64> = ins_set.iter().map(|i| i.log_weight).collect();
    let eos = scorer.vocab().eos_id;

    let mut out = Vec::new();
    // depth-first over prefixes; each entry carries per-instantiation log-likelihoods
    let mut stack: Vec<(Vec<TokenId>, Vec<f64>)> = vec![(Vec::new(), vec![0.0; ins_set.len()])];
    while let Some((prefix, local)) = stack.pop() {
        let mut rows = Vec::with_capacity(conds.len());
        for cond in &conds {
            rows.push(scorer.next_token_logprobs(cond, &[&prefix])?.remove(0));
        }
        for w in 0..vocab_len as TokenId {
            let next: Vec<f64> = local.iter().zip(&rows).map(|(l, r)| l + r.get(w)).collect();
            if next.iter().all(|v| *v == f64::NEG_INFINITY) {
                continue;
            }
            let mut tokens = prefix.clone();
            tokens.push(w);
            if w == eos {
                let terms: Vec<f64> = next.iter().zip(&log_weights).map(|(l, lw)| l + lw).collect();
                let score = logsumexp(&terms);
                if score.is_finite() {
                    out.push((tokens, score));
                }
            } else if tokens.len() < max_len {
                stack.push((tokens, next));
            }
        }
    }
    out.sort_by(|a, b| rank_order(a.1, &a.0, b.1, &b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{train_ngram, TrainingPair};

    #[test]
    fn single_instantiation_ranks_by_likelihood() {
        let corpus = [
            TrainingPair::from_text("a <mask> b.", "[X] p [Y]"),
            TrainingPair::from_text("a <mask> b.", "[X] p [Y]"),
            TrainingPair::from_text("a <mask> b.", "[X] q [Y]"),
        ];
        let model = train_ngram(&corpus, 1, 0.5).unwrap();
        let ins = [Instantiation::pair("a", "b", 0.0)];
        let ranked = exhaustive_rule_oracle(&ins, &model, 3, false).unwrap();
        for (tokens, score) in &ranked {
            let ll = sequence_log_likelihood(&model, "a <mask> b.", tokens).unwrap();
            assert!((ll - score).abs() < 1e-12);
            assert_eq!(tokens.last(), Some(&model.vocab().eos_id));
        }
        for pair in ranked.windows(2) {
            assert!(pair[0].1 >= pair[1].1 - 1e-10);
        }
        // unigram model: the eos-only sequence is the most likely
        assert_eq!(ranked[0].0, [model.vocab().eos_id]);
    }

    #[test]
    fn guard_trips_on_large_requests() {
        let model = train_ngram(&[TrainingPair::from_text("c", "a b")], 2, 0.1).unwrap();
        let ins = [Instantiation::pair("a", "b", 0.0)];
        assert!(matches!(
            exhaustive_rule_oracle(&ins, &model, 12, false),
            Err(SbsError::OracleTooLarge { .. })
        ));
    }
}
