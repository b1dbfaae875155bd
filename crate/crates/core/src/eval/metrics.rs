//! Sentence-level text-overlap metrics on a 0–100 scale.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};

use super::EvalError;

/// Smoothing for n-gram orders with no match.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Lowercase, then split into words and single punctuation marks. The
/// placeholders `[x]`, `[y]` and `<z>` stay whole.
pub fn metric_tokens(text: &str) -> Vec<String> {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let re = TOKEN.get_or_init(|| {
        Regex::new(r"\[x\]|\[y\]|<z>|[\p{L}\p{N}]+(?:'[\p{L}\p{N}]+)*|[^\s\p{L}\p{N}]").expect("static pattern")
    });
    let lower = text.to_lowercase();
    re.find_iter(&lower).map(|m| m.as_str().to_string()).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

fn check_refs(references: &[&str]) -> Result<(), EvalError> {
    if references.is_empty() {
        Err(EvalError::NoReferences)
    } else {
        Ok(())
    }
}

/// Sentence BLEU with uniform weights over orders `1..=n`. Orders longer
/// than the candidate are left out of the geometric mean; orders without a
/// match count as `BLEU_EPSILON` matches, except that a candidate sharing no
/// unigram with any reference scores exactly 0.
pub fn bleu_n(candidate: &str, references: &[&str], n: usize) -> Result<f64, EvalError> {
    check_refs(references)?;
    if n == 0 {
        return Err(EvalError::Order(n));
    }
    let cand = metric_tokens(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| metric_tokens(r)).collect();
    let orders = n.min(cand.len());

    let mut log_sum = 0.0;
    for order in 1..=orders {
        let cand_counts = ngram_counts(&cand, order);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &refs {
            for (gram, c) in ngram_counts(r, order) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        let clipped: usize = cand_counts.iter().map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0))).sum();
        let total = cand.len() + 1 - order;
        if clipped == 0 && order == 1 {
            return Ok(0.0);
        }
        let matched = if clipped == 0 { BLEU_EPSILON } else { clipped as f64 };
        log_sum += (matched / total as f64).ln();
    }

    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references are non-empty");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(100.0 * bp * (log_sum / orders as f64).exp())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1, best over references.
pub fn rouge_l(candidate: &str, references: &[&str]) -> Result<f64, EvalError> {
    check_refs(references)?;
    let cand = metric_tokens(candidate);
    let best = references
        .iter()
        .map(|r| {
            let r = metric_tokens(r);
            let lcs = lcs_len(&cand, &r);
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / cand.len() as f64;
            let rec = lcs as f64 / r.len() as f64;
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max);
    Ok(100.0 * best)
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Align candidate to reference unigrams: exact matches first, then stem
/// matches, each stage left to right onto the first free reference position.
/// Returns `(candidate index, reference index)` pairs sorted by candidate.
fn align(cand: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; reference.len()];
    let mut cand_used = vec![false; cand.len()];
    let mut pairs = Vec::new();
    let stem = |w: &str| stemmer().stem(w).into_owned();
    let cand_stems: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|w| stem(w)).collect();

    for stage in [false, true] {
        for i in 0..cand.len() {
            if cand_used[i] {
                continue;
            }
            let hit = (0..reference.len()).find(|&j| {
                !ref_used[j] && if stage { cand_stems[i] == ref_stems[j] } else { cand[i] == reference[j] }
            });
            if let Some(j) = hit {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn meteor_single(cand: &[String], reference: &[String]) -> f64 {
    let pairs = align(cand, reference);
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + pairs.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (chunks as f64 / m as f64).powf(METEOR_BETA);
    fmean * (1.0 - penalty)
}

/// METEOR with exact and stem matching, best over references.
pub fn meteor(candidate: &str, references: &[&str]) -> Result<f64, EvalError> {
    check_refs(references)?;
    let cand = metric_tokens(candidate);
    let best = references.iter().map(|r| meteor_single(&cand, &metric_tokens(r))).fold(0.0, f64::max);
    Ok(100.0 * best)
}

/// Mean BLEU-2 of each hypothesis against all the others.
pub fn self_bleu2(hypotheses: &[&str]) -> Result<f64, EvalError> {
    if hypotheses.len() < 2 {
        return Err(EvalError::Arity(hypotheses.len()));
    }
    let mut total = 0.0;
    for (i, h) in hypotheses.iter().enumerate() {
        let others: Vec<&str> =
            hypotheses.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, o)| *o).collect();
        total += bleu_n(h, &others, 2)?;
    }
    Ok(total / hypotheses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 0.01
    }

    #[test]
    fn tokens_keep_placeholders() {
        assert_eq!(metric_tokens("[X] is founder of [Y]."), ["[x]", "is", "founder", "of", "[y]", "."]);
        assert_eq!(metric_tokens("X's <z>, ok"), ["x's", "<z>", ",", "ok"]);
    }

    #[test]
    fn bleu_cases() {
        assert_eq!(bleu_n("the cat sat", &["the cat sat"], 1).unwrap(), 100.0);
        assert!(close(bleu_n("the the the", &["the cat"], 1).unwrap(), 100.0 / 3.0));
        assert_eq!(bleu_n("", &["x"], 2).unwrap(), 0.0);
        assert!(bleu_n("a", &[], 1).is_err());
        // brevity: c = 2, r = 4, p1 = 1
        assert!(close(bleu_n("a b", &["a b c d"], 1).unwrap(), 100.0 * (-1.0f64).exp()));
        // closest reference length wins
        assert_eq!(bleu_n("a b", &["a b c d", "a b"], 2).unwrap(), 100.0);
    }

    #[test]
    fn rouge_cases() {
        assert!(close(rouge_l("a b c d", &["a c d"]).unwrap(), 85.714));
        assert_eq!(rouge_l("a b", &["a b"]).unwrap(), 100.0);
        assert_eq!(rouge_l("a b", &["c d"]).unwrap(), 0.0);
        assert_eq!(rouge_l("", &["c d"]).unwrap(), 0.0);
    }

    #[test]
    fn meteor_cases() {
        // one chunk of 5: penalty 0.5 / 125
        assert!(close(meteor("a b c d e", &["a b c d e"]).unwrap(), 100.0 * (1.0 - 0.5 / 125.0)));
        assert_eq!(meteor("a b", &["c d"]).unwrap(), 0.0);
        assert!(meteor("cats", &["cat"]).unwrap() > 0.0);
    }

    #[test]
    fn self_bleu_cases() {
        assert_eq!(self_bleu2(&["a b", "a b", "a b"]).unwrap(), 100.0);
        assert_eq!(self_bleu2(&["a b", "c d"]).unwrap(), 0.0);
        assert!(matches!(self_bleu2(&["a b"]), Err(EvalError::Arity(1))));
    }
}
