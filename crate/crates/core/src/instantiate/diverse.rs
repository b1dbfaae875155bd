//! Diverse (grouped) beam search with a Hamming diversity penalty.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::logspace::rank_bucket as bucket;
use crate::scorer::{Scorer, ScorerError, TokenId};

/// One beam of a group as seen by [`diverse_beam_step`].
#[derive(Debug, Clone, Copy)]
pub struct StepBeam<'a> {
    pub tokens: &'a [TokenId],
    pub score: f64,
    /// Unpenalized score of `tokens + [w]` for every token `w`, or `None`
    /// for a finished beam, which is carried over unchanged.
    pub extensions: Option<&'a [f64]>,
}

/// What a group keeps for the next step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Carry { beam: usize },
    Extend { beam: usize, token: TokenId, score: f64 },
}

struct Candidate {
    rank: i64,
    beam: usize,
    token: Option<TokenId>,
    score: f64,
}

fn compare_candidates(a: &Candidate, b: &Candidate, beams: &[StepBeam<'_>]) -> Ordering {
    let seq = |c: &Candidate| beams[c.beam].tokens.iter().copied().chain(c.token);
    let len = |c: &Candidate| beams[c.beam].tokens.len() + usize::from(c.token.is_some());
    b.rank
        .cmp(&a.rank)
        .then_with(|| len(a).cmp(&len(b)))
        .then_with(|| seq(a).cmp(seq(b)))
}

/// Select up to `group_width` continuations for every group, in group order.
///
/// A candidate extension of group `g` with token `w` is ranked by its score
/// minus `penalty` times the number of times groups `0..g` selected `w` as an
/// extension at this step. Finished beams compete with their unchanged score.
/// Stored scores are never penalized. Ties break by shorter sequence, then by
/// lexicographically smaller token ids.
pub fn diverse_beam_step(groups: &[Vec<StepBeam<'_>>], group_width: usize, penalty: f64) -> Vec<Vec<Selection>> {
    let mut used: HashMap<TokenId, usize> = HashMap::new();
    let mut out = Vec::with_capacity(groups.len());

    for beams in groups {
        let mut candidates = Vec::new();
        for (index, beam) in beams.iter().enumerate() {
            match beam.extensions {
                None => {
                    if beam.score.is_finite() {
                        candidates.push(Candidate { rank: bucket(beam.score), beam: index, token: None, score: beam.score });
                    }
                }
                Some(scores) => {
                    for (w, &score) in scores.iter().enumerate() {
                        if !score.is_finite() {
                            continue;
                        }
                        let w = w as TokenId;
                        let hits = used.get(&w).copied().unwrap_or(0);
                        let penalized = if hits == 0 { score } else { score - penalty * hits as f64 };
                        candidates.push(Candidate { rank: bucket(penalized), beam: index, token: Some(w), score });
                    }
                }
            }
        }

        if candidates.len() > group_width && group_width > 0 {
            candidates.select_nth_unstable_by(group_width - 1, |a, b| compare_candidates(a, b, beams));
        }
        candidates.truncate(group_width);
        candidates.sort_by(|a, b| compare_candidates(a, b, beams));

        let selections: Vec<Selection> = candidates
            .iter()
            .map(|c| match c.token {
                None => Selection::Carry { beam: c.beam },
                Some(token) => Selection::Extend { beam: c.beam, token, score: c.score },
            })
            .collect();
        for c in &candidates {
            if let Some(token) = c.token {
                *used.entry(token).or_default() += 1;
            }
        }
        out.push(selections);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiverseBeamConfig {
    pub beam_groups: usize,
    pub group_width: usize,
    pub diversity_penalty: f64,
    /// Maximum sequence length, counting `<eos>`.
    pub max_len: usize,
}

/// A decoded sequence. Finished sequences end with `<eos>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub tokens: Vec<TokenId>,
    pub log_prob: f64,
    pub finished: bool,
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    score: f64,
    finished: bool,
}

/// Standard diverse beam search for a single condition. Returns every
/// distinct beam alive at the end: finished beams first, each part ordered by
/// score.
pub fn diverse_beam_search<S: Scorer + ?Sized>(
    scorer: &S,
    condition: &str,
    cfg: &DiverseBeamConfig,
) -> Result<Vec<ScoredSequence>, ScorerError> {
    let eos = scorer.vocab().eos_id;
    let mut groups: Vec<Vec<Hyp>> =
        vec![vec![Hyp { tokens: Vec::new(), score: 0.0, finished: false }]; cfg.beam_groups];

    for _ in 0..cfg.max_len {
        let mut prefix_index: HashMap<&[TokenId], usize> = HashMap::new();
        let mut prefixes: Vec<&[TokenId]> = Vec::new();
        for hyp in groups.iter().flatten().filter(|h| !h.finished) {
            prefix_index.entry(&hyp.tokens).or_insert_with(|| {
                prefixes.push(&hyp.tokens);
                prefixes.len() - 1
            });
        }
        if prefixes.is_empty() {
            break;
        }
        let rows = scorer.next_token_logprobs(condition, &prefixes)?;

        let extension_scores: Vec<Vec<Option<Vec<f64>>>> = groups
            .iter()
            .map(|group| {
                group
                    .iter()
                    .map(|h| {
                        (!h.finished).then(|| {
                            let row = &rows[prefix_index[h.tokens.as_slice()]];
                            row.values.iter().map(|lp| h.score + lp).collect()
                        })
                    })
                    .collect()
            })
            .collect();
        let step_groups: Vec<Vec<StepBeam<'_>>> = groups
            .iter()
            .zip(&extension_scores)
            .map(|(group, ext)| {
                group
                    .iter()
                    .zip(ext)
                    .map(|(h, e)| StepBeam { tokens: &h.tokens, score: h.score, extensions: e.as_deref() })
                    .collect()
            })
            .collect();
        let selections = diverse_beam_step(&step_groups, cfg.group_width, cfg.diversity_penalty);

        groups = groups
            .iter()
            .zip(selections)
            .map(|(group, picks)| {
                picks
                    .into_iter()
                    .map(|pick| match pick {
                        Selection::Carry { beam } => group[beam].clone(),
                        Selection::Extend { beam, token, score } => {
                            let mut tokens = group[beam].tokens.clone();
                            tokens.push(token);
                            Hyp { tokens, score, finished: token == eos }
                        }
                    })
                    .collect()
            })
            .collect();
    }

    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<ScoredSequence> = groups
        .into_iter()
        .flatten()
        .filter(|h| seen.insert(h.tokens.clone()))
        .map(|h| ScoredSequence { tokens: h.tokens, log_prob: h.score, finished: h.finished })
        .collect();
    out.sort_by(|a, b| {
        b.finished
            .cmp(&a.finished)
            .then_with(|| crate::logspace::rank_order(a.log_prob, &a.tokens, b.log_prob, &b.tokens))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(p: f64) -> f64 {
        p.ln()
    }

    #[test]
    fn zero_penalty_matches_plain_selection() {
        let ext = [ln(0.5), ln(0.3), ln(0.2)];
        let beam = StepBeam { tokens: &[], score: 0.0, extensions: Some(&ext) };
        let picks = diverse_beam_step(&[vec![beam]], 2, 0.0);
        assert_eq!(
            picks[0],
            [
                Selection::Extend { beam: 0, token: 0, score: ln(0.5) },
                Selection::Extend { beam: 0, token: 1, score: ln(0.3) }
            ]
        );
    }

    #[test]
    fn second_group_avoids_first_group_token() {
        // Scores ln .5, ln .3, ln .2; penalty 10 dwarfs the 0.51 gap between
        // tokens 0 and 1, so group 2 moves to token 1 (ln .3 > ln .5 - 10).
        let ext = [ln(0.5), ln(0.3), ln(0.2)];
        let beam = StepBeam { tokens: &[], score: 0.0, extensions: Some(&ext) };
        let picks = diverse_beam_step(&[vec![beam], vec![beam]], 1, 10.0);
        assert_eq!(picks[0], [Selection::Extend { beam: 0, token: 0, score: ln(0.5) }]);
        assert_eq!(picks[1], [Selection::Extend { beam: 0, token: 1, score: ln(0.3) }]);
        // a small penalty does not overturn the gap
        let picks = diverse_beam_step(&[vec![beam], vec![beam]], 1, 0.1);
        assert_eq!(picks[1], [Selection::Extend { beam: 0, token: 0, score: ln(0.5) }]);
    }

    #[test]
    fn single_group_ignores_penalty() {
        let ext = [ln(0.5), ln(0.3), ln(0.2)];
        let beam = StepBeam { tokens: &[], score: 0.0, extensions: Some(&ext) };
        assert_eq!(diverse_beam_step(&[vec![beam]], 2, 0.0), diverse_beam_step(&[vec![beam]], 2, 50.0));
    }

    #[test]
    fn finished_beams_compete_with_extensions() {
        // extensions score .2 and .3 overall; the finished beam (.25) sits between
        let ext = [ln(0.2), ln(0.3)];
        let active = StepBeam { tokens: &[1], score: ln(0.5), extensions: Some(&ext) };
        let done = StepBeam { tokens: &[0], score: ln(0.25), extensions: None };
        let picks = diverse_beam_step(&[vec![active, done]], 2, 0.0);
        assert_eq!(picks[0], [Selection::Extend { beam: 0, token: 1, score: ln(0.3) }, Selection::Carry { beam: 1 }]);
    }

    #[test]
    fn ties_prefer_shorter_then_smaller_ids() {
        let ext = [ln(0.5), ln(0.5)];
        let a = StepBeam { tokens: &[3], score: 0.0, extensions: Some(&ext) };
        let done = StepBeam { tokens: &[2], score: ln(0.5), extensions: None };
        let picks = diverse_beam_step(&[vec![a, done]], 2, 0.0);
        assert_eq!(picks[0], [Selection::Carry { beam: 1 }, Selection::Extend { beam: 0, token: 0, score: ln(0.5) }]);
    }

    #[test]
    fn unreachable_tokens_are_never_selected() {
        let ext = [f64::NEG_INFINITY, ln(1.0)];
        let beam = StepBeam { tokens: &[], score: 0.0, extensions: Some(&ext) };
        let picks = diverse_beam_step(&[vec![beam]], 5, 0.0);
        assert_eq!(picks[0].len(), 1);
    }
}
