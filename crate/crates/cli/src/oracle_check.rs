//! Self-check of the decoder against exhaustive enumeration on a toy fixture.

use anyhow::{Context, Result};
use openrule_core::sbs::{exhaustive_rule_oracle, rescore_sequence, supported_decode};
use openrule_core::scorer::{train_ngram, NgramModel, TrainingPair};
use openrule_core::{Instantiation, SbsConfig, Scorer, TokenId};
use serde::Deserialize;

pub const BUILTIN_FIXTURE: &str = include_str!("fixtures/oracle.json");

const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Deserialize)]
struct CorpusLine {
    condition: String,
    target: String,
}

#[derive(Debug, Deserialize)]
struct FixtureIns {
    x: String,
    y: String,
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct Expected {
    pieces: Vec<String>,
    global_log: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    order: usize,
    alpha: f64,
    corpus: Vec<CorpusLine>,
    instantiations: Vec<FixtureIns>,
    max_len: usize,
    k: usize,
    expected: Vec<Expected>,
}

#[derive(Debug)]
pub struct Check {
    pub name: &'static str,
    pub diffs: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.diffs.is_empty()
    }
}

fn pieces(model: &NgramModel, tokens: &[TokenId]) -> String {
    tokens.iter().map(|&t| model.vocab().piece(t).unwrap_or("?")).collect::<Vec<_>>().join(" ")
}

fn compare(expected: &[(String, f64)], got: &[(String, f64)], diffs: &mut Vec<String>) {
    for rank in 0..expected.len().max(got.len()) {
        match (expected.get(rank), got.get(rank)) {
            (Some((ep, es)), Some((gp, gs))) if ep == gp && (es - gs).abs() <= TOLERANCE => {}
            (e, g) => diffs.push(format!("rank {}: expected {:?}, got {:?}", rank + 1, e, g)),
        }
    }
}

/// Run every check on a fixture. `max_len` overrides the fixture's length
/// bound; an oversize value surfaces the oracle's size guard as an error.
pub fn run(fixture_json: &str, max_len: Option<usize>) -> Result<Vec<Check>> {
    let fixture: Fixture = serde_json::from_str(fixture_json).context("parsing oracle fixture")?;
    let max_len = max_len.unwrap_or(fixture.max_len);
    let corpus: Vec<TrainingPair> =
        fixture.corpus.iter().map(|c| TrainingPair::from_text(c.condition.clone(), &c.target)).collect();
    let model = train_ngram(&corpus, fixture.order, fixture.alpha)?;
    let total: f64 = fixture.instantiations.iter().map(|i| i.weight).sum();
    let ins: Vec<Instantiation> = fixture
        .instantiations
        .iter()
        .map(|i| Instantiation::pair(i.x.clone(), i.y.clone(), (i.weight / total).ln()))
        .collect();

    let oracle = exhaustive_rule_oracle(&ins, &model, max_len, false)?;
    let oracle_top: Vec<(String, f64)> =
        oracle.iter().take(fixture.k).map(|(t, s)| (pieces(&model, t), *s)).collect();
    let mut checks = Vec::new();

    let mut frozen = Check { name: "oracle matches frozen values", diffs: vec![] };
    let expected: Vec<(String, f64)> =
        fixture.expected.iter().map(|e| (e.pieces.join(" "), e.global_log)).collect();
    compare(&expected, &oracle_top, &mut frozen.diffs);
    checks.push(frozen);

    let width = model.vocab().len().pow(max_len as u32);
    let full = SbsConfig {
        k: fixture.k,
        max_len,
        beam_width: Some(width),
        beam_groups: 1,
        diversity_penalty: 0.0,
        ..Default::default()
    };
    let beams = supported_decode(&ins, &model, &full)?;
    let sbs_top: Vec<(String, f64)> =
        beams.iter().filter(|b| b.finished).take(fixture.k).map(|b| (pieces(&model, &b.tokens), b.global_log)).collect();
    let mut equivalence = Check { name: "full-width search matches oracle", diffs: vec![] };
    compare(&oracle_top, &sbs_top, &mut equivalence.diffs);
    checks.push(equivalence);

    let narrow = SbsConfig { k: fixture.k, max_len, beam_groups: 1, diversity_penalty: 0.0, ..Default::default() };
    let mut exact = Check { name: "returned scores re-score exactly", diffs: vec![] };
    for beam in supported_decode(&ins, &model, &narrow)? {
        let again = rescore_sequence(&ins, &model, &beam.tokens, false)?;
        if (again - beam.global_log).abs() > TOLERANCE {
            exact.diffs.push(format!("{}: stored {}, re-scored {again}", pieces(&model, &beam.tokens), beam.global_log));
        }
    }
    checks.push(exact);
    Ok(checks)
}
