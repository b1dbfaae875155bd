use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use openrule_core::eval::evaluate_openrule;
use openrule_core::ingest::load_gold;
use openrule_core::instantiate::collapse_to_unary;
use openrule_core::{generate_instantiations, supported_beam_search, Atom, Error, OpenRule, Scorer};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_scorer, sha256_hex, LoadedConfig, RunConfig};
use crate::output::{jsonl, pretty_json, write_atomic};

type PremiseResult = Result<(Vec<OpenRule>, usize), String>;

pub struct InduceArgs {
    pub premises: PathBuf,
    pub run_id: Option<String>,
    pub jobs: usize,
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Outcome {
    premise: String,
    ok: bool,
    instantiations: usize,
    rules: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Default, Serialize)]
struct Counts {
    premises: usize,
    succeeded: usize,
    failed: usize,
    rules: usize,
}

/// Wall-clock milliseconds, kept out of the manifest so that it is
/// reproducible byte for byte.
#[derive(Debug, Default, Serialize)]
struct Timings {
    load_scorers: u64,
    induce: u64,
    per_premise: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    status: &'static str,
    config_sha256: String,
    config: &'a RunConfig,
    premises_path: String,
    premises_sha256: String,
    counts: Counts,
    outcomes: Vec<Outcome>,
}

/// Premises file: one atom per line; blank lines and `#` comments skipped.
pub fn read_premises(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn induce_one(
    premise: &str,
    config: &RunConfig,
    ins_scorer: &dyn Scorer,
    app_scorer: &dyn Scorer,
) -> Result<(Vec<OpenRule>, usize), Error> {
    let atom = Atom::new(premise)?;
    let mut ins = generate_instantiations(&atom, ins_scorer, &config.instantiation)?;
    if config.sbs.new_variable {
        ins = collapse_to_unary(&ins);
    }
    let rules = supported_beam_search(&atom, &ins, app_scorer, &config.sbs)?;
    Ok((rules, ins.len()))
}

/// Run induction; returns the run directory and whether any premise succeeded.
pub fn run(loaded: &LoadedConfig, args: &InduceArgs) -> Result<(PathBuf, bool)> {
    let config = &loaded.config;
    config.validate()?;
    let premises_text =
        std::fs::read_to_string(&args.premises).with_context(|| format!("reading {}", args.premises.display()))?;
    let premises = read_premises(&premises_text);
    let config_sha = config.sha256();
    let premises_sha = sha256_hex(premises_text.as_bytes());
    let run_id = args
        .run_id
        .clone()
        .unwrap_or_else(|| sha256_hex(format!("{config_sha}\n{premises_sha}").as_bytes())[..16].to_string());
    let dir = loaded.resolve(&config.output_dir).join(&run_id);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let manifest = |status, counts, outcomes| Manifest {
        run_id: &run_id,
        status,
        config_sha256: config_sha.clone(),
        config,
        premises_path: args.premises.display().to_string(),
        premises_sha256: premises_sha.clone(),
        counts,
        outcomes,
    };
    let manifest_path = dir.join("manifest.json");
    write_atomic(&manifest_path, pretty_json(&manifest("running", Counts::default(), vec![])).as_bytes())?;

    let started = Instant::now();
    let scorers = build_scorer(&config.instantiation_scorer, loaded)
        .and_then(|i| Ok((i, build_scorer(&config.applicability_scorer, loaded)?)));
    let load_ms = started.elapsed().as_millis() as u64;

    let induce_start = Instant::now();
    let results: Vec<(PremiseResult, u64)> = match &scorers {
        Err(e) => {
            log::error!("scorer setup failed: {e:#}");
            premises.iter().map(|_| (Err(format!("scorer setup failed: {e:#}")), 0)).collect()
        }
        Ok((ins_scorer, app_scorer)) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
            pool.install(|| {
                premises
                    .par_iter()
                    .map(|p| {
                        let t = Instant::now();
                        let r = induce_one(p, config, ins_scorer.as_ref(), app_scorer.as_ref()).map_err(|e| e.to_string());
                        if let Err(e) = &r {
                            log::warn!("premise {p:?} failed: {e}");
                        }
                        (r, t.elapsed().as_millis() as u64)
                    })
                    .collect()
            })
        }
    };
    let induce_ms = induce_start.elapsed().as_millis() as u64;

    let mut rules = Vec::new();
    let mut outcomes = Vec::new();
    let mut counts = Counts { premises: premises.len(), ..Default::default() };
    let mut per_premise = Vec::new();
    for (premise, (result, ms)) in premises.iter().zip(results) {
        per_premise.push(ms);
        match result {
            Ok((premise_rules, n_ins)) => {
                counts.succeeded += 1;
                counts.rules += premise_rules.len();
                outcomes.push(Outcome { premise: premise.clone(), ok: true, instantiations: n_ins, rules: premise_rules.len(), error: None });
                rules.extend(premise_rules);
            }
            Err(e) => {
                counts.failed += 1;
                outcomes.push(Outcome { premise: premise.clone(), ok: false, instantiations: 0, rules: 0, error: Some(e) });
            }
        }
    }

    write_atomic(&dir.join("rules.jsonl"), jsonl(&rules).as_bytes())?;
    if let Some(gold) = &args.gold {
        match load_gold(gold).map_err(anyhow::Error::from).and_then(|g| Ok(evaluate_openrule(&g, &rules)?)) {
            Ok(report) => write_atomic(&dir.join("metrics.json"), pretty_json(&report).as_bytes())?,
            Err(e) => log::warn!("skipping metrics: {e:#}"),
        }
    }

    let any_ok = counts.succeeded > 0 || premises.is_empty();
    let status = if any_ok { "complete" } else { "failed" };
    let timings = Timings { load_scorers: load_ms, induce: induce_ms, per_premise };
    write_atomic(&dir.join("timings.json"), pretty_json(&timings).as_bytes())?;
    write_atomic(&manifest_path, pretty_json(&manifest(status, counts, outcomes)).as_bytes())?;
    Ok((dir, any_ok))
}
