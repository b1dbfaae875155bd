use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use openrule_core::corpus::{build_corpus, read_documents, RuleTagger, SentenceSplitter};
use openrule_core::eval::{coverage_eval, evaluate_openrule, hypotheses_by_premise, MetricReport};
use openrule_core::ingest::{gold_hypothesis_for, load_gold, load_relation_dataset, sample_relation_subset, GoldItem};
use openrule_core::{generate_instantiations, Atom, Instantiation, OpenRule};

use crate::config::{build_scorer, LoadedConfig};
use crate::output::{jsonl, pretty_json, write_atomic};

pub fn instantiate(loaded: &LoadedConfig, premise: &str) -> Result<Vec<Instantiation>> {
    loaded.config.validate()?;
    let atom = Atom::new(premise)?;
    let scorer = build_scorer(&loaded.config.instantiation_scorer, loaded)?;
    Ok(generate_instantiations(&atom, scorer.as_ref(), &loaded.config.instantiation)?)
}

pub struct CorpusArgs {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub gazetteer: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub new_variable: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Returns the stats written to `stats.json`.
pub fn build_corpus_files(args: &CorpusArgs) -> Result<openrule_core::corpus::CorpusStats> {
    let tagger = match &args.gazetteer {
        Some(p) => RuleTagger::from_gazetteer(&read(p)?).with_context(|| format!("gazetteer {}", p.display()))?,
        None => RuleTagger::new(),
    };
    let splitter = match &args.abbreviations {
        Some(p) => SentenceSplitter::from_abbreviation_file(&read(p)?),
        None => SentenceSplitter::default(),
    };
    let mut documents = Vec::new();
    for input in &args.inputs {
        documents.extend(read_documents(input)?);
    }
    let out = build_corpus(&documents, &splitter, &tagger, args.new_variable);
    std::fs::create_dir_all(&args.output_dir).with_context(|| format!("creating {}", args.output_dir.display()))?;
    write_atomic(&args.output_dir.join("instantiation.jsonl"), jsonl(&out.instantiation).as_bytes())?;
    write_atomic(&args.output_dir.join("applicability.jsonl"), jsonl(&out.applicability).as_bytes())?;
    write_atomic(&args.output_dir.join("stats.json"), pretty_json(&out.stats).as_bytes())?;
    Ok(out.stats)
}

fn load_rules(path: &Path) -> Result<Vec<OpenRule>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: bad rule record", path.display(), n + 1)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    /// Mean over induced hypotheses against all gold hypotheses.
    Openrule,
    /// Best induced hypothesis against the first gold hypothesis.
    Coverage,
}

pub fn evaluate(gold: &Path, rules: &Path, mode: EvalMode) -> Result<MetricReport> {
    let gold = load_gold(gold)?;
    let rules = load_rules(rules)?;
    Ok(match mode {
        EvalMode::Openrule => evaluate_openrule(&gold, &rules)?,
        EvalMode::Coverage => {
            let pairs = gold
                .iter()
                .map(|g| Ok((Atom::new(g.premise.as_str())?, Atom::new(g.hypotheses[0].as_str())?)))
                .collect::<Result<Vec<_>>>()?;
            coverage_eval(&pairs, &hypotheses_by_premise(&rules))?
        }
    })
}

pub struct CoverageArgs {
    pub dataset: PathBuf,
    pub per_relation: usize,
    pub seed: u64,
    pub premises_out: PathBuf,
    pub gold_out: PathBuf,
}

/// Sample premises from a relation dataset and write the premises file plus
/// a gold file pairing each premise with its relation's hypothesis atom.
pub fn prepare_coverage(args: &CoverageArgs) -> Result<usize> {
    let loaded = load_relation_dataset(&args.dataset)?;
    if loaded.malformed > 0 {
        log::warn!("{} malformed lines skipped", loaded.malformed);
    }
    let subset = sample_relation_subset(&loaded.samples, args.per_relation, args.seed)?;
    let mut seen = HashSet::new();
    let mut premises = String::new();
    let mut gold = Vec::new();
    for sample in &subset.samples {
        let (premise, hypothesis) = match (sample.premise_atom(), gold_hypothesis_for(&sample.relation)) {
            (Ok(p), Ok(h)) => (p, h),
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("skipping sample {:?}: {e}", sample.text);
                continue;
            }
        };
        if !seen.insert(premise.as_str().to_string()) {
            continue;
        }
        premises.push_str(premise.as_str());
        premises.push('\n');
        gold.push(GoldItem { premise: premise.as_str().into(), hypotheses: vec![hypothesis.as_str().into()] });
    }
    if gold.is_empty() {
        bail!("no usable samples in {}", args.dataset.display());
    }
    write_atomic(&args.premises_out, premises.as_bytes())?;
    write_atomic(&args.gold_out, jsonl(&gold).as_bytes())?;
    Ok(gold.len())
}
