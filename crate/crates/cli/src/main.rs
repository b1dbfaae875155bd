use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod induce;
mod oracle_check;
mod output;

use commands::{CorpusArgs, CoverageArgs, EvalMode};
use config::LoadedConfig;
use induce::InduceArgs;

#[derive(Parser)]
#[command(name = "openrule", version, about = "Open rule induction over language-model scorers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override values from the config file.
#[derive(clap::Args)]
struct Overrides {
    /// Number of hypotheses per premise.
    #[arg(long)]
    k: Option<usize>,
    /// Number of instantiations per premise.
    #[arg(long)]
    instantiations: Option<usize>,
    /// Maximum hypothesis length in tokens.
    #[arg(long)]
    max_len: Option<usize>,
    /// Decode hypotheses with an unbound second variable.
    #[arg(long)]
    new_variable: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Induce rules for every premise in a file.
    Induce {
        #[arg(long)]
        config: PathBuf,
        /// One premise atom per line.
        #[arg(long)]
        premises: PathBuf,
        /// Run directory name; defaults to a hash of config and premises.
        #[arg(long)]
        run_id: Option<String>,
        /// Premises processed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Gold file to score the run against.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the instantiations of one premise as JSONL.
    Instantiate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        premise: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build the two training corpora from raw documents.
    BuildCorpus {
        /// Plain-text (one document per line) or JSONL `{"text"}` files.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        /// Entity gazetteer, `surface<TAB>LABEL` per line.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Abbreviations that do not end a sentence, one per line.
        #[arg(long)]
        abbreviations: Option<PathBuf>,
        #[arg(long)]
        new_variable: bool,
    },
    /// Score a rules file against a gold file.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMode::Openrule)]
        mode: EvalMode,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the decoder against exhaustive enumeration on a toy fixture.
    OracleCheck {
        /// Fixture JSON; the built-in fixture is used when absent.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Sample premises and gold hypotheses from a relation dataset.
    PrepareCoverage {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        per_relation: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        premises_out: PathBuf,
        #[arg(long)]
        gold_out: PathBuf,
    },
}

fn load_config(path: &Path, o: &Overrides) -> Result<LoadedConfig> {
    let mut loaded = LoadedConfig::load(path)?;
    let c = &mut loaded.config;
    if let Some(k) = o.k {
        c.sbs.k = k;
    }
    if let Some(n) = o.instantiations {
        c.instantiation.k = n;
    }
    if let Some(t) = o.max_len {
        c.sbs.max_len = t;
    }
    if o.new_variable {
        c.sbs.new_variable = true;
    }
    if let Some(dir) = &o.output_dir {
        c.output_dir = dir.clone();
    }
    if let Some(seed) = o.seed {
        c.seed = seed;
    }
    Ok(loaded)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Induce { config, premises, run_id, jobs, gold, overrides } => {
            let loaded = load_config(&config, &overrides)?;
            let (dir, ok) = induce::run(&loaded, &InduceArgs { premises, run_id, jobs, gold })?;
            println!("{}", dir.display());
            Ok(ok)
        }
        Command::Instantiate { config, premise, overrides } => {
            let loaded = load_config(&config, &overrides)?;
            print!("{}", output::jsonl(&commands::instantiate(&loaded, &premise)?));
            Ok(true)
        }
        Command::BuildCorpus { inputs, output_dir, gazetteer, abbreviations, new_variable } => {
            let stats =
                commands::build_corpus_files(&CorpusArgs { inputs, output_dir, gazetteer, abbreviations, new_variable })?;
            print!("{}", output::pretty_json(&stats));
            Ok(true)
        }
        Command::Evaluate { gold, rules, mode, out } => {
            let report = output::pretty_json(&commands::evaluate(&gold, &rules, mode)?);
            if let Some(out) = out {
                output::write_atomic(&out, report.as_bytes())?;
            }
            print!("{report}");
            Ok(true)
        }
        Command::OracleCheck { fixture, max_len } => {
            let text = match fixture {
                Some(p) => std::fs::read_to_string(&p)?,
                None => oracle_check::BUILTIN_FIXTURE.to_string(),
            };
            let checks = oracle_check::run(&text, max_len)?;
            for c in &checks {
                println!("{} {}", if c.passed() { "PASS" } else { "FAIL" }, c.name);
                for d in &c.diffs {
                    println!("    {d}");
                }
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
        Command::PrepareCoverage { dataset, per_relation, seed, premises_out, gold_out } => {
            let n = commands::prepare_coverage(&CoverageArgs { dataset, per_relation, seed, premises_out, gold_out })?;
            println!("{n} premises");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
