use thiserror::Error;

use crate::corpus::CorpusError;
use crate::eval::EvalError;
use crate::ingest::IngestError;
use crate::instantiate::InstantiateError;
use crate::rule::RuleError;
use crate::sbs::SbsError;
use crate::scorer::ScorerError;

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error(transparent)]
    Sbs(#[from] SbsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
