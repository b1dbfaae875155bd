//! The conditional language-model contract used by every decoder.
//!
//! A [`Scorer`] maps a condition string (a rendered prompt) and a batch of
//! token-id prefixes to one normalized next-token log-distribution per prefix.
//! Decoding happens in a shared placeholder space: targets contain the
//! reserved `[X]`/`[Y]`/`<z>` tokens, never entity surfaces.

mod ngram;
mod remote;
pub mod wire;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logspace::logsumexp;

pub use ngram::{detokenize_pieces, tokenize, train_ngram, NgramModel, TrainingPair};
pub use remote::{RemoteConfig, RemoteScorer, AUTH_TOKEN_ENV};

pub type TokenId = u32;

pub const BOS_PIECE: &str = "<bos>";
pub const EOS_PIECE: &str = "<eos>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("unknown token id {id} (vocabulary size {size})")]
    UnknownToken { id: TokenId, size: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Token space of a scorer. Ids are `0..len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::VocabResponse", into = "wire::VocabResponse")]
pub struct ScorerVocab {
    pieces: Vec<String>,
    index: HashMap<String, TokenId>,
    pub bos_id: TokenId,
    pub eos_id: TokenId,
    pub sep_id: TokenId,
    pub x_id: TokenId,
    pub y_id: TokenId,
    pub z_id: TokenId,
}

/// Reserved ids of a vocabulary, in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReservedIds {
    pub bos: TokenId,
    pub eos: TokenId,
    pub sep: TokenId,
    pub x: TokenId,
    pub y: TokenId,
    pub z: TokenId,
}

impl ScorerVocab {
    pub fn new(pieces: Vec<String>, reserved: ReservedIds) -> Result<Self, ScorerError> {
        let mut index = HashMap::with_capacity(pieces.len());
        for (id, piece) in pieces.iter().enumerate() {
            if index.insert(piece.clone(), id as TokenId).is_some() {
                return Err(ScorerError::InvalidVocab(format!("duplicate piece {piece:?}")));
            }
        }
        let ids = [reserved.bos, reserved.eos, reserved.sep, reserved.x, reserved.y, reserved.z];
        for (i, id) in ids.iter().enumerate() {
            if *id as usize >= pieces.len() {
                return Err(ScorerError::InvalidVocab(format!("reserved id {id} out of range")));
            }
            if ids[..i].contains(id) {
                return Err(ScorerError::InvalidVocab(format!("reserved id {id} assigned twice")));
            }
        }
        Ok(Self {
            pieces,
            index,
            bos_id: reserved.bos,
            eos_id: reserved.eos,
            sep_id: reserved.sep,
            x_id: reserved.x,
            y_id: reserved.y,
            z_id: reserved.z,
        })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn reserved(&self) -> ReservedIds {
        ReservedIds {
            bos: self.bos_id,
            eos: self.eos_id,
            sep: self.sep_id,
            x: self.x_id,
            y: self.y_id,
            z: self.z_id,
        }
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn piece(&self, id: TokenId) -> Result<&str, ScorerError> {
        self.pieces
            .get(id as usize)
            .map(String::as_str)
            .ok_or(ScorerError::UnknownToken { id, size: self.pieces.len() })
    }

    pub fn id(&self, piece: &str) -> Option<TokenId> {
        self.index.get(piece).copied()
    }

    pub fn check_ids(&self, tokens: &[TokenId]) -> Result<(), ScorerError> {
        match tokens.iter().find(|&&t| t as usize >= self.pieces.len()) {
            Some(&id) => Err(ScorerError::UnknownToken { id, size: self.pieces.len() }),
            None => Ok(()),
        }
    }
}

/// `log P(next token | condition, prefix)` for every vocabulary entry.
///
/// `residual` holds log-mass the backend did not attribute to any listed
/// token (truncated rows); decoders treat it as an unreachable pseudo-token.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbRow {
    pub values: Vec<f64>,
    pub residual: f64,
}

impl LogProbRow {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, residual: f64::NEG_INFINITY }
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.values[id as usize]
    }

    /// Total log-mass, zero for a normalized row.
    pub fn log_mass(&self) -> f64 {
        let mut all = self.values.clone();
        all.push(self.residual);
        logsumexp(&all)
    }
}

/// A conditional next-token model. Implementations are immutable after
/// construction and safe to query from many threads.
pub trait Scorer: Send + Sync {
    fn vocab(&self) -> &ScorerVocab;

    /// One normalized row per prefix, in prefix order.
    fn next_token_logprobs(
        &self,
        condition: &str,
        prefixes: &[&[TokenId]],
    ) -> Result<Vec<LogProbRow>, ScorerError>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ScorerError>;
}

macro_rules! forward_scorer {
    ($($ty:ty),*) => {$(
        impl<S: Scorer + ?Sized> Scorer for $ty {
            fn vocab(&self) -> &ScorerVocab {
                (**self).vocab()
            }

            fn next_token_logprobs(
                &self,
                condition: &str,
                prefixes: &[&[TokenId]],
            ) -> Result<Vec<LogProbRow>, ScorerError> {
                (**self).next_token_logprobs(condition, prefixes)
            }

            fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ScorerError> {
                (**self).detokenize(tokens)
            }
        }
    )*};
}

forward_scorer!(&S, Box<S>, Arc<S>);

/// Sum of per-token log-probabilities of `tokens` under `condition`, queried
/// one prefix at a time. Used to re-score fixed sequences independently of any
/// search procedure.
pub fn sequence_log_likelihood<S: Scorer + ?Sized>(
    scorer: &S,
    condition: &str,
    tokens: &[TokenId],
) -> Result<f64, ScorerError> {
    let mut total = 0.0;
    for t in 0..tokens.len() {
        let row = scorer.next_token_logprobs(condition, &[&tokens[..t]])?;
        total += row[0].get(tokens[t]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reserved() -> ReservedIds {
        ReservedIds { bos: 0, eos: 1, sep: 2, x: 3, y: 4, z: 5 }
    }

    fn pieces(extra: &[&str]) -> Vec<String> {
        ["<bos>", "<eos>", "<sep>", "[X]", "[Y]", "<z>"]
            .iter()
            .chain(extra)
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn vocab_validation() {
        let vocab = ScorerVocab::new(pieces(&["a"]), reserved()).unwrap();
        assert_eq!(vocab.len(), 7);
        assert_eq!(vocab.id("a"), Some(6));
        assert_eq!(vocab.piece(6).unwrap(), "a");
        assert!(matches!(vocab.piece(7), Err(ScorerError::UnknownToken { id: 7, size: 7 })));
        assert!(ScorerVocab::new(pieces(&["a", "a"]), reserved()).is_err());
        let mut r = reserved();
        r.z = 3;
        assert!(ScorerVocab::new(pieces(&[]), r).is_err());
        r.z = 40;
        assert!(ScorerVocab::new(pieces(&[]), r).is_err());
    }

    #[test]
    fn row_mass_includes_residual() {
        let row = LogProbRow { values: vec![0.25f64.ln(), 0.25f64.ln()], residual: 0.5f64.ln() };
        assert!(row.log_mass().abs() < 1e-15);
    }
}
