//! Open rule induction over conditional language-model scorers.
//!
//! A premise atom such as `"[X] is founder of [Y]."` is grounded into a
//! weighted set of entity pairs by [`instantiate`], and hypothesis atoms
//! shared across those pairs are decoded by [`sbs`]. [`corpus`] builds the
//! training data for the two scorers, [`eval`] scores induced rules.

pub mod corpus;
mod error;
pub mod eval;
pub mod ingest;
pub mod instantiate;
pub mod logspace;
pub mod rule;
pub mod sbs;
pub mod scorer;

pub use error::Error;
pub use instantiate::{generate_instantiations, InstantiateError, InstantiationConfig};
pub use rule::{Atom, CharSpan, Instantiation, OpenRule, RelationStyle, RuleError};
pub use sbs::{exhaustive_rule_oracle, supported_beam_search, Beam, SbsConfig, SbsError};
pub use scorer::{LogProbRow, Scorer, ScorerError, ScorerVocab, TokenId};
