use std::collections::{BTreeSet, HashMap};

use super::{LogProbRow, ReservedIds, Scorer, ScorerError, ScorerVocab, TokenId, BOS_PIECE, EOS_PIECE};
use crate::rule::{SEP, X, Y, Z};

const RESERVED_PIECES: [&str; 6] = [BOS_PIECE, EOS_PIECE, SEP, X, Y, Z];
const SPLIT_PUNCT: [char; 9] = ['.', ',', ';', ':', '!', '?', '(', ')', '"'];
const ATTACH_LEFT: [&str; 7] = [".", ",", ";", ":", "!", "?", ")"];

/// Whitespace tokenization with punctuation split into separate tokens.
/// Reserved pieces (`[X]`, `<sep>`, ...) stay atomic.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        let mut rest = chunk;
        while let Some(c) = rest.chars().next() {
            if let Some(piece) = RESERVED_PIECES.iter().find(|p| rest.starts_with(*p)) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(piece.to_string());
                rest = &rest[piece.len()..];
                continue;
            }
            if SPLIT_PUNCT.contains(&c) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            } else {
                word.push(c);
            }
            rest = &rest[c.len_utf8()..];
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Join pieces with single spaces; closing punctuation attaches to the
/// previous piece and nothing follows an opening parenthesis.
pub fn detokenize_pieces<S: AsRef<str>>(pieces: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for piece in pieces {
        let piece = piece.as_ref();
        if !glue_next && !ATTACH_LEFT.contains(&piece) {
            out.push(' ');
        }
        out.push_str(piece);
        glue_next = piece == "(";
    }
    out
}

/// One training example: the condition string and the target piece sequence
/// (without `<eos>`, which is appended during training).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub condition: String,
    pub target: Vec<String>,
}

impl TrainingPair {
    pub fn new(condition: impl Into<String>, target: Vec<String>) -> Self {
        Self { condition: condition.into(), target }
    }

    /// Tokenize `target_text` with [`tokenize`].
    pub fn from_text(condition: impl Into<String>, target_text: &str) -> Self {
        Self::new(condition, tokenize(target_text))
    }
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone, Default)]
struct CountTable {
    contexts: HashMap<Vec<TokenId>, ContextCounts>,
}

impl CountTable {
    fn add(&mut self, context: &[TokenId], next: TokenId) {
        let entry = self.contexts.entry(context.to_vec()).or_default();
        entry.total += 1;
        *entry.next.entry(next).or_default() += 1;
    }
}

/// Conditional n-gram model with add-α smoothing.
///
/// Counts are kept per exact condition string; conditions never seen in
/// training fall back to a pooled table over all conditions. The support of
/// every row is the set of tokens observed as continuations in training
/// (plus `<eos>`); every other token has probability zero.
#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    alpha: f64,
    vocab: ScorerVocab,
    continuation: Vec<bool>,
    continuation_count: usize,
    conditions: HashMap<String, CountTable>,
    pooled: CountTable,
}

/// Train a conditional n-gram model of the given order.
pub fn train_ngram(corpus: &[TrainingPair], order: usize, alpha: f64) -> Result<NgramModel, ScorerError> {
    if order < 1 {
        return Err(ScorerError::Parameter(format!("order must be >= 1, got {order}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ScorerError::Parameter(format!("alpha must be a positive finite number, got {alpha}")));
    }
    if corpus.is_empty() {
        return Err(ScorerError::Parameter("training corpus is empty".into()));
    }

    let mut pieces: Vec<String> = RESERVED_PIECES.iter().map(|p| p.to_string()).collect();
    let extra: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|pair| pair.target.iter().map(String::as_str))
        .filter(|p| !RESERVED_PIECES.contains(p))
        .collect();
    pieces.extend(extra.into_iter().map(str::to_string));
    let reserved = ReservedIds { bos: 0, eos: 1, sep: 2, x: 3, y: 4, z: 5 };
    let vocab = ScorerVocab::new(pieces, reserved)?;

    let mut continuation = vec![false; vocab.len()];
    continuation[vocab.eos_id as usize] = true;
    let mut conditions: HashMap<String, CountTable> = HashMap::new();
    let mut pooled = CountTable::default();
    let history = order - 1;

    for pair in corpus {
        let mut target = &pair.target[..];
        if target.last().map(String::as_str) == Some(EOS_PIECE) {
            target = &target[..target.len() - 1];
        }
        let mut seq: Vec<TokenId> = vec![vocab.bos_id; history];
        seq.extend(target.iter().map(|p| vocab.id(p).expect("piece added above")));
        seq.push(vocab.eos_id);

        let table = conditions.entry(pair.condition.clone()).or_default();
        for i in history..seq.len() {
            let context = &seq[i - history..i];
            continuation[seq[i] as usize] = true;
            table.add(context, seq[i]);
            pooled.add(context, seq[i]);
        }
    }
    let continuation_count = continuation.iter().filter(|c| **c).count();

    Ok(NgramModel { order, alpha, vocab, continuation, continuation_count, conditions, pooled })
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn has_condition(&self, condition: &str) -> bool {
        self.conditions.contains_key(condition)
    }

    pub fn conditions(&self) -> impl Iterator<Item = &str> {
        self.conditions.keys().map(String::as_str)
    }

    fn row(&self, table: &CountTable, prefix: &[TokenId]) -> LogProbRow {
        let history = self.order - 1;
        let mut context = vec![self.vocab.bos_id; history.saturating_sub(prefix.len())];
        context.extend(&prefix[prefix.len().saturating_sub(history)..]);

        let counts = table.contexts.get(&context);
        let total = counts.map_or(0, |c| c.total) as f64;
        let denom = total + self.alpha * self.continuation_count as f64;
        let values = (0..self.vocab.len())
            .map(|id| {
                if !self.continuation[id] {
                    return f64::NEG_INFINITY;
                }
                let c = counts
                    .and_then(|c| c.next.get(&(id as TokenId)))
                    .copied()
                    .unwrap_or(0) as f64;
                ((c + self.alpha) / denom).ln()
            })
            .collect();
        LogProbRow::new(values)
    }
}

impl Scorer for NgramModel {
    fn vocab(&self) -> &ScorerVocab {
        &self.vocab
    }

    fn next_token_logprobs(&self, condition: &str, prefixes: &[&[TokenId]]) -> Result<Vec<LogProbRow>, ScorerError> {
        for prefix in prefixes {
            self.vocab.check_ids(prefix)?;
        }
        let table = self.conditions.get(condition).unwrap_or(&self.pooled);
        Ok(prefixes.iter().map(|p| self.row(table, p)).collect())
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, ScorerError> {
        let pieces = tokens
            .iter()
            .map(|&t| self.vocab.piece(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(detokenize_pieces(&pieces))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(model: &NgramModel, pieces: &[&str]) -> Vec<TokenId> {
        pieces.iter().map(|p| model.vocab().id(p).unwrap()).collect()
    }

    #[test]
    fn tokenizer_keeps_placeholders_atomic() {
        assert_eq!(tokenize("[X] is founder of [Y]."), ["[X]", "is", "founder", "of", "[Y]", "."]);
        assert_eq!(tokenize("Steve Jobs <sep> Apple"), ["Steve", "Jobs", "<sep>", "Apple"]);
        assert_eq!(tokenize("George W. Bush has father <z>."), ["George", "W", ".", "Bush", "has", "father", "<z>", "."]);
        assert_eq!(tokenize("(a, b)"), ["(", "a", ",", "b", ")"]);
    }

    #[test]
    fn detokenize_attaches_punctuation() {
        assert_eq!(detokenize_pieces(&["[X]", "is", "founder", "of", "[Y]", "."]), "[X] is founder of [Y].");
        assert_eq!(detokenize_pieces(&["(", "a", ",", "b", ")"]), "(a, b)");
        assert_eq!(detokenize_pieces::<&str>(&[]), "");
    }

    #[test]
    fn bigram_add_alpha_hand_count() {
        // "a b <eos>": continuations {a, b, <eos>}; P(b | a) = (1 + 0.1) / (1 + 3 * 0.1)
        let model = train_ngram(&[TrainingPair::new("c", vec!["a".into(), "b".into()])], 2, 0.1).unwrap();
        let a = ids(&model, &["a"]);
        let row = &model.next_token_logprobs("c", &[&a]).unwrap()[0];
        let b = model.vocab().id("b").unwrap();
        assert!((row.get(b) - (1.1f64 / 1.3).ln()).abs() < 1e-12);
        assert_eq!(row.get(model.vocab().bos_id), f64::NEG_INFINITY);
        assert_eq!(row.get(model.vocab().x_id), f64::NEG_INFINITY);
        assert!(row.log_mass().abs() < 1e-12);
    }

    #[test]
    fn trigram_relative_frequencies_on_three_sentences() {
        let corpus = [
            TrainingPair::from_text("c", "a b a"),
            TrainingPair::from_text("c", "a b b"),
            TrainingPair::from_text("c", "b a"),
        ];
        let model = train_ngram(&corpus, 3, 0.5).unwrap();
        let v = model.vocab();
        let (a, b, eos) = (v.id("a").unwrap(), v.id("b").unwrap(), v.eos_id);
        // context (a, b) is followed by a once and b once; |C| = 3 (a, b, <eos>)
        let row = &model.next_token_logprobs("c", &[&[a, b]]).unwrap()[0];
        assert!((row.get(a) - (1.5f64 / 3.5).ln()).abs() < 1e-12);
        assert!((row.get(b) - (1.5f64 / 3.5).ln()).abs() < 1e-12);
        assert!((row.get(eos) - (0.5f64 / 3.5).ln()).abs() < 1e-12);
        // context (<bos>, <bos>) starts with a twice and b once
        let row = &model.next_token_logprobs("c", &[&[]]).unwrap()[0];
        assert!((row.get(a) - (2.5f64 / 4.5).ln()).abs() < 1e-12);
        assert!((row.get(b) - (1.5f64 / 4.5).ln()).abs() < 1e-12);
        assert!((row.get(eos) - (0.5f64 / 4.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn unseen_condition_uses_pooled_counts() {
        let corpus = [TrainingPair::from_text("c1", "a"), TrainingPair::from_text("c2", "b")];
        let model = train_ngram(&corpus, 1, 1.0).unwrap();
        let unseen = model.next_token_logprobs("never seen", &[&[]]).unwrap();
        let pooled = model.row(&model.pooled, &[]);
        assert_eq!(unseen[0], pooled);
        let seen = model.next_token_logprobs("c1", &[&[]]).unwrap();
        assert_ne!(seen[0], pooled);
    }

    #[test]
    fn parameter_errors() {
        let corpus = [TrainingPair::from_text("c", "a")];
        assert!(matches!(train_ngram(&corpus, 2, 0.0), Err(ScorerError::Parameter(_))));
        assert!(matches!(train_ngram(&corpus, 0, 0.1), Err(ScorerError::Parameter(_))));
        assert!(matches!(train_ngram(&[], 2, 0.1), Err(ScorerError::Parameter(_))));
    }

    #[test]
    fn vocab_is_fixture_tokens_plus_reserved() {
        let model = train_ngram(&[TrainingPair::from_text("c", "b a .")], 2, 0.1).unwrap();
        assert_eq!(model.vocab().pieces(), ["<bos>", "<eos>", "<sep>", "[X]", "[Y]", "<z>", ".", "a", "b"]);
    }

    #[test]
    fn queries_validate_ids_and_handle_empty_batches() {
        let model = train_ngram(&[TrainingPair::from_text("c", "a")], 2, 0.1).unwrap();
        assert!(model.next_token_logprobs("c", &[]).unwrap().is_empty());
        assert!(matches!(
            model.next_token_logprobs("c", &[&[99]]),
            Err(ScorerError::UnknownToken { id: 99, .. })
        ));
        assert!(model.detokenize(&[99]).is_err());
    }

    #[test]
    fn detokenize_placeholder_sequence() {
        let model = train_ngram(&[TrainingPair::from_text("c", "[X] is founder of [Y].")], 2, 0.1).unwrap();
        let tokens = ids(&model, &["[X]", "is", "founder", "of", "[Y]", "."]);
        assert_eq!(model.detokenize(&tokens).unwrap(), "[X] is founder of [Y].");
        assert_eq!(model.detokenize(&[]).unwrap(), "");
    }

    proptest! {
        #[test]
        fn rows_are_normalized_and_deterministic(
            sentences in proptest::collection::vec("[abc]( [abc]){0,4}", 1..6),
            order in 1usize..4,
            alpha in 0.01f64..2.0,
            prefix in proptest::collection::vec(0u32..9, 0..5),
        ) {
            let corpus: Vec<_> = sentences.iter().map(|s| TrainingPair::from_text("c", s)).collect();
            let model = train_ngram(&corpus, order, alpha).unwrap();
            let prefix: Vec<TokenId> = prefix.into_iter().map(|t| t % model.vocab().len() as u32).collect();
            let rows = model.next_token_logprobs("c", &[&prefix]).unwrap();
            prop_assert!(rows[0].log_mass().abs() < 1e-9);
            prop_assert_eq!(rows, model.next_token_logprobs("c", &[&prefix]).unwrap());
        }

        #[test]
        fn detokenize_inverts_tokenize(words in proptest::collection::vec("[A-Za-z]{1,5}|[.,;:!?]|\\[X\\]|\\[Y\\]|<sep>", 0..8)) {
            let mut text = String::new();
            for w in &words {
                text.push_str(w);
                text.push(' ');
            }
            let pieces = tokenize(&text);
            prop_assert_eq!(tokenize(&detokenize_pieces(&pieces)), pieces);
        }
    }
}
