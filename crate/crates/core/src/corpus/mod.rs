//! Weak-supervision corpus construction from raw text.

mod patterns;
mod split;
mod tagger;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use patterns::is_numeric_or_date;
pub use split::SentenceSplitter;
pub use tagger::{EntityLabel, RuleTagger, Tag, Tagger, TaggerError};

use crate::rule::{CharSpan, MASK, MASK_X, MASK_Y, MASK_Z, SEP, X, Y, Z};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Record { path: String, line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    EntityMasked,
    RelationMasked,
}

/// One training record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedExample {
    pub source_text: String,
    pub kind: ExampleKind,
    pub input_text: String,
    pub target_text: String,
    pub entity_spans: Vec<CharSpan>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub new_variable: bool,
}

/// A sentence with one or two surviving entity mentions, in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalSentence {
    pub text: String,
    pub entities: Vec<Tag>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences_seen: u64,
    pub emitted: u64,
    pub filtered_entities: u64,
    pub tagger_failures: u64,
}

impl CorpusStats {
    fn merge(mut self, other: CorpusStats) -> Self {
        self.sentences_seen += other.sentences_seen;
        self.emitted += other.emitted;
        self.filtered_entities += other.filtered_entities;
        self.tagger_failures += other.tagger_failures;
        self
    }
}

const RESERVED_MARKERS: [&str; 8] = [X, Y, Z, MASK_X, MASK_Y, MASK, MASK_Z, SEP];

fn ends_with_terminator(text: &str) -> bool {
    text.ends_with(['.', '!', '?'])
}

fn with_terminator(mut text: String) -> String {
    if !ends_with_terminator(&text) {
        text.push('.');
    }
    text
}

/// Drop DATE/NUMBER mentions and any mention whose surface looks numeric.
pub fn filter_entities(tags: Vec<Tag>) -> Vec<Tag> {
    tags.into_iter().filter(|t| !t.label.is_numeric() && !is_numeric_or_date(&t.text)).collect()
}

/// Split documents into sentences and keep those with one or two entities
/// after filtering. Sentences that already contain reserved markers are
/// skipped, as are sentences the tagger fails on.
pub fn extract_relational_sentences<T: Tagger + ?Sized>(
    document: &str,
    splitter: &SentenceSplitter,
    tagger: &T,
) -> (Vec<RelationalSentence>, CorpusStats) {
    let mut stats = CorpusStats::default();
    let mut out = Vec::new();
    for sentence in splitter.split(document) {
        stats.sentences_seen += 1;
        if RESERVED_MARKERS.iter().any(|m| sentence.contains(m)) {
            continue;
        }
        let tags = match tagger.tag(sentence) {
            Ok(tags) => tags,
            Err(e) => {
                log::warn!("skipping sentence: {e}");
                stats.tagger_failures += 1;
                continue;
            }
        };
        let before = tags.len();
        let mut entities = filter_entities(tags);
        stats.filtered_entities += (before - entities.len()) as u64;
        entities.sort_by_key(|t| t.span.start);
        let disjoint = entities.windows(2).all(|w| !w[0].span.overlaps(&w[1].span));
        if (1..=2).contains(&entities.len()) && disjoint {
            stats.emitted += 1;
            out.push(RelationalSentence { text: sentence.to_string(), entities });
        }
    }
    (out, stats)
}

/// Replace each span with the matching replacement, left to right.
fn substitute(text: &str, spans: &[CharSpan], replacements: &[&str]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for (span, rep) in spans.iter().zip(replacements) {
        out.extend(&chars[pos..span.start]);
        out.push_str(rep);
        pos = span.end;
    }
    out.extend(&chars[pos..]);
    out
}

/// Entity-masked record: entities become `<mask_x>`/`<mask_y>`, the target
/// lists their surfaces joined by `<sep>`.
pub fn build_instantiation_example(sentence: &RelationalSentence) -> MaskedExample {
    let spans: Vec<CharSpan> = sentence.entities.iter().map(|t| t.span).collect();
    let surfaces: Vec<&str> = sentence.entities.iter().map(|t| t.text.as_str()).collect();
    MaskedExample {
        source_text: sentence.text.clone(),
        kind: ExampleKind::EntityMasked,
        input_text: substitute(&sentence.text, &spans, &[MASK_X, MASK_Y]),
        target_text: surfaces.join(&format!(" {SEP} ")),
        entity_spans: spans,
        new_variable: false,
    }
}

/// Relation-masked record. Standard mode keeps the entity surfaces around a
/// single `<mask>` and targets the source with `[X]`/`[Y]`; new-variable mode
/// prompts with the first entity and `<mask_z>` and targets the source with
/// the second entity replaced by `<z>`. New-variable mode needs two entities.
/// Targets always end with a sentence terminator.
pub fn build_applicability_example(sentence: &RelationalSentence, new_variable: bool) -> Option<MaskedExample> {
    let spans: Vec<CharSpan> = sentence.entities.iter().map(|t| t.span).collect();
    let first = sentence.entities.first()?;
    let (input_text, target_text) = if new_variable {
        let second = sentence.entities.get(1)?;
        (
            format!("{} {MASK_Z}", first.text),
            substitute(&sentence.text, &[second.span], &[Z]),
        )
    } else {
        let input = match sentence.entities.get(1) {
            Some(second) => format!("{} {MASK} {}.", first.text, second.text),
            None => format!("{} {MASK}.", first.text),
        };
        (input, substitute(&sentence.text, &spans, &[X, Y]))
    };
    Some(MaskedExample {
        source_text: sentence.text.clone(),
        kind: ExampleKind::RelationMasked,
        input_text,
        target_text: with_terminator(target_text),
        entity_spans: spans,
        new_variable,
    })
}

pub fn build_instantiation_corpus(sentences: &[RelationalSentence]) -> Vec<MaskedExample> {
    sentences.iter().map(build_instantiation_example).collect()
}

pub fn build_applicability_corpus(sentences: &[RelationalSentence], new_variable: bool) -> Vec<MaskedExample> {
    sentences.iter().filter_map(|s| build_applicability_example(s, new_variable)).collect()
}

impl MaskedExample {
    /// Entity surfaces in text order, read from the source spans.
    pub fn entity_surfaces(&self) -> Vec<&str> {
        self.entity_spans.iter().map(|s| s.slice(&self.source_text)).collect()
    }

    /// Rebuild the source from `input_text` and `target_text` alone.
    ///
    /// Entity-masked records reconstruct byte-exactly. Relation-masked
    /// records reconstruct up to the terminator appended to sources lacking
    /// one; new-variable records leave `<z>` in place of the second entity.
    pub fn reconstruct(&self) -> Option<String> {
        match self.kind {
            ExampleKind::EntityMasked => {
                let sep = format!(" {SEP} ");
                let mut parts = self.target_text.split(&sep);
                let x = parts.next()?;
                let y = parts.next();
                if parts.next().is_some() {
                    return None;
                }
                let text = self.input_text.replacen(MASK_X, x, 1);
                Some(match y {
                    Some(y) => text.replacen(MASK_Y, y, 1),
                    None => text,
                })
            }
            ExampleKind::RelationMasked if self.new_variable => {
                let x = self.input_text.strip_suffix(&format!(" {MASK_Z}"))?;
                self.target_text.starts_with(x).then(|| self.target_text.clone())
            }
            ExampleKind::RelationMasked => {
                let body = self.input_text.strip_suffix('.')?;
                let (x, y) = match body.split_once(&format!(" {MASK} ")) {
                    Some((x, y)) => (x, Some(y)),
                    None => (body.strip_suffix(&format!(" {MASK}"))?, None),
                };
                let text = self.target_text.replacen(X, x, 1);
                Some(match y {
                    Some(y) => text.replacen(Y, y, 1),
                    None => text,
                })
            }
        }
    }

    /// Target in placeholder space: relation-masked new-variable targets
    /// have their first entity surface replaced by `[X]`.
    pub fn placeholder_target(&self) -> String {
        if self.kind == ExampleKind::RelationMasked && self.new_variable {
            if let Some(first) = self.entity_spans.first() {
                let z = self.entity_spans.get(1).map(|s| (*s, Z));
                let (spans, reps): (Vec<CharSpan>, Vec<&str>) = std::iter::once((*first, X)).chain(z).unzip();
                return with_terminator(substitute(&self.source_text, &spans, &reps));
            }
        }
        self.target_text.clone()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusOutput {
    pub instantiation: Vec<MaskedExample>,
    pub applicability: Vec<MaskedExample>,
    pub stats: CorpusStats,
}

/// Build both corpora. Documents are processed in parallel; output keeps
/// document order.
pub fn build_corpus<T: Tagger + ?Sized>(
    documents: &[String],
    splitter: &SentenceSplitter,
    tagger: &T,
    new_variable: bool,
) -> CorpusOutput {
    let per_doc: Vec<(Vec<RelationalSentence>, CorpusStats)> =
        documents.par_iter().map(|d| extract_relational_sentences(d, splitter, tagger)).collect();
    let mut out = CorpusOutput::default();
    for (sentences, stats) in per_doc {
        out.instantiation.extend(build_instantiation_corpus(&sentences));
        out.applicability.extend(build_applicability_corpus(&sentences, new_variable));
        out.stats = out.stats.merge(stats);
    }
    out
}

#[derive(Deserialize)]
struct DocumentRecord {
    text: String,
}

/// Read documents: `.jsonl` files hold one `{"text": ...}` object per line,
/// any other file holds one document per non-blank line.
pub fn read_documents(path: &Path) -> Result<Vec<String>, CorpusError> {
    let display = path.display().to_string();
    let contents =
        std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let mut docs = Vec::new();
    for (n, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if jsonl {
            let record: DocumentRecord = serde_json::from_str(line).map_err(|e| CorpusError::Record {
                path: display.clone(),
                line: n + 1,
                reason: e.to_string(),
            })?;
            docs.push(record.text);
        } else {
            docs.push(line.to_string());
        }
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagger() -> RuleTagger {
        RuleTagger::from_gazetteer("Steve Jobs\tPER\nApple\tORG\n").unwrap()
    }

    fn sentence(text: &str) -> RelationalSentence {
        let (mut found, _) = extract_relational_sentences(text, &SentenceSplitter::default(), &RuleTagger::new());
        assert_eq!(found.len(), 1, "{text}");
        found.remove(0)
    }

    #[test]
    fn extracts_sentences_with_one_or_two_entities() {
        let (found, stats) =
            extract_relational_sentences("Steve Jobs founded Apple. It rained.", &SentenceSplitter::default(), &tagger());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].text, "Steve Jobs founded Apple.");
        assert_eq!(stats, CorpusStats { sentences_seen: 2, emitted: 1, filtered_entities: 0, tagger_failures: 0 });

        let (found, _) = extract_relational_sentences(
            "Alice met Bob in Paris.",
            &SentenceSplitter::default(),
            &RuleTagger::new(),
        );
        assert!(found.is_empty());
        let (found, stats) = extract_relational_sentences("", &SentenceSplitter::default(), &tagger());
        assert!(found.is_empty());
        assert_eq!(stats, CorpusStats::default());
    }

    #[test]
    fn numeric_entities_are_filtered_and_counted() {
        let (found, stats) = extract_relational_sentences(
            "Apple was founded in 1976.",
            &SentenceSplitter::default(),
            &tagger(),
        );
        assert_eq!(found[0].entities.len(), 1);
        assert_eq!(stats.filtered_entities, 1);

        let tag = |text: &str, label| Tag { span: CharSpan::new(0, text.chars().count()), label, text: text.into() };
        let kept = filter_entities(vec![tag("Apple", EntityLabel::Organization), tag("1976", EntityLabel::Date)]);
        assert_eq!(kept, [tag("Apple", EntityLabel::Organization)]);
        assert!(filter_entities(vec![tag("42", EntityLabel::Number)]).is_empty());
        // a numeric surface is dropped even under a named-entity label
        assert!(filter_entities(vec![tag("1,000", EntityLabel::Misc)]).is_empty());
    }

    #[test]
    fn instantiation_examples() {
        let ex = build_instantiation_example(&sentence("Steve Jobs founded Apple."));
        assert_eq!(ex.input_text, "<mask_x> founded <mask_y>.");
        assert_eq!(ex.target_text, "Steve Jobs <sep> Apple");
        assert_eq!(ex.reconstruct().unwrap(), ex.source_text);

        let ex = build_instantiation_example(&sentence("It rained in Paris."));
        assert_eq!(ex.input_text, "It rained in <mask_x>.");
        assert_eq!(ex.target_text, "Paris");
        assert_eq!(ex.reconstruct().unwrap(), ex.source_text);
    }

    #[test]
    fn applicability_examples() {
        let ex = build_applicability_example(&sentence("Steve Jobs founded Apple."), false).unwrap();
        assert_eq!(ex.input_text, "Steve Jobs <mask> Apple.");
        assert_eq!(ex.target_text, "[X] founded [Y].");
        assert_eq!(ex.reconstruct().unwrap(), ex.source_text);

        let ex = build_applicability_example(&sentence("It rained in Paris."), false).unwrap();
        assert_eq!(ex.input_text, "Paris <mask>.");
        assert_eq!(ex.target_text, "It rained in [X].");
        assert!(build_applicability_example(&sentence("It rained in Paris."), true).is_none());
    }

    #[test]
    fn new_variable_example() {
        let s = sentence("George W. Bush has father George H. W. Bush");
        let ex = build_applicability_example(&s, true).unwrap();
        assert_eq!(ex.input_text, "George W. Bush <mask_z>");
        assert_eq!(ex.target_text, "George W. Bush has father <z>.");
        assert_eq!(ex.placeholder_target(), "[X] has father <z>.");
        assert_eq!(ex.reconstruct().unwrap(), ex.target_text);
    }

    #[test]
    fn jsonl_shape() {
        let ex = build_instantiation_example(&sentence("Steve Jobs founded Apple."));
        assert_eq!(
            serde_json::to_string(&ex).unwrap(),
            r#"{"source_text":"Steve Jobs founded Apple.","kind":"entity_masked","input_text":"<mask_x> founded <mask_y>.","target_text":"Steve Jobs <sep> Apple","entity_spans":[[0,10],[19,24]]}"#
        );
    }

    #[test]
    fn build_corpus_keeps_document_order() {
        let docs: Vec<String> = (0..20).map(|i| format!("Person{i} visited Paris. It rained.")).collect();
        let out = build_corpus(&docs, &SentenceSplitter::default(), &RuleTagger::new(), false);
        assert_eq!(out.instantiation.len(), 20);
        for (i, ex) in out.instantiation.iter().enumerate() {
            assert!(ex.source_text.starts_with(&format!("Person{i} ")));
        }
        assert_eq!(out.stats.sentences_seen, 40);
        assert_eq!(out.stats.emitted, 20);
    }

    #[test]
    fn reads_plain_and_jsonl_documents() {
        let dir = std::env::temp_dir().join(format!("openrule-docs-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let plain = dir.join("docs.txt");
        std::fs::write(&plain, "One doc.\n\nTwo doc.\n").unwrap();
        assert_eq!(read_documents(&plain).unwrap(), ["One doc.", "Two doc."]);
        let jsonl = dir.join("docs.jsonl");
        std::fs::write(&jsonl, "{\"text\":\"A b.\"}\nnot json\n").unwrap();
        assert!(matches!(read_documents(&jsonl), Err(CorpusError::Record { line: 2, .. })));
        assert!(matches!(read_documents(&dir.join("missing.txt")), Err(CorpusError::Io { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
