use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::patterns::MONTHS;
use crate::rule::CharSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityLabel {
    #[serde(rename = "PER")]
    Person,
    #[serde(rename = "ORG")]
    Organization,
    #[serde(rename = "LOC")]
    Location,
    #[serde(rename = "MISC")]
    Misc,
    #[serde(rename = "DATE")]
    Date,
    #[serde(rename = "NUMBER")]
    Number,
}

impl EntityLabel {
    pub fn is_numeric(self) -> bool {
        matches!(self, EntityLabel::Date | EntityLabel::Number)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::Person => "PER",
            EntityLabel::Organization => "ORG",
            EntityLabel::Location => "LOC",
            EntityLabel::Misc => "MISC",
            EntityLabel::Date => "DATE",
            EntityLabel::Number => "NUMBER",
        }
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityLabel {
    type Err = TaggerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_uppercase().as_str() {
            "PER" | "PERSON" => EntityLabel::Person,
            "ORG" | "ORGANIZATION" => EntityLabel::Organization,
            "LOC" | "GPE" | "LOCATION" => EntityLabel::Location,
            "MISC" => EntityLabel::Misc,
            "DATE" => EntityLabel::Date,
            "NUMBER" | "CARDINAL" => EntityLabel::Number,
            other => return Err(TaggerError::UnknownLabel(other.to_string())),
        })
    }
}

/// An entity mention inside one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub span: CharSpan,
    pub label: EntityLabel,
    pub text: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaggerError {
    #[error("unknown entity label {0:?}")]
    UnknownLabel(String),
    #[error("gazetteer line {line}: {reason}")]
    Gazetteer { line: usize, reason: String },
    #[error("tagging failed: {0}")]
    Failed(String),
}

/// Entity tagger contract. Returned spans are disjoint and sorted.
pub trait Tagger: Send + Sync {
    fn tag(&self, sentence: &str) -> Result<Vec<Tag>, TaggerError>;
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "it", "he", "she", "they", "we", "i", "you", "this", "that", "these", "those", "there", "here",
    "in", "on", "at", "by", "for", "from", "with", "after", "before", "during", "when", "while", "since", "if", "but",
    "and", "or", "his", "her", "their", "its", "our", "my", "as", "of", "to", "however", "then",
];

#[derive(Debug, Clone)]
struct Word {
    start: usize,
    end: usize,
    text: String,
}

/// Split a sentence into words with character offsets. Numbers keep inner
/// separators (`1,000`, `12/05/2001`), and a single uppercase letter followed
/// by a period forms one initial (`W.`).
fn words(chars: &[char]) -> Vec<Word> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !c.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let joins_digits = matches!(d, '.' | ',' | '/' | ':' | '-')
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                if d.is_alphanumeric() || joins_digits {
                    i += 1;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let inner = matches!(d, '\'' | '-' | '&') && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                if d.is_alphanumeric() || inner {
                    i += 1;
                } else {
                    break;
                }
            }
            if i - start == 1 && c.is_uppercase() && chars.get(i) == Some(&'.') {
                i += 1;
            }
        }
        out.push(Word { start, end: i, text: chars[start..i].iter().collect() });
    }
    out
}

fn is_month(word: &str) -> bool {
    MONTHS.contains(&word.to_lowercase().as_str())
}

fn is_number_word(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_ascii_digit())
}

fn number_label(word: &str) -> EntityLabel {
    match word.parse::<u32>() {
        Ok(n) if word.len() == 4 && (1000..=2099).contains(&n) => EntityLabel::Date,
        _ => EntityLabel::Number,
    }
}

/// Default tagger: gazetteer lookup, then number/date detection, then runs
/// of capitalized words (labelled MISC) with leading function words removed.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger {
    /// Gazetteer entries keyed by their first word; each entry is the word
    /// sequence and its label, longest first.
    gazetteer: HashMap<String, Vec<(Vec<String>, EntityLabel)>>,
}

impl RuleTagger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse a gazetteer file: `surface<TAB>LABEL` per line, `#` comments.
    pub fn from_gazetteer(contents: &str) -> Result<Self, TaggerError> {
        let mut tagger = Self::new();
        for (n, line) in contents.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (surface, label) = line.split_once('\t').ok_or_else(|| TaggerError::Gazetteer {
                line: n + 1,
                reason: "expected surface<TAB>LABEL".into(),
            })?;
            let label: EntityLabel = label.parse().map_err(|e: TaggerError| TaggerError::Gazetteer {
                line: n + 1,
                reason: e.to_string(),
            })?;
            tagger.add_entry(surface, label);
        }
        Ok(tagger)
    }

    pub fn add_entry(&mut self, surface: &str, label: EntityLabel) {
        let chars: Vec<char> = surface.chars().collect();
        let seq: Vec<String> = words(&chars).into_iter().map(|w| w.text).collect();
        if let Some(first) = seq.first().cloned() {
            let entries = self.gazetteer.entry(first).or_default();
            entries.push((seq, label));
            entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
    }

    fn gazetteer_match(&self, words: &[Word], at: usize) -> Option<(usize, EntityLabel)> {
        let entries = self.gazetteer.get(&words[at].text)?;
        entries.iter().find_map(|(seq, label)| {
            let window = words.get(at..at + seq.len())?;
            window.iter().zip(seq).all(|(w, s)| &w.text == s).then_some((seq.len(), *label))
        })
    }
}

impl Tagger for RuleTagger {
    fn tag(&self, sentence: &str) -> Result<Vec<Tag>, TaggerError> {
        let chars: Vec<char> = sentence.chars().collect();
        let words = words(&chars);
        let adjacent = |a: &Word, b: &Word| b.start == a.end + 1 && chars[a.end] == ' ';
        let stop: HashSet<&str> = STOPWORDS.iter().copied().collect();
        let make = |from: usize, to: usize, label| {
            let span = CharSpan::new(words[from].start, words[to].end);
            Tag { span, label, text: chars[span.start..span.end].iter().collect() }
        };

        let mut tags = Vec::new();
        let mut i = 0;
        while i < words.len() {
            if let Some((len, label)) = self.gazetteer_match(&words, i) {
                tags.push(make(i, i + len - 1, label));
                i += len;
                continue;
            }
            let w = &words[i].text;
            // dates: "May 2001", "March 3, 1990", "5 May 2001"
            if is_month(w) && w.chars().next().is_some_and(char::is_uppercase) {
                let mut j = i;
                while j + 1 < words.len() && is_number_word(&words[j + 1].text) && words[j + 1].start <= words[j].end + 2 {
                    j += 1;
                }
                if j > i {
                    tags.push(make(i, j, EntityLabel::Date));
                    i = j + 1;
                    continue;
                }
            }
            if is_number_word(w) {
                if i + 1 < words.len() && is_month(&words[i + 1].text) && adjacent(&words[i], &words[i + 1]) {
                    let mut j = i + 1;
                    if j + 1 < words.len() && is_number_word(&words[j + 1].text) && adjacent(&words[j], &words[j + 1]) {
                        j += 1;
                    }
                    tags.push(make(i, j, EntityLabel::Date));
                    i = j + 1;
                } else {
                    tags.push(make(i, i, number_label(w)));
                    i += 1;
                }
                continue;
            }
            if w.chars().next().is_some_and(char::is_uppercase) {
                let mut j = i;
                while j + 1 < words.len()
                    && adjacent(&words[j], &words[j + 1])
                    && words[j + 1].text.chars().next().is_some_and(char::is_uppercase)
                    && self.gazetteer_match(&words, j + 1).is_none()
                {
                    j += 1;
                }
                let mut from = i;
                while from <= j && stop.contains(words[from].text.to_lowercase().as_str()) {
                    from += 1;
                }
                if from <= j {
                    let label = if is_month(&words[from].text) && from == j { EntityLabel::Date } else { EntityLabel::Misc };
                    tags.push(make(from, j, label));
                }
                i = j + 1;
                continue;
            }
            i += 1;
        }
        Ok(tags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(tags: &[Tag]) -> Vec<(&str, EntityLabel)> {
        tags.iter().map(|t| (t.text.as_str(), t.label)).collect()
    }

    #[test]
    fn capitalized_runs_and_initials() {
        let tagger = RuleTagger::new();
        let tags = tagger.tag("George W. Bush has father George H. W. Bush").unwrap();
        assert_eq!(
            surfaces(&tags),
            [("George W. Bush", EntityLabel::Misc), ("George H. W. Bush", EntityLabel::Misc)]
        );
        assert_eq!(tags[0].span, CharSpan::new(0, 14));
        assert!(tagger.tag("It rained.").unwrap().is_empty());
        let tags = tagger.tag("In Paris, the Eiffel Tower stands.").unwrap();
        assert_eq!(surfaces(&tags), [("Paris", EntityLabel::Misc), ("Eiffel Tower", EntityLabel::Misc)]);
    }

    #[test]
    fn numbers_and_dates() {
        let tagger = RuleTagger::new();
        let tags = tagger.tag("Apple was founded in 1976 with 3 people on April 1, 1976.").unwrap();
        assert_eq!(
            surfaces(&tags),
            [
                ("Apple", EntityLabel::Misc),
                ("1976", EntityLabel::Date),
                ("3", EntityLabel::Number),
                ("April 1, 1976", EntityLabel::Date)
            ]
        );
        let tags = tagger.tag("On 5 May 2001 it sold 1,000 units.").unwrap();
        assert_eq!(surfaces(&tags), [("5 May 2001", EntityLabel::Date), ("1,000", EntityLabel::Number)]);
    }

    #[test]
    fn gazetteer_entries_take_priority() {
        let tagger = RuleTagger::from_gazetteer("# comment\nSteve Jobs\tPER\nApple\tORG\napple pie\tMISC\n").unwrap();
        let tags = tagger.tag("Steve Jobs founded Apple.").unwrap();
        assert_eq!(surfaces(&tags), [("Steve Jobs", EntityLabel::Person), ("Apple", EntityLabel::Organization)]);
        // lowercase gazetteer entries match even outside capitalized runs
        let tags = tagger.tag("He baked apple pie.").unwrap();
        assert_eq!(surfaces(&tags), [("apple pie", EntityLabel::Misc)]);
    }

    #[test]
    fn gazetteer_errors() {
        assert!(matches!(RuleTagger::from_gazetteer("Apple ORG"), Err(TaggerError::Gazetteer { line: 1, .. })));
        assert!(matches!(RuleTagger::from_gazetteer("Apple\tFRUIT"), Err(TaggerError::Gazetteer { line: 1, .. })));
    }
}
