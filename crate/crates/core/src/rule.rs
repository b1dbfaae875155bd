//! Atoms, open rules, instantiations and the prompts rendered from them.
//!
//! Atoms are natural-language templates relating two variables, written with
//! the placeholders [`X`] and [`Y`] (or [`X`] and the new-variable indicator
//! [`Z`]). Prompts use a separate set of mask markers so that a prompt can
//! never be mistaken for an atom.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const X: &str = "[X]";
pub const Y: &str = "[Y]";
pub const Z: &str = "<z>";
pub const MASK_X: &str = "<mask_x>";
pub const MASK_Y: &str = "<mask_y>";
pub const MASK: &str = "<mask>";
pub const MASK_Z: &str = "<mask_z>";
pub const SEP: &str = "<sep>";

const MASK_MARKERS: [&str; 4] = [MASK_X, MASK_Y, MASK_Z, MASK];
const TERMINATORS: [char; 3] = ['.', '!', '?'];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("invalid relation name {0:?}")]
    InvalidRelation(String),
    #[error("invalid atom {template:?}: {reason}")]
    InvalidAtom { template: String, reason: &'static str },
    #[error("invalid span {start}..{end} for text of {len} chars")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("head span {head:?} overlaps tail span {tail:?}")]
    SpanConflict { head: CharSpan, tail: CharSpan },
    #[error("mode conflict: {0}")]
    ModeConflict(&'static str),
    #[error("hypothesis {0:?} restates its premise")]
    SameAsPremise(String),
}

/// Which placeholder stands for the second variable of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecondVariable {
    /// Bound variable `[Y]`, shared with the premise.
    Bound,
    /// Unbound new variable `<z>`.
    Fresh,
}

/// A validated atom template, e.g. `"[X] is founder of [Y]."`.
///
/// Comparison is case- and whitespace-sensitive; use [`normalize_for_compare`]
/// for loose comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Atom {
    template: String,
    second: SecondVariable,
}

impl Atom {
    pub fn new(template: impl Into<String>) -> Result<Self, RuleError> {
        let template = template.into();
        let invalid = |reason| RuleError::InvalidAtom { template: template.clone(), reason };

        if template.matches(X).count() != 1 {
            return Err(invalid("expected exactly one [X]"));
        }
        let ys = template.matches(Y).count();
        let zs = template.matches(Z).count();
        let second = match (ys, zs) {
            (1, 0) => SecondVariable::Bound,
            (0, 1) => SecondVariable::Fresh,
            _ => return Err(invalid("expected exactly one of [Y] or <z>")),
        };
        if MASK_MARKERS.iter().any(|m| template.contains(m)) {
            return Err(invalid("mask markers are not allowed in atoms"));
        }
        let residue = template.replace(X, "").replace(Y, "").replace(Z, "");
        if !residue.chars().any(char::is_alphanumeric) {
            return Err(invalid("relation description is empty"));
        }
        if !template.ends_with(TERMINATORS) {
            return Err(invalid("missing sentence terminator"));
        }
        Ok(Self { template, second })
    }

    pub fn as_str(&self) -> &str {
        &self.template
    }

    pub fn second_variable(&self) -> SecondVariable {
        self.second
    }

    pub fn is_new_variable(&self) -> bool {
        self.second == SecondVariable::Fresh
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.template)
    }
}

impl TryFrom<String> for Atom {
    type Error = RuleError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Atom::new(value)
    }
}

impl From<Atom> for String {
    fn from(atom: Atom) -> Self {
        atom.template
    }
}

impl std::str::FromStr for Atom {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Atom::new(s)
    }
}

/// Lowercase and collapse whitespace.
pub fn normalize_for_compare(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A concrete entity pair `(x, y)` with its log-probability under the premise.
/// `y` is absent for new-variable induction, where only `x` is grounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instantiation {
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    pub log_weight: f64,
}

impl Instantiation {
    pub fn pair(x: impl Into<String>, y: impl Into<String>, log_weight: f64) -> Self {
        Self { x: x.into(), y: Some(y.into()), log_weight }
    }

    pub fn unary(x: impl Into<String>, log_weight: f64) -> Self {
        Self { x: x.into(), y: None, log_weight }
    }
}

/// One induced rule `premise => hypothesis`, as stored one-per-line in rules
/// JSONL files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenRule {
    pub premise: Atom,
    pub hypothesis: Atom,
    /// Log of the instantiation-weighted hypothesis probability.
    pub log_score: f64,
    #[serde(default)]
    pub instantiations: Vec<Instantiation>,
}

impl OpenRule {
    pub fn new(
        premise: Atom,
        hypothesis: Atom,
        log_score: f64,
        instantiations: Vec<Instantiation>,
    ) -> Result<Self, RuleError> {
        if normalize_for_compare(premise.as_str()) == normalize_for_compare(hypothesis.as_str()) {
            return Err(RuleError::SameAsPremise(hypothesis.template));
        }
        Ok(Self { premise, hypothesis, log_score, instantiations })
    }
}

/// Half-open character range `[start, end)`, counted in Unicode scalar
/// values. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Slice `text` by this character range. Panics when out of bounds.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        let begin = byte_offset(text, self.start);
        let end = byte_offset(text, self.end);
        &text[begin..end]
    }
}

impl From<[usize; 2]> for CharSpan {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<CharSpan> for [usize; 2] {
    fn from(span: CharSpan) -> Self {
        [span.start, span.end]
    }
}

fn byte_offset(text: &str, char_index: usize) -> usize {
    text.char_indices()
        .nth(char_index)
        .map(|(i, _)| i)
        .unwrap_or_else(|| {
            assert!(char_index == text.chars().count(), "char index out of bounds");
            text.len()
        })
}

/// How a relation name is turned into an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationStyle {
    /// `"[X] is <words> of [Y]."`
    Copular,
    /// `"[X] <words> [Y]."`
    Verbatim,
}

impl RelationStyle {
    /// Pick a style from the shape of the relation name: verb phrases
    /// (`believeIn`, `isMarriedTo`, `owns`) read verbatim, noun phrases
    /// (`founderOf`, `spouse`) take the copular form.
    pub fn infer(relation_name: &str) -> Result<Self, RuleError> {
        let words = relation_words(relation_name)?;
        let first = words[0].as_str();
        let last = words[words.len() - 1].as_str();
        let style = if matches!(first, "is" | "was" | "are" | "were" | "has" | "had" | "have") {
            RelationStyle::Verbatim
        } else if last == "of" {
            RelationStyle::Copular
        } else if words.len() > 1 || (first.ends_with('s') && !first.ends_with("ss")) || first.ends_with("ed") {
            RelationStyle::Verbatim
        } else {
            RelationStyle::Copular
        };
        Ok(style)
    }
}

/// Split a relation name into lowercase words: angle brackets are stripped,
/// camelCase splits on lower→upper boundaries only (digits stay attached),
/// and `_`, `-`, whitespace and other punctuation separate words.
pub fn relation_words(relation_name: &str) -> Result<Vec<String>, RuleError> {
    let trimmed = relation_name.trim().trim_start_matches('<').trim_end_matches('>');
    let mut words = Vec::new();
    let mut current = String::new();
    let mut prev_lower = false;
    for c in trimmed.chars() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
        prev_lower = c.is_lowercase() || (c.is_numeric() && prev_lower);
    }
    if !current.is_empty() {
        words.push(current);
    }
    if words.is_empty() {
        return Err(RuleError::InvalidRelation(relation_name.to_string()));
    }
    Ok(words)
}

/// Convert a relation name such as `<founderOf>` into a premise atom.
pub fn make_premise_atom(relation_name: &str, style: RelationStyle) -> Result<Atom, RuleError> {
    let words = relation_words(relation_name)?;
    let template = match style {
        RelationStyle::Verbatim => format!("{X} {} {Y}.", words.join(" ")),
        RelationStyle::Copular => {
            let body = if words[0] == "is" { &words[1..] } else { &words[..] };
            if body.is_empty() {
                return Err(RuleError::InvalidRelation(relation_name.to_string()));
            }
            let joined = body.join(" ");
            if body[body.len() - 1] == "of" {
                format!("{X} is {joined} {Y}.")
            } else {
                format!("{X} is {joined} of {Y}.")
            }
        }
    };
    Atom::new(template)
}

fn check_span(span: CharSpan, len: usize) -> Result<(), RuleError> {
    if span.is_empty() || span.end > len {
        return Err(RuleError::InvalidSpan { start: span.start, end: span.end, len });
    }
    Ok(())
}

/// Validate a head/tail span pair against a text of `len` characters.
pub fn check_span_pair(head: CharSpan, tail: CharSpan, len: usize) -> Result<(), RuleError> {
    if head.is_empty() {
        return Err(RuleError::InvalidSpan { start: head.start, end: head.end, len });
    }
    if tail.is_empty() {
        return Err(RuleError::InvalidSpan { start: tail.start, end: tail.end, len });
    }
    if head.overlaps(&tail) {
        return Err(RuleError::SpanConflict { head, tail });
    }
    check_span(head, len)?;
    check_span(tail, len)
}

/// Replace the head entity with `[X]` and the tail entity with `[Y]`.
/// A terminating `.` is appended when the text has none.
pub fn sample_to_premise_atom(text: &str, head: CharSpan, tail: CharSpan) -> Result<Atom, RuleError> {
    let chars: Vec<char> = text.chars().collect();
    check_span_pair(head, tail, chars.len())?;

    let (first, first_marker, second, second_marker) = if head.start < tail.start {
        (head, X, tail, Y)
    } else {
        (tail, Y, head, X)
    };
    let mut out = String::with_capacity(text.len());
    out.extend(&chars[..first.start]);
    out.push_str(first_marker);
    out.extend(&chars[first.end..second.start]);
    out.push_str(second_marker);
    out.extend(&chars[second.end..]);

    let mut template = out.trim().to_string();
    if !template.ends_with(TERMINATORS) {
        template.push('.');
    }
    Atom::new(template)
}

/// Prompt for the instantiation model: `"<mask_x> is founder of <mask_y>."`.
pub fn render_instantiation_prompt(premise: &Atom) -> String {
    premise
        .as_str()
        .replace(X, MASK_X)
        .replace(Y, MASK_Y)
        .replace(Z, MASK_Z)
}

/// Inverse of [`render_instantiation_prompt`].
pub fn parse_instantiation_prompt(prompt: &str) -> Result<Atom, RuleError> {
    Atom::new(prompt.replace(MASK_X, X).replace(MASK_Y, Y).replace(MASK_Z, Z))
}

/// Prompt for the applicability model: `"Steve Jobs <mask> Apple."`, or
/// `"George W. Bush <mask_z>"` in new-variable mode.
pub fn render_applicability_prompt(ins: &Instantiation, new_variable: bool) -> Result<String, RuleError> {
    match (&ins.y, new_variable) {
        (Some(y), false) => Ok(format!("{} {MASK} {}.", ins.x, y)),
        (None, true) => Ok(format!("{} {MASK_Z}", ins.x)),
        (Some(_), true) => Err(RuleError::ModeConflict("new-variable prompt with a grounded y")),
        (None, false) => Err(RuleError::ModeConflict("standard prompt without y")),
    }
}
