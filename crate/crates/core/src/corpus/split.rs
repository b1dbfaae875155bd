use std::collections::HashSet;

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "inc", "ltd", "co", "corp", "vs", "etc", "no", "mt", "gen",
    "col", "lt", "sgt", "capt", "rev", "gov", "sen", "rep", "fig", "e.g", "i.e", "u.s", "u.k", "jan", "feb", "mar",
    "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

/// Rule-based sentence splitter: a boundary follows `.`, `?` or `!` when the
/// next non-space character is uppercase, unless the period closes a known
/// abbreviation or a single-letter initial.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    /// Abbreviations are matched case-insensitively, without their final period.
    pub fn with_abbreviations<'a>(abbreviations: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.trim().trim_end_matches('.').to_lowercase())
                .filter(|a| !a.is_empty())
                .collect(),
        }
    }

    /// Parse an abbreviation file: one entry per line, `#` starts a comment.
    pub fn from_abbreviation_file(contents: &str) -> Self {
        Self::with_abbreviations(
            contents
                .lines()
                .map(|l| l.split('#').next().unwrap_or_default())
                .filter(|l| !l.trim().is_empty()),
        )
    }

    fn is_abbreviation(&self, word: &str) -> bool {
        let mut chars = word.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_uppercase() {
                return true;
            }
        }
        self.abbreviations.contains(&word.to_lowercase())
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut sentences = Vec::new();
        let mut start = 0;
        let indices: Vec<(usize, char)> = text.char_indices().collect();

        for (pos, &(byte, c)) in indices.iter().enumerate() {
            if !matches!(c, '.' | '?' | '!') {
                continue;
            }
            let end = byte + c.len_utf8();
            let rest = &text[end..];
            let trimmed = rest.trim_start();
            if trimmed.len() == rest.len() {
                continue;
            }
            if !trimmed.chars().next().is_some_and(char::is_uppercase) {
                continue;
            }
            if c == '.' {
                let word_start = indices[..pos]
                    .iter()
                    .rev()
                    .take_while(|(_, ch)| !ch.is_whitespace())
                    .last()
                    .map_or(byte, |(b, _)| *b);
                if self.is_abbreviation(&text[word_start..byte]) {
                    continue;
                }
            }
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence);
            }
            start = end;
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            sentences.push(tail);
        }
        sentences
    }
}
