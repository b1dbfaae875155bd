//! Surface patterns for numbers and dates, shared by the entity filter and
//! the instantiation filter.

use std::sync::OnceLock;

use regex::Regex;

pub(crate) const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];

const MONTH_ALT: &str = r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?";

fn patterns() -> &'static [Regex] {
    static PATTERNS: OnceLock<Vec<Regex>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            // pure digits
            r"^\d+$".to_string(),
            // digits mixed with separators and units: 1,000  3.5  12/05/2001  10:30  -4  45%
            r"^[-+±$€£]?\d[\d\s.,:/\-–]*[%]?$".to_string(),
            // ordinals and decades: 21st 1990s
            r"^\d+(?:st|nd|rd|th|s)$".to_string(),
            // month name with digits: May 2001, March 3, 1990, 5 May 2001
            format!(r"^{MONTH_ALT}\s+\d{{1,4}}(?:\s*,\s*\d{{2,4}})?$"),
            format!(r"^\d{{1,2}}(?:st|nd|rd|th)?\s+{MONTH_ALT}(?:\s*,?\s*\d{{2,4}})?$"),
        ]
        .iter()
        .map(|p| Regex::new(&format!("(?i){p}")).expect("static pattern"))
        .collect()
    })
}

/// Whether `surface` looks like a number or a date.
pub fn is_numeric_or_date(surface: &str) -> bool {
    let surface = surface.trim();
    !surface.is_empty() && patterns().iter().any(|re| re.is_match(surface))
}
