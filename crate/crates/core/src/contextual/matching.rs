use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{nfc, Span};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingPolicy {
    /// Compare after per-code-point lowercasing.
    #[serde(default)]
    pub casefold: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("completion is empty after stripping whitespace and quotes")]
pub struct EmptyCandidate;

const QUOTE_PAIRS: [(char, char); 8] = [
    ('"', '"'),
    ('\'', '\''),
    ('`', '`'),
    ('\u{201C}', '\u{201D}'),
    ('\u{2018}', '\u{2019}'),
    ('\u{00AB}', '\u{00BB}'),
    ('\u{300C}', '\u{300D}'),
    ('\u{300E}', '\u{300F}'),
];

/// First non-empty line of a completion, trimmed, with one layer of
/// matching quotes removed, NFC-normalized.
pub fn parse_completion(raw: &str) -> Result<String, EmptyCandidate> {
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(EmptyCandidate)?;
    let mut chars = line.chars();
    let (first, last) = (chars.next(), chars.next_back());
    let unquoted = match (first, last) {
        (Some(open), Some(close)) if QUOTE_PAIRS.contains(&(open, close)) => chars.as_str().trim(),
        _ => line,
    };
    if unquoted.is_empty() {
        return Err(EmptyCandidate);
    }
    Ok(nfc(unquoted))
}

/// Simple per-code-point lowercase. Characters whose lowercase form is not a
/// single code point are kept, so offsets stay aligned with the original.
fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn prepare(text: &str, policy: &MatchingPolicy) -> Vec<char> {
    if policy.casefold {
        text.chars().map(fold).collect()
    } else {
        text.chars().collect()
    }
}

/// Start offsets of every occurrence of `needle` in `haystack`, overlapping ones included.
pub(crate) fn occurrences(needle: &[char], haystack: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    haystack
        .windows(needle.len())
        .enumerate()
        .filter(|(_, w)| *w == needle)
        .map(|(i, _)| i)
        .collect()
}

/// Locates `candidate` in `target_text` (which must already be NFC).
///
/// Among several occurrences the first one clear of every span in `taken`
/// wins; if all of them collide, the first occurrence is returned.
pub fn find_label_span(candidate: &str, target_text: &str, taken: &[Span], policy: &MatchingPolicy) -> Option<Span> {
    let needle = prepare(&nfc(candidate), policy);
    let haystack = prepare(target_text, policy);
    let spans: Vec<Span> = occurrences(&needle, &haystack)
        .into_iter()
        .map(|start| Span::new(start, start + needle.len()).expect("non-empty needle"))
        .collect();
    spans
        .iter()
        .find(|s| !taken.iter().any(|t| t.overlaps(s)))
        .or_else(|| spans.first())
        .copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> Span {
        Span::new(s, e).unwrap()
    }

    #[test]
    fn parse_strips_quotes_and_extra_lines() {
        assert_eq!(parse_completion("  \"gros chat\"\nextra").unwrap(), "gros chat");
        assert_eq!(parse_completion("chat").unwrap(), "chat");
        assert_eq!(parse_completion("\n\n"), Err(EmptyCandidate));
        assert_eq!(parse_completion("\u{201C}南佛州\u{201D}").unwrap(), "南佛州");
        assert_eq!(parse_completion("「南佛州」").unwrap(), "南佛州");
    }

    #[test]
    fn parse_strips_only_one_matching_layer() {
        assert_eq!(parse_completion("\"'chat'\"").unwrap(), "'chat'");
        assert_eq!(parse_completion("\"chat'").unwrap(), "\"chat'");
        assert_eq!(parse_completion("\"\"").unwrap_err(), EmptyCandidate);
        assert_eq!(parse_completion("\"").unwrap(), "\"");
    }

    #[test]
    fn parse_normalizes() {
        assert_eq!(parse_completion("cafe\u{301}").unwrap(), "caf\u{e9}");
    }

    #[test]
    fn finds_first_occurrence() {
        let p = MatchingPolicy::default();
        assert_eq!(find_label_span("chat", "le gros chat dort", &[], &p), Some(span(8, 12)));
        assert_eq!(find_label_span("chien", "le gros chat dort", &[], &p), None);
        assert_eq!(find_label_span("", "le gros chat dort", &[], &p), None);
    }

    #[test]
    fn skips_taken_occurrences() {
        let p = MatchingPolicy::default();
        // occurrences of "a" in "banana": 1, 3, 5
        assert_eq!(find_label_span("a", "banana", &[span(1, 2)], &p), Some(span(3, 4)));
        assert_eq!(
            find_label_span("a", "banana", &[span(1, 2), span(3, 6)], &p),
            Some(span(1, 2))
        );
    }

    #[test]
    fn casefold_is_opt_in() {
        let strict = MatchingPolicy::default();
        let folded = MatchingPolicy { casefold: true };
        assert_eq!(find_label_span("florida", "South Florida", &[], &strict), None);
        assert_eq!(
            find_label_span("florida", "South Florida", &[], &folded),
            Some(span(6, 13))
        );
        // İ lowercases to two code points and is left untouched
        assert_eq!(find_label_span("i", "İ", &[], &folded), None);
    }

    #[test]
    fn decomposed_candidate_matches_nfc_text() {
        let p = MatchingPolicy::default();
        assert_eq!(
            find_label_span("cafe\u{301}", "un caf\u{e9}", &[], &p),
            Some(span(3, 7))
        );
    }
}
