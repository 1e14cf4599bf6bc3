use serde::{Deserialize, Serialize};
use unicode_script::{Script, UnicodeScript};

use crate::corpus::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub span: Span,
}

/// Scripts written without inter-word spaces; each code point is a token.
pub fn is_cjk(c: char) -> bool {
    matches!(
        c.script(),
        Script::Han | Script::Hiragana | Script::Katakana | Script::Bopomofo
    )
}

/// Splits on whitespace runs and isolates every CJK code point.
///
/// Splitting is driven by script, not by `language`; the tag is accepted so
/// callers can stay language-aware without changing the contract later.
pub fn tokenize(text: &str, _language: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let flush = |current: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            tokens.push(Token {
                surface: std::mem::take(current),
                span: Span::new(start, end).expect("non-empty token"),
            });
        }
    };
    for (pos, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut current, start, pos, &mut tokens);
        } else if is_cjk(c) {
            flush(&mut current, start, pos, &mut tokens);
            current.push(c);
            flush(&mut current, pos, pos + 1, &mut tokens);
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(c);
        }
    }
    let len = text.chars().count();
    flush(&mut current, start, len, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(text: &str) -> Vec<(String, usize, usize)> {
        tokenize(text, "und")
            .into_iter()
            .map(|t| (t.surface, t.span.start(), t.span.end()))
            .collect()
    }

    #[test]
    fn whitespace_split() {
        assert_eq!(
            spans("le gros chat"),
            [("le".into(), 0, 2), ("gros".into(), 3, 7), ("chat".into(), 8, 12)]
        );
        assert_eq!(spans("  a \t b  "), [("a".into(), 2, 3), ("b".into(), 6, 7)]);
    }

    #[test]
    fn ideographs_are_single_tokens() {
        assert_eq!(
            spans("南佛州"),
            [("南".into(), 0, 1), ("佛".into(), 1, 2), ("州".into(), 2, 3)]
        );
        assert_eq!(
            spans("[0]南佛[/0]的"),
            [
                ("[0]".into(), 0, 3),
                ("南".into(), 3, 4),
                ("佛".into(), 4, 5),
                ("[/0]".into(), 5, 9),
                ("的".into(), 9, 10)
            ]
        );
    }

    #[test]
    fn empty_and_rtl() {
        assert!(tokenize("", "en").is_empty());
        assert_eq!(spans("مرحبا بك").len(), 2);
    }

    #[test]
    fn hangul_is_space_delimited() {
        assert_eq!(spans("안녕 하세요").len(), 2);
    }
}
