use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

pub fn is_nfc(text: &str) -> bool {
    match is_nfc_quick(text.chars()) {
        IsNormalized::Yes => true,
        IsNormalized::No => false,
        IsNormalized::Maybe => nfc(text) == text,
    }
}

/// Maps code-point offsets in a raw string onto its NFC form.
///
/// A boundary maps cleanly only if normalizing the two halves separately
/// gives the same result as normalizing the whole; otherwise it falls inside
/// a sequence that composes across it and has no image.
#[derive(Debug, Clone)]
pub struct OffsetMap {
    chars: Vec<char>,
    normalized: String,
    identity: bool,
}

impl OffsetMap {
    pub fn new(raw: &str) -> Self {
        let identity = is_nfc(raw);
        let normalized = if identity { raw.to_string() } else { nfc(raw) };
        Self {
            chars: raw.chars().collect(),
            normalized,
            identity,
        }
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    pub fn into_normalized(self) -> String {
        self.normalized
    }

    /// True when the raw text was already NFC and offsets pass through untouched.
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Image of raw offset `offset`, or `None` when it is out of range or
    /// splits a composing sequence.
    pub fn map(&self, offset: usize) -> Option<usize> {
        if offset > self.chars.len() {
            return None;
        }
        if self.identity {
            return Some(offset);
        }
        let head: String = self.chars[..offset].iter().collect::<String>().nfc().collect();
        let tail: String = self.chars[offset..].iter().collect::<String>().nfc().collect();
        if head.len() + tail.len() != self.normalized.len()
            || !self.normalized.starts_with(&head)
            || !self.normalized.ends_with(&tail)
        {
            return None;
        }
        Some(head.chars().count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_for_nfc_text() {
        let map = OffsetMap::new("gros chat");
        assert!(map.is_identity());
        assert_eq!(map.map(5), Some(5));
        assert_eq!(map.map(10), None);
    }

    #[test]
    fn composed_offsets_shift() {
        // "cafe\u{301} noir": the combining acute folds into é.
        let map = OffsetMap::new("cafe\u{301} noir");
        assert!(!map.is_identity());
        assert_eq!(map.normalized(), "café noir");
        assert_eq!(map.map(0), Some(0));
        assert_eq!(map.map(5), Some(4));
        assert_eq!(map.map(10), Some(9));
        // between 'e' and the combining mark
        assert_eq!(map.map(4), None);
    }

    #[test]
    fn hangul_jamo_compose() {
        let raw = "\u{1100}\u{1161} x";
        let map = OffsetMap::new(raw);
        assert_eq!(map.normalized(), "\u{AC00} x");
        assert_eq!(map.map(2), Some(1));
        assert_eq!(map.map(1), None);
    }
}
