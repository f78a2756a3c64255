//! Text normalization shared by segmentation and fuzzy matching.

use unicode_normalization::UnicodeNormalization;

/// Collapses every run of whitespace into a single space and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace collapse followed by Unicode NFC composition.
pub fn normalize_for_matching(text: &str) -> String {
    collapse_whitespace(text).nfc().collect()
}

/// Byte offset of the `char_idx`-th character (or `text.len()` past the end).
pub(crate) fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

/// Slice by character offsets `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let b0 = byte_offset(text, start);
    let b1 = b0 + byte_offset(&text[b0..], end - start);
    &text[b0..b1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse() {
        assert_eq!(collapse_whitespace("  a \n\t b  c "), "a b c");
        assert_eq!(collapse_whitespace(" \n "), "");
    }

    #[test]
    fn nfc_composes() {
        assert_eq!(normalize_for_matching("e\u{301}"), "\u{e9}");
    }

    #[test]
    fn char_slicing() {
        let s = "a≤ℓb";
        assert_eq!(char_slice(s, 1, 3), "≤ℓ");
        assert_eq!(char_slice(s, 0, 4), s);
        assert_eq!(char_slice(s, 4, 4), "");
    }
}
