//! Text normalization shared by alignment, WER and the length-ratio guard.
//!
//! Normalized text is lowercase, has every Unicode punctuation character
//! removed, keeps digits and letters (including umlauts and `ß`) untouched,
//! and separates tokens by exactly one ASCII space. Every normalized
//! character remembers the raw character it came from, so alignment results
//! can be projected back onto the original transcript.

use unicode_general_category::{get_general_category, GeneralCategory};

/// Normalized text plus a monotone map back to raw character positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    chars: Vec<char>,
    raw_index: Vec<usize>,
}

impl NormalizedText {
    /// Normalized characters.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// `raw_index()[k]` is the raw character position normalized character
    /// `k` was derived from. Non-decreasing.
    pub fn raw_index(&self) -> &[usize] {
        &self.raw_index
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn as_string(&self) -> String {
        self.chars.iter().collect()
    }

    /// Range of normalized positions whose raw origin lies in `raw`.
    pub fn range_for_raw(&self, raw: std::ops::Range<usize>) -> std::ops::Range<usize> {
        let lo = self.raw_index.partition_point(|&r| r < raw.start);
        let hi = self.raw_index.partition_point(|&r| r < raw.end);
        lo..hi.max(lo)
    }

    /// Whitespace-separated tokens of the normalized text.
    pub fn words(&self) -> Vec<String> {
        self.as_string()
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect()
    }
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Normalizes `raw`. Never fails; empty input gives empty output.
pub fn normalize_text(raw: &str) -> NormalizedText {
    let mut out = NormalizedText::default();
    // Raw position of the first whitespace character in the pending run.
    let mut pending_space: Option<usize> = None;
    for (pos, c) in raw.chars().enumerate() {
        if c.is_whitespace() {
            pending_space.get_or_insert(pos);
            continue;
        }
        if is_punctuation(c) {
            continue;
        }
        if let Some(space_pos) = pending_space.take() {
            if !out.chars.is_empty() {
                out.chars.push(' ');
                out.raw_index.push(space_pos);
            }
        }
        for lc in c.to_lowercase() {
            out.chars.push(lc);
            out.raw_index.push(pos);
        }
    }
    out
}

/// Normalized string only.
pub fn normalize_str(raw: &str) -> String {
    normalize_text(raw).as_string()
}
