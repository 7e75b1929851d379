use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{LanguageDetector, QualityError, UNKNOWN_LANGUAGE};
use crate::ingest::normalize_str;
use crate::sentence_map::AlignedSentence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub iou_threshold: f64,
    pub max_length_ratio: f64,
    pub cps_min: f64,
    pub cps_max: f64,
    /// Test role only.
    pub min_audio_s: f64,
    /// Test role only, exclusive.
    pub max_audio_s: f64,
    pub language: String,
    /// Test role only.
    pub unique_sentences: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            iou_threshold: 0.7,
            max_length_ratio: 6.0,
            cps_min: 6.0,
            cps_max: 23.0,
            min_audio_s: 1.0,
            max_audio_s: 15.0,
            language: "de".into(),
            unique_sentences: true,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), QualityError> {
        let ok = (0.0..=1.0).contains(&self.iou_threshold)
            && self.max_length_ratio >= 1.0
            && self.cps_min < self.cps_max
            && self.min_audio_s < self.max_audio_s;
        if ok {
            Ok(())
        } else {
            Err(QualityError::Config(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Test,
}

/// Rejections per filter, in application order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub iou: usize,
    pub cps: usize,
    pub language: usize,
    pub audio_length: usize,
    pub unique: usize,
}

impl RejectionCounts {
    pub fn total(&self) -> usize {
        self.iou + self.cps + self.language + self.audio_length + self.unique
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// Indices of kept entries, ascending.
    pub kept: Vec<usize>,
    pub rejected: RejectionCounts,
}

/// `true` when the longer text is at most `max_ratio` times the shorter.
/// An empty side never passes.
pub fn length_ratio_ok(len_a: usize, len_b: usize, max_ratio: f64) -> bool {
    let (short, long) = if len_a <= len_b { (len_a, len_b) } else { (len_b, len_a) };
    short > 0 && long as f64 <= max_ratio * short as f64
}

/// Guard on normalized texts, counting characters.
pub fn length_ratio_guard(truth_text: &str, asr_text: &str, max_ratio: f64) -> bool {
    length_ratio_ok(truth_text.chars().count(), asr_text.chars().count(), max_ratio)
}

pub fn chars_per_second(s: &AlignedSentence) -> Option<f64> {
    s.span.map(|span| s.sentence.text.chars().count() as f64 / span.duration())
}

/// Applies, in order: IoU estimate ≥ threshold, chars per second within
/// `[cps_min, cps_max]`, detected language (unknown passes), and for the
/// test role the audio window `[min_audio_s, max_audio_s)` and uniqueness of
/// normalized text. Every entry needs a span and an IoU estimate.
pub fn apply_filters(
    entries: &[AlignedSentence],
    cfg: &FilterConfig,
    role: SplitRole,
    detector: &dyn LanguageDetector,
) -> Result<FilterOutcome, QualityError> {
    let mut rejected = RejectionCounts::default();
    let mut kept = Vec::new();
    let mut seen = HashSet::new();
    for (k, s) in entries.iter().enumerate() {
        let (Some(span), Some(estimate)) = (s.span, s.iou_estimate) else {
            return Err(QualityError::NotFilterable(k));
        };
        if estimate < cfg.iou_threshold {
            rejected.iou += 1;
            continue;
        }
        let cps = s.sentence.text.chars().count() as f64 / span.duration();
        if !(cfg.cps_min..=cfg.cps_max).contains(&cps) {
            rejected.cps += 1;
            continue;
        }
        let lang = detector.detect(&s.sentence.text)?;
        if lang != UNKNOWN_LANGUAGE && lang != cfg.language {
            rejected.language += 1;
            continue;
        }
        if role == SplitRole::Test {
            let d = span.duration();
            if !(d >= cfg.min_audio_s && d < cfg.max_audio_s) {
                rejected.audio_length += 1;
                continue;
            }
            if cfg.unique_sentences && !seen.insert(normalize_str(&s.sentence.text)) {
                rejected.unique += 1;
                continue;
            }
        }
        kept.push(k);
    }
    Ok(FilterOutcome { kept, rejected })
}
