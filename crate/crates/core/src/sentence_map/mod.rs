//! Per-sentence time spans from an alignment path and ASR word timings.

mod calibration;
mod symbols;

pub use calibration::{
    apply_time_calibration, fit_time_calibration, fit_time_calibration_grid, CalibrationError,
    TimeCalibration,
};
pub use symbols::{Granularity, SymbolMaps};

use serde::{Deserialize, Serialize};

use crate::align::{AlignError, AlignmentPath, PathIndex};
use crate::ingest::AsrTranscript;
use crate::split::Sentence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: f64,
    pub end: f64,
}

impl TimeSpan {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A sentence with its predicted time span. No span means the sentence is
/// considered not spoken ("empty").
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSentence {
    pub sentence: Sentence,
    pub span: Option<TimeSpan>,
    pub iou_estimate: Option<f64>,
}

impl AlignedSentence {
    pub fn is_empty(&self) -> bool {
        self.span.is_none()
    }

    pub fn empty(sentence: Sentence) -> Self {
        AlignedSentence {
            sentence,
            span: None,
            iou_estimate: None,
        }
    }
}

/// Clips to `[0, duration]`; spans that collapse become `None`.
pub(crate) fn clip_span(start: f64, end: f64, duration: Option<f64>) -> Option<TimeSpan> {
    let start = start.max(0.0);
    let end = match duration {
        Some(d) => end.min(d),
        None => end,
    };
    (end > start).then_some(TimeSpan { start, end })
}

/// Where a sentence landed in the alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceProjection {
    /// Truth symbols of the sentence.
    pub truth: std::ops::Range<usize>,
    /// stt symbols it aligned to, if any.
    pub stt: Option<std::ops::Range<usize>>,
    /// First and last ASR word covered.
    pub words: Option<(usize, usize)>,
}

/// Projects one sentence through the path.
pub fn project_sentence(
    sentence: &Sentence,
    index: &PathIndex,
    maps: &SymbolMaps,
) -> Result<SentenceProjection, AlignError> {
    let truth = maps.truth_range(&sentence.raw_char_range);
    let stt = if truth.is_empty() {
        None
    } else {
        index.project(truth.clone())?
    };
    let words = stt.clone().and_then(|r| maps.words_in(r));
    Ok(SentenceProjection { truth, stt, words })
}

/// Maps every sentence to the span from the start of the first ASR word to
/// the end of the last ASR word its aligned symbols touch.
pub fn map_sentences(
    sentences: &[Sentence],
    path: &AlignmentPath,
    asr: &AsrTranscript,
    maps: &SymbolMaps,
) -> Result<Vec<AlignedSentence>, AlignError> {
    if path.truth_len != maps.truth.len() || path.stt_len != maps.stt.len() {
        return Err(AlignError::InconsistentPath(format!(
            "path is {}x{}, symbol maps are {}x{}",
            path.truth_len,
            path.stt_len,
            maps.truth.len(),
            maps.stt.len()
        )));
    }
    if maps.stt_word.iter().flatten().any(|&w| w >= asr.words.len()) {
        return Err(AlignError::InconsistentPath(
            "symbol map references a missing ASR word".into(),
        ));
    }
    let index = PathIndex::new(path);
    sentences
        .iter()
        .map(|s| {
            let proj = project_sentence(s, &index, maps)?;
            let span = proj.words.and_then(|(first, last)| {
                clip_span(asr.words[first].start, asr.words[last].end, asr.duration)
            });
            Ok(AlignedSentence {
                sentence: s.clone(),
                span,
                iou_estimate: None,
            })
        })
        .collect()
}
