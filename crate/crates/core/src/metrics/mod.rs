//! Alignment and transcription quality metrics.

mod text;

pub use text::{corpus_bleu, wer, wer_text};

use serde::{Deserialize, Serialize};

use crate::sentence_map::AlignedSentence;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("degenerate interval ({0}, {1})")]
    DegenerateInterval(f64, f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty reference")]
    EmptyReference,
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Intersection over union of two time intervals.
pub fn interval_iou(a: (f64, f64), b: (f64, f64)) -> Result<f64, MetricsError> {
    for (s, e) in [a, b] {
        if !(e > s) {
            return Err(MetricsError::DegenerateInterval(s, e));
        }
    }
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Sentence-level alignment evaluation. `mean_iou` is averaged over true
/// positives only (both predicted and gold non-empty); it is 0 when there
/// are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_iou: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub n_scored: usize,
}

/// Compares index-matched predicted and gold aligned sentences.
pub fn evaluate_alignment(
    predicted: &[AlignedSentence],
    gold: &[AlignedSentence],
) -> Result<EvalReport, MetricsError> {
    if predicted.len() != gold.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), gold.len()));
    }
    evaluate_spans(predicted.iter().zip(gold).map(|(p, g)| {
        (
            p.span.map(|s| (s.start, s.end)),
            g.span.map(|s| (s.start, s.end)),
        )
    }))
}

/// Same as [`evaluate_alignment`] over raw `(predicted, gold)` span pairs.
pub fn evaluate_spans(
    pairs: impl IntoIterator<Item = (Option<(f64, f64)>, Option<(f64, f64)>)>,
) -> Result<EvalReport, MetricsError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;
    for (p, g) in pairs {
        match (p, g) {
            (Some(p), Some(g)) => {
                tp += 1;
                iou_sum += interval_iou(p, g)?;
            }
            (Some(_), None) => fp += 1,
            (None, None) => tn += 1,
            (None, Some(_)) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
    Ok(EvalReport {
        mean_iou: if tp > 0 { iou_sum / tp as f64 } else { 0.0 },
        tp,
        fp,
        tn,
        fn_,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        n_scored: tp,
    })
}
