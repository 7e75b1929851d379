use serde::{Deserialize, Serialize};

use super::{clip_span, AlignedSentence};
use crate::metrics::interval_iou;

/// Offsets beyond this are treated as a fitting error.
const MAX_OFFSET_S: f64 = 10.0;

/// Constant corrections added to predicted sentence starts and ends.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeCalibration {
    pub start_offset: f64,
    pub end_offset: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalibrationError {
    #[error("no sentence pairs with both spans present")]
    NoUsablePairs,
    #[error("prediction and gold lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("fitted offsets ({0}, {1}) outside the ±10 s sanity bound")]
    OutOfBounds(f64, f64),
}

impl TimeCalibration {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let ok = |v: f64| v.is_finite() && v.abs() < MAX_OFFSET_S;
        if ok(self.start_offset) && ok(self.end_offset) {
            Ok(())
        } else {
            Err(CalibrationError::OutOfBounds(self.start_offset, self.end_offset))
        }
    }
}

fn pairs<'a>(
    predicted: &'a [AlignedSentence],
    gold: &'a [AlignedSentence],
) -> Result<Vec<(super::TimeSpan, super::TimeSpan)>, CalibrationError> {
    if predicted.len() != gold.len() {
        return Err(CalibrationError::LengthMismatch(predicted.len(), gold.len()));
    }
    let pairs: Vec<_> = predicted
        .iter()
        .zip(gold)
        .filter_map(|(p, g)| Some((p.span?, g.span?)))
        .collect();
    if pairs.is_empty() {
        return Err(CalibrationError::NoUsablePairs);
    }
    Ok(pairs)
}

/// Mean signed residual per edge over index-matched pairs where both spans
/// are present.
pub fn fit_time_calibration(
    predicted: &[AlignedSentence],
    gold: &[AlignedSentence],
) -> Result<TimeCalibration, CalibrationError> {
    let pairs = pairs(predicted, gold)?;
    let n = pairs.len() as f64;
    let c = TimeCalibration {
        start_offset: pairs.iter().map(|(p, g)| g.start - p.start).sum::<f64>() / n,
        end_offset: pairs.iter().map(|(p, g)| g.end - p.end).sum::<f64>() / n,
    };
    c.validate()?;
    Ok(c)
}

/// Alternative fit maximizing mean IoU over a grid of offsets in
/// `[-range, range]` with spacing `step`, one edge at a time starting from
/// the mean-residual fit.
pub fn fit_time_calibration_grid(
    predicted: &[AlignedSentence],
    gold: &[AlignedSentence],
    range: f64,
    step: f64,
) -> Result<TimeCalibration, CalibrationError> {
    let pairs = pairs(predicted, gold)?;
    let mean_iou = |c: &TimeCalibration| {
        pairs
            .iter()
            .map(|(p, g)| {
                let start = p.start + c.start_offset;
                let end = p.end + c.end_offset;
                if end > start.max(0.0) {
                    interval_iou((start.max(0.0), end), (g.start, g.end)).unwrap_or(0.0)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / pairs.len() as f64
    };
    let steps = (range / step).round() as i64;
    let mut best = fit_time_calibration(predicted, gold)?;
    let mut best_iou = mean_iou(&best);
    for edge in 0..2 {
        for k in -steps..=steps {
            let mut cand = best;
            let v = k as f64 * step;
            if edge == 0 {
                cand.start_offset = v;
            } else {
                cand.end_offset = v;
            }
            let iou = mean_iou(&cand);
            if iou > best_iou {
                best = cand;
                best_iou = iou;
            }
        }
    }
    best.validate()?;
    Ok(best)
}

/// Shifts a non-empty span by the offsets, clipping to `[0, duration]`.
/// A span that collapses makes the sentence empty.
pub fn apply_time_calibration(
    s: &AlignedSentence,
    c: &TimeCalibration,
    duration: Option<f64>,
) -> AlignedSentence {
    let mut out = s.clone();
    if let Some(span) = s.span {
        out.span = clip_span(span.start + c.start_offset, span.end + c.end_offset, duration);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentence_map::TimeSpan;
    use crate::split::Sentence;

    fn aligned(span: Option<(f64, f64)>) -> AlignedSentence {
        AlignedSentence {
            sentence: Sentence { text: "x".into(), raw_char_range: 0..1, speaker_id: None },
            span: span.map(|(start, end)| TimeSpan { start, end }),
            iou_estimate: None,
        }
    }

    #[test]
    fn uniform_early_predictions() {
        let pred = [aligned(Some((1.0, 2.0))), aligned(Some((3.0, 4.5)))];
        let gold = [aligned(Some((1.2, 2.2))), aligned(Some((3.2, 4.7)))];
        let c = fit_time_calibration(&pred, &gold).unwrap();
        assert!((c.start_offset - 0.2).abs() < 1e-12);
        assert!((c.end_offset - 0.2).abs() < 1e-12);
    }

    #[test]
    fn exact_predictions_and_mean_of_residuals() {
        let pred = [aligned(Some((1.0, 2.0)))];
        assert_eq!(fit_time_calibration(&pred, &pred).unwrap(), TimeCalibration::default());
        // Start errors -0.1 and -0.3 (prediction minus gold).
        let pred = [aligned(Some((0.9, 2.0))), aligned(Some((2.7, 4.0)))];
        let gold = [aligned(Some((1.0, 2.0))), aligned(Some((3.0, 4.0)))];
        let c = fit_time_calibration(&pred, &gold).unwrap();
        assert!((c.start_offset - 0.2).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let pred = [aligned(None)];
        let gold = [aligned(Some((0.0, 1.0)))];
        assert_eq!(fit_time_calibration(&pred, &gold), Err(CalibrationError::NoUsablePairs));
        assert!(fit_time_calibration(&pred, &[]).is_err());
        let far = [aligned(Some((20.0, 21.0)))];
        assert!(matches!(fit_time_calibration(&far, &gold), Err(CalibrationError::OutOfBounds(..))));
    }

    #[test]
    fn apply_shifts_and_clips() {
        let c = TimeCalibration { start_offset: 0.1, end_offset: -0.1 };
        let out = apply_time_calibration(&aligned(Some((1.0, 2.0))), &c, None);
        let span = out.span.unwrap();
        assert!((span.start - 1.1).abs() < 1e-12 && (span.end - 1.9).abs() < 1e-12);
        assert_eq!(apply_time_calibration(&aligned(None), &c, None), aligned(None));
        let c = TimeCalibration { start_offset: -0.1, end_offset: 0.0 };
        let out = apply_time_calibration(&aligned(Some((0.05, 0.2))), &c, None);
        assert_eq!(out.span, Some(TimeSpan { start: 0.0, end: 0.2 }));
        let collapse = TimeCalibration { start_offset: 0.0, end_offset: -1.0 };
        assert!(apply_time_calibration(&aligned(Some((0.5, 1.0))), &collapse, None).is_empty());
        let late = TimeCalibration { start_offset: 0.0, end_offset: 1.0 };
        let out = apply_time_calibration(&aligned(Some((0.5, 1.0))), &late, Some(1.5));
        assert_eq!(out.span.unwrap().end, 1.5);
    }

    #[test]
    fn fit_then_apply_zeroes_mean_residual() {
        let pred: Vec<_> = (0..20).map(|k| {
            let s = k as f64 * 3.0 + 0.37 * (k % 3) as f64;
            aligned(Some((s + 0.5, s + 2.0 - 0.11 * (k % 4) as f64)))
        }).collect();
        let gold: Vec<_> = (0..20).map(|k| aligned(Some((k as f64 * 3.0 + 0.4, k as f64 * 3.0 + 2.2)))).collect();
        let c = fit_time_calibration(&pred, &gold).unwrap();
        let fixed: Vec<_> = pred.iter().map(|p| apply_time_calibration(p, &c, None)).collect();
        let again = fit_time_calibration(&fixed, &gold).unwrap();
        assert!(again.start_offset.abs() < 1e-9 && again.end_offset.abs() < 1e-9);
    }

    #[test]
    fn grid_fit_does_not_lower_iou() {
        let pred = [aligned(Some((1.3, 2.0))), aligned(Some((5.3, 6.0)))];
        let gold = [aligned(Some((1.0, 2.0))), aligned(Some((5.0, 6.0)))];
        let c = fit_time_calibration_grid(&pred, &gold, 1.0, 0.05).unwrap();
        assert!((c.start_offset + 0.3).abs() < 1e-9);
    }
}
