//! Seeded random search over alignment parameters with k-fold cross
//! validation, and IoU-estimate threshold sweeps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{
    parse_asr_transcript, parse_speaker_spans, AlignmentParams, AsrTranscript, BoundaryGaps,
    GapScores, IngestError, ManualTranscript,
};
use crate::metrics::{evaluate_alignment, interval_iou};
use crate::pipeline::{align_document, read_jsonl, AlignConfig, AlignedRecord, PipelineError};
use crate::quality::fold_assignment;
use crate::sentence_map::{
    apply_time_calibration, fit_time_calibration, fit_time_calibration_grid, AlignedSentence,
    CalibrationError, TimeCalibration,
};

#[derive(Debug, thiserror::Error)]
pub enum TuneError {
    #[error("{path}: {source}")]
    Ingest { path: String, source: IngestError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Corpus(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Clone)]
pub struct LabeledDocument {
    pub asr: AsrTranscript,
    pub transcript: ManualTranscript,
    /// One record per split sentence, empties included.
    pub gold: Vec<AlignedRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct LabeledCorpus {
    pub docs: Vec<LabeledDocument>,
}

fn read(path: &Path) -> Result<Vec<u8>, TuneError> {
    std::fs::read(path).map_err(|source| TuneError::Io { path: path.display().to_string(), source })
}

/// Ids of every `<id>.asr.json` in `dir`, sorted.
pub fn document_ids(dir: &Path) -> Result<Vec<String>, TuneError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|source| TuneError::Io { path: dir.display().to_string(), source })?;
    let mut ids: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix(".asr.json").map(str::to_owned))
        .collect();
    ids.sort();
    Ok(ids)
}

/// Reads `<id>.asr.json` and `<id>.txt`, plus `<id>.speakers.tsv` when present.
pub fn load_document(dir: &Path, id: &str) -> Result<(AsrTranscript, ManualTranscript), TuneError> {
    let p = |ext: &str| dir.join(format!("{id}.{ext}"));
    let asr_path = p("asr.json");
    let asr = parse_asr_transcript(&read(&asr_path)?)
        .map_err(|source| TuneError::Ingest { path: asr_path.display().to_string(), source })?;
    let text = String::from_utf8_lossy(&read(&p("txt"))?).into_owned();
    let mut transcript = ManualTranscript::new(id, text);
    let spk = p("speakers.tsv");
    if spk.exists() {
        transcript = parse_speaker_spans(&String::from_utf8_lossy(&read(&spk)?))
            .and_then(|s| transcript.with_speaker_spans(s))
            .map_err(|source| TuneError::Ingest { path: spk.display().to_string(), source })?;
    }
    Ok((asr, transcript))
}

impl LabeledCorpus {
    /// Loads every document of `dir` (see [`load_document`]) with its
    /// `<id>.gold.jsonl`, ordered by id.
    pub fn load_dir(dir: &Path) -> Result<Self, TuneError> {
        let mut docs = Vec::new();
        for id in document_ids(dir)? {
            let (asr, transcript) = load_document(dir, &id)?;
            let gold = read_jsonl(&read(&dir.join(format!("{id}.gold.jsonl")))?[..])?;
            docs.push(LabeledDocument { asr, transcript, gold });
        }
        if docs.is_empty() {
            return Err(TuneError::Corpus(format!("no *.asr.json documents in {}", dir.display())));
        }
        Ok(LabeledCorpus { docs })
    }
}

/// Lower and upper bounds of the search space: match score in [0, 1],
/// mismatch and all gap scores in [-1, 0].
pub fn sample_params(rng: &mut impl Rng) -> AlignmentParams {
    let mut gap = || GapScores { open: -rng.gen::<f64>(), extend: -rng.gen::<f64>() };
    let mut side = || BoundaryGaps { left: gap(), internal: gap(), right: gap() };
    let truth = side();
    let stt = side();
    AlignmentParams { match_score: rng.gen(), mismatch_score: -rng.gen::<f64>(), truth, stt }
}

#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub budget: usize,
    pub folds: usize,
    pub seed: u64,
    /// Granularity, splitter, and guard settings; params and calibration
    /// are overridden per trial.
    pub align: AlignConfig,
    /// Fit calibration by IoU grid search instead of mean residual.
    pub grid_calibration: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig { budget: 50, folds: 3, seed: 0, align: AlignConfig::default(), grid_calibration: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: AlignmentParams,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: AlignmentParams,
    pub cv_mean_iou: f64,
    pub trials: Vec<Trial>,
}

/// Uncalibrated predictions for every document, one per gold sentence.
pub fn predict_corpus(
    corpus: &LabeledCorpus,
    cfg: &AlignConfig,
) -> Result<Vec<Vec<AlignedSentence>>, TuneError> {
    corpus
        .docs
        .iter()
        .map(|d| {
            let r = align_document(&d.asr, &d.transcript, cfg, None)?;
            let sentences = if r.rejection.is_some() {
                d.gold.iter().map(|g| AlignedSentence { span: None, ..g.to_aligned() }).collect()
            } else {
                r.sentences
            };
            if sentences.len() != d.gold.len() {
                return Err(TuneError::Corpus(format!(
                    "{}: {} split sentences but {} gold records",
                    d.transcript.recording_id,
                    sentences.len(),
                    d.gold.len()
                )));
            }
            Ok(sentences)
        })
        .collect()
}

fn fit(pred: &[AlignedSentence], gold: &[AlignedSentence], grid: bool) -> TimeCalibration {
    let fitted = if grid {
        fit_time_calibration_grid(pred, gold, 1.0, 0.01)
    } else {
        fit_time_calibration(pred, gold)
    };
    fitted.unwrap_or_default()
}

/// Mean IoU over held-out true positives, pooling all folds. Calibration
/// for each fold is fitted on the other folds only.
pub fn cross_validate(
    corpus: &LabeledCorpus,
    predictions: &[Vec<AlignedSentence>],
    folds: &[usize],
    k: usize,
    grid_calibration: bool,
) -> Result<f64, TuneError> {
    let gold: Vec<Vec<AlignedSentence>> =
        corpus.docs.iter().map(|d| d.gold.iter().map(AlignedRecord::to_aligned).collect()).collect();
    let (mut iou_sum, mut tp) = (0.0, 0usize);
    for fold in 0..k {
        let (mut tp_pred, mut tp_gold) = (Vec::new(), Vec::new());
        for (d, &f) in folds.iter().enumerate() {
            if f != fold {
                tp_pred.extend_from_slice(&predictions[d]);
                tp_gold.extend_from_slice(&gold[d]);
            }
        }
        let c = fit(&tp_pred, &tp_gold, grid_calibration);
        for (d, &f) in folds.iter().enumerate() {
            if f != fold {
                continue;
            }
            let duration = corpus.docs[d].asr.duration;
            let calibrated: Vec<_> = predictions[d].iter().map(|s| apply_time_calibration(s, &c, duration)).collect();
            let report = evaluate_alignment(&calibrated, &gold[d]).map_err(|e| TuneError::Corpus(e.to_string()))?;
            iou_sum += report.mean_iou * report.tp as f64;
            tp += report.tp;
        }
    }
    Ok(if tp > 0 { iou_sum / tp as f64 } else { 0.0 })
}

/// Random search: `budget` parameter vectors, each scored by k-fold cross
/// validation; the first trial with the highest score wins.
pub fn tune_alignment_params(corpus: &LabeledCorpus, cfg: &TuneConfig) -> Result<TuneResult, TuneError> {
    if corpus.docs.is_empty() {
        return Err(TuneError::Corpus("empty corpus".into()));
    }
    if cfg.budget == 0 || cfg.folds < 2 || corpus.docs.len() < cfg.folds {
        return Err(TuneError::Corpus(format!(
            "need budget >= 1 and at least {} documents for {} folds",
            cfg.folds, cfg.folds
        )));
    }
    let folds = fold_assignment(corpus.docs.len(), cfg.folds, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials = Vec::with_capacity(cfg.budget);
    for t in 0..cfg.budget {
        let params = sample_params(&mut rng);
        let align = AlignConfig { params, calibration: None, ..cfg.align.clone() };
        let predictions = predict_corpus(corpus, &align)?;
        let score = cross_validate(corpus, &predictions, &folds, cfg.folds, cfg.grid_calibration)?;
        log::info!("trial {t}: cv mean IoU {score:.4}");
        trials.push(Trial { params, score });
    }
    let mut best = 0;
    for (k, t) in trials.iter().enumerate() {
        if t.score > trials[best].score {
            best = k;
        }
    }
    Ok(TuneResult { best: trials[best].params, cv_mean_iou: trials[best].score, trials })
}

/// Fits calibration on a whole labeled corpus with fixed parameters.
pub fn fit_corpus_calibration(
    corpus: &LabeledCorpus,
    cfg: &AlignConfig,
    grid: bool,
) -> Result<TimeCalibration, TuneError> {
    let align = AlignConfig { calibration: None, ..cfg.clone() };
    let predictions = predict_corpus(corpus, &align)?;
    let pred: Vec<_> = predictions.into_iter().flatten().collect();
    let gold: Vec<_> = corpus.docs.iter().flat_map(|d| d.gold.iter().map(AlignedRecord::to_aligned)).collect();
    Ok(if grid { fit_time_calibration_grid(&pred, &gold, 1.0, 0.01)? } else { fit_time_calibration(&pred, &gold)? })
}

/// One sentence for a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    /// `None` when the prediction is empty.
    pub iou_estimate: Option<f64>,
    pub gold_present: bool,
    /// IoU against gold when both spans exist, otherwise 0.
    pub iou: f64,
}

impl SweepEntry {
    pub fn new(predicted: &AlignedSentence, gold: &AlignedSentence) -> Self {
        let iou = match (predicted.span, gold.span) {
            (Some(p), Some(g)) => interval_iou((p.start, p.end), (g.start, g.end)).unwrap_or(0.0),
            _ => 0.0,
        };
        SweepEntry {
            iou_estimate: predicted.span.and(predicted.iou_estimate),
            gold_present: gold.span.is_some(),
            iou,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub kept: usize,
    /// Mean IoU of kept true positives.
    pub mean_iou_kept: f64,
    pub sentence_recall: f64,
    pub sentence_precision: f64,
}

/// Sentences below a threshold count as predicted empty. Rows come back
/// sorted by threshold.
pub fn sweep_threshold(entries: &[SweepEntry], thresholds: &[f64]) -> Vec<SweepRow> {
    let gold_present = entries.iter().filter(|e| e.gold_present).count();
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.into_iter()
        .map(|threshold| {
            let kept: Vec<&SweepEntry> =
                entries.iter().filter(|e| e.iou_estimate.is_some_and(|v| v >= threshold)).collect();
            let tp: Vec<&&SweepEntry> = kept.iter().filter(|e| e.gold_present).collect();
            let ratio = |a: usize, b: usize| if b > 0 { a as f64 / b as f64 } else { 0.0 };
            SweepRow {
                threshold,
                kept: kept.len(),
                mean_iou_kept: if tp.is_empty() { 0.0 } else { tp.iter().map(|e| e.iou).sum::<f64>() / tp.len() as f64 },
                sentence_recall: ratio(tp.len(), gold_present),
                sentence_precision: ratio(tp.len(), kept.len()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentence_map::TimeSpan;
    use crate::split::Sentence;
    use crate::synth::{generate_corpus, write_corpus, SynthConfig};

    fn corpus(cfg: &SynthConfig) -> LabeledCorpus {
        let docs = generate_corpus(cfg)
            .into_iter()
            .map(|d| LabeledDocument { asr: d.asr, transcript: d.transcript, gold: d.gold })
            .collect();
        LabeledCorpus { docs }
    }

    fn clean(n_docs: usize) -> SynthConfig {
        SynthConfig {
            n_docs,
            sentences_per_doc: (3, 5),
            deletion_rate: 0.0,
            substitution_rate: 0.0,
            swap_rate: 0.0,
            asr_start_bias: 0.0,
            asr_end_bias: 0.0,
            asr_jitter: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_corpus_reaches_ceiling() {
        let c = corpus(&clean(6));
        let cfg = TuneConfig { budget: 3, seed: 2, ..Default::default() };
        let r = tune_alignment_params(&c, &cfg).unwrap();
        assert!((r.cv_mean_iou - 1.0).abs() < 1e-12, "{}", r.cv_mean_iou);
        assert!(r.trials.iter().all(|t| (0.0..=1.0).contains(&t.score)));
        assert_eq!(r, tune_alignment_params(&c, &cfg).unwrap());
    }

    #[test]
    fn budget_one_returns_the_sample() {
        let c = corpus(&SynthConfig { n_docs: 3, sentences_per_doc: (3, 4), ..Default::default() });
        let cfg = TuneConfig { budget: 1, seed: 11, ..Default::default() };
        let r = tune_alignment_params(&c, &cfg).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best, sample_params(&mut ChaCha8Rng::seed_from_u64(11)));
        assert_eq!(r.cv_mean_iou, r.trials[0].score);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(tune_alignment_params(&LabeledCorpus::default(), &TuneConfig::default()).is_err());
        let c = corpus(&clean(2));
        assert!(tune_alignment_params(&c, &TuneConfig::default()).is_err());
    }

    #[test]
    fn sampled_params_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let p = sample_params(&mut rng);
            p.validate().unwrap();
            assert!((0.0..=1.0).contains(&p.match_score));
            for key in crate::ingest::PARAM_KEYS.iter().filter(|k| **k != "match_score") {
                assert!((-1.0..=0.0).contains(&p.get(key).unwrap()), "{key}");
            }
        }
    }

    #[test]
    fn loads_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let docs = generate_corpus(&SynthConfig { n_docs: 3, ..Default::default() });
        write_corpus(&docs, dir.path()).unwrap();
        let c = LabeledCorpus::load_dir(dir.path()).unwrap();
        assert_eq!(c.docs.len(), 3);
        assert_eq!(c.docs[1].gold, docs[1].gold);
        assert_eq!(c.docs[1].transcript, docs[1].transcript);
        assert!(LabeledCorpus::load_dir(&dir.path().join("missing")).is_err());
    }

    fn aligned(span: Option<(f64, f64)>, est: Option<f64>) -> AlignedSentence {
        AlignedSentence {
            sentence: Sentence { text: "x".into(), raw_char_range: 0..1, speaker_id: None },
            span: span.map(|(start, end)| TimeSpan { start, end }),
            iou_estimate: est,
        }
    }

    #[test]
    fn sweep_cases() {
        // Estimates equal to the true IoU.
        let gold = aligned(Some((0.0, 10.0)), None);
        let mut entries: Vec<SweepEntry> = (0..=20)
            .map(|k| {
                let end = 10.0 * k as f64 / 20.0 + 0.01;
                let iou = interval_iou((0.0, end), (0.0, 10.0)).unwrap();
                let e = SweepEntry::new(&aligned(Some((0.0, end)), Some(iou)), &gold);
                assert_eq!(e.iou, iou);
                e
            })
            .collect();
        entries.push(SweepEntry::new(&aligned(None, None), &gold));
        entries.push(SweepEntry::new(&aligned(Some((0.0, 1.0)), Some(0.95)), &aligned(None, None)));
        let rows = sweep_threshold(&entries, &[0.9, 0.0, 0.7, 1.0 + 1e-9]);
        assert_eq!(rows.iter().map(|r| r.threshold).collect::<Vec<_>>(), vec![0.0, 0.7, 0.9, 1.0 + 1e-9]);
        assert_eq!(rows[0].kept, 22);
        assert_eq!(rows[0].sentence_recall, 21.0 / 22.0);
        assert_eq!(rows[0].sentence_precision, 21.0 / 22.0);
        assert_eq!(rows[3].kept, 0);
        assert_eq!(rows[3].sentence_recall, 0.0);
        for w in rows.windows(2) {
            assert!(w[1].mean_iou_kept >= w[0].mean_iou_kept || w[1].kept == 0);
            assert!(w[1].sentence_recall <= w[0].sentence_recall);
        }
    }
}
