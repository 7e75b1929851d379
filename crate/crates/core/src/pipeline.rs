//! End-to-end document alignment and corpus build, plus the JSON-lines
//! record formats that connect the stages.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::align::{global_align, AlignError, AlignMode, AlignOptions, AlignmentPath, PathIndex};
use crate::corpus::{
    canonical_speaker, split_by_speaker, CorpusEntry, CorpusError, Manifest, SplitConfig,
    SplitLabel,
};
use crate::ingest::{normalize_str, AlignmentParams, AsrTranscript, ManualTranscript};
use crate::quality::{
    apply_filters, extract_features, length_ratio_guard, DocumentAlignment, FilterConfig,
    GbdtModel, IouFeatures, LanguageDetector, QualityError, SplitRole,
};
use crate::sentence_map::{
    apply_time_calibration, map_sentences, AlignedSentence, Granularity, SymbolMaps,
    TimeCalibration, TimeSpan,
};
use crate::split::{attach_speakers, split_sentences, Abbreviations, Sentence};

/// Above this many DP cells, automatic mode switches to linear memory.
pub const AUTO_LINEAR_CELLS: usize = 1 << 26;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct AlignConfig {
    pub params: AlignmentParams,
    pub granularity: Granularity,
    /// `None` picks full DP or linear memory by problem size.
    pub mode: Option<AlignMode>,
    pub band: Option<usize>,
    /// `None` disables the length-ratio guard.
    pub max_length_ratio: Option<f64>,
    pub calibration: Option<TimeCalibration>,
    pub abbreviations: Abbreviations,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            params: AlignmentParams::optimized(),
            granularity: Granularity::Char,
            mode: None,
            band: None,
            max_length_ratio: Some(6.0),
            calibration: None,
            abbreviations: Abbreviations::german(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub recording_id: String,
    pub reason: String,
    pub truth_chars: usize,
    pub asr_chars: usize,
}

#[derive(Debug, Clone)]
pub struct DocumentResult {
    pub recording_id: String,
    /// Empty when the document was rejected.
    pub sentences: Vec<AlignedSentence>,
    /// Parallel to `sentences`; `None` for empty sentences.
    pub features: Vec<Option<IouFeatures>>,
    pub path: Option<AlignmentPath>,
    pub rejection: Option<RejectionRecord>,
}

/// Split, align, map, optionally calibrate, and featurize one document.
/// With an estimator, non-empty sentences also get an IoU estimate.
pub fn align_document(
    asr: &AsrTranscript,
    transcript: &ManualTranscript,
    cfg: &AlignConfig,
    estimator: Option<&GbdtModel>,
) -> Result<DocumentResult, PipelineError> {
    let recording_id = transcript.recording_id.clone();
    let truth_norm = normalize_str(&transcript.text);
    let asr_norm = asr
        .words
        .iter()
        .map(|w| normalize_str(&w.text))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    if let Some(max) = cfg.max_length_ratio {
        if !length_ratio_guard(&truth_norm, &asr_norm, max) {
            log::warn!("{recording_id}: rejected by length ratio guard");
            return Ok(DocumentResult {
                recording_id: recording_id.clone(),
                sentences: Vec::new(),
                features: Vec::new(),
                path: None,
                rejection: Some(RejectionRecord {
                    recording_id,
                    reason: "length_ratio".into(),
                    truth_chars: truth_norm.chars().count(),
                    asr_chars: asr_norm.chars().count(),
                }),
            });
        }
    }

    let mut sentences = split_sentences(transcript, &cfg.abbreviations);
    if let Some(spans) = &transcript.speaker_spans {
        sentences = attach_speakers(sentences, spans);
    }
    let maps = SymbolMaps::build(&transcript.text, asr, cfg.granularity);
    if maps.truth.is_empty() || maps.stt.is_empty() {
        let n = sentences.len();
        return Ok(DocumentResult {
            recording_id,
            sentences: sentences.into_iter().map(AlignedSentence::empty).collect(),
            features: vec![None; n],
            path: None,
            rejection: None,
        });
    }
    let mode = cfg.mode.unwrap_or(if maps.truth.len() * maps.stt.len() > AUTO_LINEAR_CELLS {
        AlignMode::LinearMemory
    } else {
        AlignMode::FullDp
    });
    let opts = AlignOptions { mode, band: cfg.band, ..AlignOptions::default() };
    let path = global_align(&maps.truth, &maps.stt, &cfg.params, opts)?;
    let mut aligned = map_sentences(&sentences, &path, asr, &maps)?;
    if let Some(c) = &cfg.calibration {
        aligned = aligned.iter().map(|s| apply_time_calibration(s, c, asr.duration)).collect();
    }

    let index = PathIndex::new(&path);
    let doc = DocumentAlignment { maps: &maps, path: &path, index: &index, asr, params: &cfg.params };
    let mut features = Vec::with_capacity(aligned.len());
    for s in &mut aligned {
        if s.is_empty() {
            features.push(None);
            continue;
        }
        let f = extract_features(s, &doc)?;
        if f.zero_length_projection {
            log::warn!("{recording_id}: sentence {:?} projects onto no ASR text", s.sentence.text);
        }
        s.iou_estimate = estimator.map(|m| m.predict(&f.features.to_row()));
        features.push(Some(f.features));
    }
    Ok(DocumentResult { recording_id, sentences: aligned, features, path: Some(path), rejection: None })
}

/// One line of an aligned-sentence or gold JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedRecord {
    pub text: String,
    pub start: Option<f64>,
    pub end: Option<f64>,
    #[serde(default)]
    pub iou_estimate: Option<f64>,
    #[serde(default)]
    pub speaker: Option<String>,
}

impl AlignedRecord {
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.start?, self.end?))
    }
}

impl From<&AlignedSentence> for AlignedRecord {
    fn from(s: &AlignedSentence) -> Self {
        AlignedRecord {
            text: s.sentence.text.clone(),
            start: s.span.map(|t| t.start),
            end: s.span.map(|t| t.end),
            iou_estimate: s.iou_estimate,
            speaker: s.sentence.speaker_id.clone(),
        }
    }
}

impl AlignedRecord {
    /// Back to an aligned sentence; character offsets are not stored and
    /// come back as an empty range.
    pub fn to_aligned(&self) -> AlignedSentence {
        AlignedSentence {
            sentence: Sentence { text: self.text.clone(), raw_char_range: 0..0, speaker_id: self.speaker.clone() },
            span: self.span().map(|(start, end)| TimeSpan { start, end }),
            iou_estimate: self.iou_estimate,
        }
    }
}

/// Feature row keyed by the sentence's position in its document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub sentence: usize,
    #[serde(flatten)]
    pub features: IouFeatures,
}

/// Training label for a feature row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sentence: usize,
    pub iou: f64,
}

pub fn feature_records(result: &DocumentResult) -> Vec<FeatureRecord> {
    result
        .features
        .iter()
        .enumerate()
        .filter_map(|(sentence, f)| f.map(|features| FeatureRecord { sentence, features }))
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T], mut w: impl Write) -> Result<(), PipelineError> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(r: impl BufRead) -> Result<Vec<T>, PipelineError> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Record {
            line: k + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Aligned output of one document as consumed by [`run_build`].
#[derive(Debug, Clone)]
pub struct BuildDocument {
    pub recording_id: String,
    pub sentences: Vec<AlignedRecord>,
    pub features: Vec<FeatureRecord>,
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub filters: FilterConfig,
    /// One `train_<t>` manifest per threshold.
    pub train_thresholds: Vec<f64>,
    /// IoU estimate threshold for the test set.
    pub test_iou_threshold: f64,
    pub split: SplitConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            filters: FilterConfig::default(),
            train_thresholds: vec![0.7, 0.9],
            test_iou_threshold: 0.9,
            split: SplitConfig::default(),
        }
    }
}

/// Manifests by name (`train_all`, `train_<t>`, `test`), in write order.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub manifests: Vec<(String, Manifest)>,
}

pub fn threshold_name(t: f64) -> String {
    format!("train_{t}")
}

/// Estimates IoU for every featurized sentence, picks speaker-disjoint test
/// speakers among sentences passing the test filters, and writes the
/// unfiltered `train_all`, one filtered `train_<t>` per threshold, and the
/// filtered `test` set. Without an estimator only `train_all` is produced,
/// with empty estimates.
pub fn run_build(
    docs: &[BuildDocument],
    estimator: Option<&GbdtModel>,
    cfg: &BuildConfig,
    detector: &dyn LanguageDetector,
) -> Result<BuildOutput, PipelineError> {
    let mut pool: Vec<AlignedSentence> = Vec::new();
    let mut entries: Vec<CorpusEntry> = Vec::new();
    for doc in docs {
        for f in &doc.features {
            let Some(rec) = doc.sentences.get(f.sentence) else {
                return Err(PipelineError::Record {
                    line: f.sentence + 1,
                    message: format!("{}: feature row for a missing sentence", doc.recording_id),
                });
            };
            let Some((start, end)) = rec.span() else { continue };
            let estimate = estimator.map(|m| m.predict(&f.features.to_row()));
            let mut s = rec.to_aligned();
            s.iou_estimate = estimate;
            pool.push(s);
            entries.push(CorpusEntry {
                recording_id: doc.recording_id.clone(),
                text: rec.text.clone(),
                start,
                end,
                iou_estimate: estimate,
                speaker_id: canonical_speaker(rec.speaker.as_deref().unwrap_or(""), &doc.recording_id),
                split: SplitLabel::Unassigned,
            });
        }
    }

    let Some(_) = estimator else {
        let m = split_by_speaker(entries, &cfg.split)?;
        return Ok(BuildOutput {
            manifests: vec![("train_all".into(), m.filter(|e| e.split == SplitLabel::Train))],
        });
    };

    let test_cfg = FilterConfig { iou_threshold: cfg.test_iou_threshold, ..cfg.filters.clone() };
    let test_ok = apply_filters(&pool, &test_cfg, SplitRole::Test, detector)?;
    let candidates: Vec<CorpusEntry> = test_ok.kept.iter().map(|&k| entries[k].clone()).collect();
    let test = split_by_speaker(candidates, &cfg.split)?.filter(|e| e.split == SplitLabel::Test);
    let test_speakers: BTreeSet<&str> = test.entries.iter().map(|e| e.speaker_id.as_str()).collect();

    let mut train_idx = Vec::new();
    let mut train_all = Vec::new();
    for (k, e) in entries.iter().enumerate() {
        if !test_speakers.contains(e.speaker_id.as_str()) {
            train_idx.push(k);
            train_all.push(CorpusEntry { split: SplitLabel::Train, ..e.clone() });
        }
    }
    let train_pool: Vec<AlignedSentence> = train_idx.iter().map(|&k| pool[k].clone()).collect();
    let mut manifests = vec![("train_all".to_string(), Manifest { entries: train_all.clone() })];
    for &t in &cfg.train_thresholds {
        let tcfg = FilterConfig { iou_threshold: t, ..cfg.filters.clone() };
        let kept = apply_filters(&train_pool, &tcfg, SplitRole::Train, detector)?;
        let m = Manifest { entries: kept.kept.iter().map(|&k| train_all[k].clone()).collect() };
        manifests.push((threshold_name(t), m));
    }
    manifests.push(("test".into(), test));
    Ok(BuildOutput { manifests })
}
