use serde::{Deserialize, Serialize};

use super::QualityError;
use crate::align::{AlignmentPath, PathIndex};
use crate::ingest::{normalize_str, AlignmentParams, AsrTranscript};
use crate::sentence_map::{project_sentence, AlignedSentence, SymbolMaps};

pub const FEATURE_NAMES: [&str; 4] = [
    "length_ratio",
    "norm_alignment_score",
    "mean_confidence",
    "chars_per_second",
];

/// Inputs to the IoU regressor, one row per non-empty aligned sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouFeatures {
    /// Normalized sentence length over normalized length of the ASR words
    /// it aligned to.
    pub length_ratio: f64,
    /// Score of the sentence's part of the alignment per truth symbol.
    pub norm_alignment_score: f64,
    /// Mean confidence of the covered ASR words.
    pub mean_confidence: f64,
    /// Raw sentence characters per second of its span.
    pub chars_per_second: f64,
}

impl IouFeatures {
    pub fn to_row(&self) -> [f64; 4] {
        [
            self.length_ratio,
            self.norm_alignment_score,
            self.mean_confidence,
            self.chars_per_second,
        ]
    }
}

/// Everything about one aligned document that feature extraction reads.
#[derive(Debug, Clone, Copy)]
pub struct DocumentAlignment<'a> {
    pub maps: &'a SymbolMaps,
    pub path: &'a AlignmentPath,
    pub index: &'a PathIndex,
    pub asr: &'a AsrTranscript,
    pub params: &'a AlignmentParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extracted {
    pub features: IouFeatures,
    /// Set when the sentence projected onto no ASR characters and the
    /// length ratio fell back to a denominator of 1.
    pub zero_length_projection: bool,
}

pub fn extract_features(
    s: &AlignedSentence,
    doc: &DocumentAlignment,
) -> Result<Extracted, QualityError> {
    let span = s.span.ok_or(QualityError::NotFeaturizable("empty aligned sentence"))?;
    let norm_len = normalize_str(&s.sentence.text).chars().count();
    if norm_len == 0 || span.duration() <= 0.0 {
        return Err(QualityError::NotFeaturizable("sentence has no alignable text"));
    }
    let proj = project_sentence(&s.sentence, doc.index, doc.maps)?;

    let (segment_len, mean_confidence) = match proj.words {
        Some((first, last)) => {
            let words = &doc.asr.words[first..=last];
            let normalized: Vec<String> = words
                .iter()
                .map(|w| normalize_str(&w.text))
                .filter(|w| !w.is_empty())
                .collect();
            let len = normalized.iter().map(|w| w.chars().count()).sum::<usize>()
                + normalized.len().saturating_sub(1);
            let conf = words.iter().map(|w| w.confidence()).sum::<f64>() / words.len() as f64;
            (len, conf)
        }
        None => (0, 0.0),
    };
    let zero_length_projection = segment_len == 0;

    let norm_alignment_score = if proj.truth.is_empty() {
        0.0
    } else {
        let score = doc
            .index
            .segment_score(doc.path, proj.truth.clone(), &doc.maps.truth, &doc.maps.stt, doc.params)
            .unwrap_or(0.0);
        score / proj.truth.len() as f64
    };

    Ok(Extracted {
        features: IouFeatures {
            length_ratio: norm_len as f64 / segment_len.max(1) as f64,
            norm_alignment_score,
            mean_confidence,
            chars_per_second: s.sentence.text.chars().count() as f64 / span.duration(),
        },
        zero_length_projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{global_align, AlignMode};
    use crate::ingest::{AsrWord, ManualTranscript};
    use crate::sentence_map::{map_sentences, Granularity};
    use crate::split::{split_sentences, Abbreviations};

    fn featurize(text: &str, words: Vec<AsrWord>, params: &AlignmentParams) -> Vec<Result<Extracted, QualityError>> {
        let asr = AsrTranscript::new("r", None, words).unwrap();
        let sentences = split_sentences(&ManualTranscript::new("r", text), &Abbreviations::german());
        let maps = SymbolMaps::build(text, &asr, Granularity::Char);
        let path = global_align(&maps.truth, &maps.stt, params, AlignMode::FullDp).unwrap();
        let index = PathIndex::new(&path);
        let aligned = map_sentences(&sentences, &path, &asr, &maps).unwrap();
        let doc = DocumentAlignment { maps: &maps, path: &path, index: &index, asr: &asr, params };
        aligned.iter().map(|s| extract_features(s, &doc)).collect()
    }

    #[test]
    fn identical_ten_char_sentence() {
        let p = AlignmentParams::uniform(1.0, -1.0, -1.0, -1.0);
        let out = featurize("abcdefghij", vec![AsrWord::new("abcdefghij", 2.0, 3.0, 0.9)], &p);
        let f = out[0].as_ref().unwrap();
        assert!(!f.zero_length_projection);
        let r = f.features.to_row();
        let expected = [1.0, 1.0, 0.9, 10.0];
        for k in 0..4 {
            assert!((r[k] - expected[k]).abs() < 1e-12, "{} {}", FEATURE_NAMES[k], r[k]);
        }
    }

    #[test]
    fn sentence_twice_as_long_as_segment() {
        // "abcdef" aligned against ASR "abc": free end gaps keep the pairs.
        let out = featurize("abcdef", vec![AsrWord::new("abc", 0.0, 1.0, 0.5)], &AlignmentParams::semi_global());
        let f = out[0].as_ref().unwrap().features;
        assert_eq!(f.length_ratio, 2.0);
        assert_eq!(f.mean_confidence, 0.5);
    }

    #[test]
    fn empty_sentence_not_featurizable() {
        let p = AlignmentParams::optimized();
        let asr = AsrTranscript::new("r", None, vec![AsrWord::new("ja", 0.0, 0.5, 1.0)]).unwrap();
        let maps = SymbolMaps::build("Ja.", &asr, Granularity::Char);
        let path = global_align(&maps.truth, &maps.stt, &p, AlignMode::FullDp).unwrap();
        let index = PathIndex::new(&path);
        let doc = DocumentAlignment { maps: &maps, path: &path, index: &index, asr: &asr, params: &p };
        let sentence = split_sentences(&ManualTranscript::new("r", "Ja."), &Abbreviations::german()).remove(0);
        let err = extract_features(&AlignedSentence::empty(sentence), &doc).unwrap_err();
        assert!(err.to_string().contains("not featurizable"));
    }
}
