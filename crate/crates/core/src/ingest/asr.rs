use serde::{Deserialize, Serialize};

use super::IngestError;

/// One recognized word with its timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrWord {
    pub text: String,
    pub start: f64,
    pub end: f64,
    /// `None` when the engine did not report a confidence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl AsrWord {
    pub fn new(text: impl Into<String>, start: f64, end: f64, confidence: f64) -> Self {
        AsrWord {
            text: text.into(),
            start,
            end,
            confidence: Some(confidence),
        }
    }

    /// Reported confidence, 1.0 when missing.
    pub fn confidence(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}

/// Time-ordered ASR output for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrTranscript {
    pub recording_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub words: Vec<AsrWord>,
}

impl AsrTranscript {
    /// Builds a transcript, checking every invariant of the ASR-JSON format.
    pub fn new(
        recording_id: impl Into<String>,
        duration: Option<f64>,
        words: Vec<AsrWord>,
    ) -> Result<Self, IngestError> {
        let t = AsrTranscript {
            recording_id: recording_id.into(),
            duration,
            words,
        };
        t.validate()?;
        Ok(t)
    }

    /// True when at least one word had no confidence and was defaulted.
    pub fn missing_confidence(&self) -> bool {
        self.words.iter().any(|w| w.confidence.is_none())
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if let Some(d) = self.duration {
            if !d.is_finite() || d < 0.0 {
                return Err(IngestError::Asr(format!("invalid duration {d}")));
            }
        }
        let mut prev_start = f64::NEG_INFINITY;
        for (index, w) in self.words.iter().enumerate() {
            let text = w.text.as_str();
            if text.is_empty() || text.chars().any(char::is_whitespace) {
                return Err(IngestError::Asr(format!(
                    "word {index}: text must be non-empty without whitespace, got {text:?}"
                )));
            }
            if !w.start.is_finite() || !w.end.is_finite() {
                return Err(IngestError::Asr(format!("word {index}: non-finite time")));
            }
            if w.start < 0.0 {
                return Err(IngestError::Asr(format!(
                    "word {index}: negative time {}",
                    w.start
                )));
            }
            if w.end < w.start {
                return Err(IngestError::Asr(format!(
                    "word {index}: time ordering violated, end {} < start {}",
                    w.end, w.start
                )));
            }
            if let Some(c) = w.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(IngestError::Asr(format!(
                        "word {index}: confidence {c} outside [0, 1]"
                    )));
                }
            }
            if w.start < prev_start {
                return Err(IngestError::WordOrder { index });
            }
            if let Some(d) = self.duration {
                if w.end > d {
                    return Err(IngestError::Asr(format!(
                        "word {index}: end {} exceeds duration {d}",
                        w.end
                    )));
                }
            }
            prev_start = w.start;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Parses canonical ASR-JSON.
pub fn parse_asr_transcript(bytes: &[u8]) -> Result<AsrTranscript, IngestError> {
    let t: AsrTranscript = serde_json::from_slice(bytes).map_err(|e| IngestError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    t.validate()?;
    if t.missing_confidence() {
        log::warn!(
            "recording {}: missing word confidences defaulted to 1.0",
            t.recording_id
        );
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_three_words() {
        let json = br#"{"recording_id":"r1","duration":5.0,"words":[
            {"text":"der","start":0.0,"end":0.3,"confidence":0.9},
            {"text":"rat","start":0.3,"end":0.7,"confidence":0.8},
            {"text":"tagt","start":0.8,"end":1.2}]}"#;
        let t = parse_asr_transcript(json).unwrap();
        assert_eq!(t.words.len(), 3);
        assert_eq!(t.words[2].confidence(), 1.0);
        assert!(t.missing_confidence());
    }

    #[test]
    fn rejects_end_before_start() {
        let json = br#"{"recording_id":"r","words":[{"text":"a","start":1.0,"end":0.5}]}"#;
        let err = parse_asr_transcript(json).unwrap_err();
        assert!(err.to_string().contains("time ordering"), "{err}");
    }

    #[test]
    fn reports_first_out_of_order_index() {
        let json = br#"{"recording_id":"r","words":[
            {"text":"b","start":1.0,"end":1.5},
            {"text":"a","start":0.0,"end":0.5}]}"#;
        match parse_asr_transcript(json) {
            Err(IngestError::WordOrder { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        let neg = br#"{"recording_id":"r","words":[{"text":"a","start":-1.0,"end":0.5}]}"#;
        assert!(parse_asr_transcript(neg).is_err());
        let conf = br#"{"recording_id":"r","words":[{"text":"a","start":0,"end":0.5,"confidence":1.5}]}"#;
        assert!(parse_asr_transcript(conf).is_err());
        let dur = br#"{"recording_id":"r","duration":0.2,"words":[{"text":"a","start":0,"end":0.5}]}"#;
        assert!(parse_asr_transcript(dur).is_err());
        let space = br#"{"recording_id":"r","words":[{"text":"a b","start":0,"end":0.5}]}"#;
        assert!(parse_asr_transcript(space).is_err());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_asr_transcript(b"{\n  \"recording_id\": ,").unwrap_err();
        match err {
            IngestError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_transcript() -> impl Strategy<Value = AsrTranscript> {
        prop::collection::vec(
            ("[a-zäöü]{1,8}", 0.0f64..2.0, 0.0f64..1.0, prop::option::of(0.0f64..=1.0)),
            0..20,
        )
        .prop_map(|raw| {
            let mut t = 0.0;
            let words = raw
                .into_iter()
                .map(|(text, gap, len, confidence)| {
                    let start = t + gap;
                    t = start + len;
                    AsrWord { text, start, end: t, confidence }
                })
                .collect::<Vec<_>>();
            let duration = words.last().map(|w| w.end + 1.0);
            AsrTranscript { recording_id: "rec".into(), duration, words }
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(t in arb_transcript()) {
            let back = parse_asr_transcript(t.to_json().as_bytes()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
