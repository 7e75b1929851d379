use std::ops::Range;

use super::IngestError;

/// A contiguous stretch of transcript text attributed to one speaker.
/// Offsets are in characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerSpan {
    pub speaker_id: String,
    pub range: Range<usize>,
}

/// Manual transcript of one recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManualTranscript {
    pub recording_id: String,
    pub text: String,
    pub speaker_spans: Option<Vec<SpeakerSpan>>,
}

impl ManualTranscript {
    pub fn new(recording_id: impl Into<String>, text: impl Into<String>) -> Self {
        ManualTranscript {
            recording_id: recording_id.into(),
            text: text.into(),
            speaker_spans: None,
        }
    }

    /// Attaches speaker spans; they must be ordered, disjoint and inside the text.
    pub fn with_speaker_spans(mut self, mut spans: Vec<SpeakerSpan>) -> Result<Self, IngestError> {
        let len = self.text.chars().count();
        spans.sort_by_key(|s| (s.range.start, s.range.end));
        let mut prev_end = 0;
        for s in &spans {
            if s.range.start > s.range.end || s.range.end > len {
                return Err(IngestError::Speakers(format!(
                    "span {}..{} for {:?} outside text of {len} chars",
                    s.range.start, s.range.end, s.speaker_id
                )));
            }
            if s.range.start < prev_end {
                return Err(IngestError::Speakers(format!(
                    "span {}..{} for {:?} overlaps the previous span",
                    s.range.start, s.range.end, s.speaker_id
                )));
            }
            prev_end = s.range.end;
        }
        self.speaker_spans = Some(spans);
        Ok(self)
    }
}

/// Parses the speaker sidecar: `speaker_id<TAB>char_start<TAB>char_end` per line.
pub fn parse_speaker_spans(text: &str) -> Result<Vec<SpeakerSpan>, IngestError> {
    let mut spans = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(IngestError::Speakers(format!(
                "line {}: expected 3 tab-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| {
                IngestError::Speakers(format!("line {}: bad offset {s:?}", lineno + 1))
            })
        };
        spans.push(SpeakerSpan {
            speaker_id: fields[0].to_owned(),
            range: num(fields[1])?..num(fields[2])?,
        });
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round() {
        let spans = parse_speaker_spans("anna\t0\t5\nbeat\t6\t10\n").unwrap();
        assert_eq!(spans.len(), 2);
        let t = ManualTranscript::new("r", "Hallo Welt!").with_speaker_spans(spans).unwrap();
        assert_eq!(t.speaker_spans.unwrap()[1].range, 6..10);
    }

    #[test]
    fn rejects_overlap_and_out_of_bounds() {
        let overlapping = parse_speaker_spans("a\t0\t5\nb\t4\t8").unwrap();
        assert!(ManualTranscript::new("r", "0123456789")
            .with_speaker_spans(overlapping)
            .is_err());
        let oob = parse_speaker_spans("a\t0\t50").unwrap();
        assert!(ManualTranscript::new("r", "short").with_speaker_spans(oob).is_err());
        assert!(parse_speaker_spans("a\t0").is_err());
    }
}
