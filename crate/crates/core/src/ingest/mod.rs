//! Parsing of ASR word timings, manual transcripts and alignment parameters.

mod asr;
mod normalize;
mod params;
mod transcript;

pub use asr::{parse_asr_transcript, AsrTranscript, AsrWord};
pub use normalize::{is_punctuation, normalize_str, normalize_text, NormalizedText};
pub use params::{
    parse_alignment_params, AlignmentParams, BoundaryGaps, GapScores, PARAM_KEYS,
};
pub use transcript::{parse_speaker_spans, ManualTranscript, SpeakerSpan};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("words out of start-time order at index {index}")]
    WordOrder { index: usize },
    #[error("invalid ASR transcript: {0}")]
    Asr(String),
    #[error("alignment parameters: {0}")]
    Params(String),
    #[error("speaker spans: {0}")]
    Speakers(String),
}
