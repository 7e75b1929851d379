//! Forced sentence alignment of long speech recordings to manual transcripts.
//!
//! The pipeline takes timed ASR words and a manual transcript, splits the
//! transcript into sentences, aligns the normalized transcript globally to
//! the ASR text, and reads each sentence's start and end time off the
//! aligned ASR words. A gradient-boosted regressor estimates each
//! sentence's alignment quality (IoU against the true span) so that a corpus
//! can be filtered to a chosen quality level and split into speaker-disjoint
//! training and test sets.

pub mod align;
pub mod corpus;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod quality;
pub mod sentence_map;
pub mod split;
pub mod synth;
pub mod tune;

pub use align::{global_align, AlignMode, AlignOptions, AlignmentPath};
pub use ingest::{AlignmentParams, AsrTranscript, AsrWord, ManualTranscript};
pub use sentence_map::AlignedSentence;
pub use split::Sentence;

/// Version of the on-disk formats (aligned JSONL, model JSON, manifests).
pub const FORMAT_VERSION: u32 = 1;
