use std::fmt::Display;

use forcealign::align::AlignError;
use forcealign::corpus::CorpusError;
use forcealign::pipeline::PipelineError;
use forcealign::quality::QualityError;
use forcealign::sentence_map::CalibrationError;
use forcealign::tune::TuneError;

pub const OK: u8 = 0;
/// Unreadable or invalid input, including bad flags.
pub const INPUT: u8 = 1;
/// A well-formed request that cannot be satisfied, such as an unreachable
/// test split.
pub const CONSTRAINT: u8 = 2;
/// A broken internal invariant.
pub const INTERNAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Display) -> Self {
        CliError { code: INPUT, message: message.to_string() }
    }

    pub fn internal(message: impl Display) -> Self {
        CliError { code: INTERNAL, message: message.to_string() }
    }

    /// Prefixes the message with a file or document name.
    pub fn context(self, what: impl Display) -> Self {
        CliError { message: format!("{what}: {}", self.message), ..self }
    }
}

fn align_code(e: &AlignError) -> u8 {
    match e {
        AlignError::InconsistentPath(_) | AlignError::OutOfBounds(_) => INTERNAL,
        _ => INPUT,
    }
}

fn quality_code(e: &QualityError) -> u8 {
    match e {
        QualityError::Align(a) => align_code(a),
        QualityError::NotFeaturizable(_) => INTERNAL,
        _ => INPUT,
    }
}

fn corpus_code(e: &CorpusError) -> u8 {
    match e {
        CorpusError::Unreachable(_) => CONSTRAINT,
        _ => INPUT,
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        CliError { code: align_code(&e), message: e.to_string() }
    }
}

impl From<QualityError> for CliError {
    fn from(e: QualityError) -> Self {
        CliError { code: quality_code(&e), message: e.to_string() }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError { code: corpus_code(&e), message: e.to_string() }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Align(a) => align_code(a),
            PipelineError::Quality(q) => quality_code(q),
            PipelineError::Corpus(c) => corpus_code(c),
            PipelineError::Record { .. } | PipelineError::Io(_) => INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Pipeline(p) => p.into(),
            other => CliError::input(other),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        CliError::input(e)
    }
}

impl From<forcealign::metrics::MetricsError> for CliError {
    fn from(e: forcealign::metrics::MetricsError) -> Self {
        CliError::input(e)
    }
}

impl From<forcealign::ingest::IngestError> for CliError {
    fn from(e: forcealign::ingest::IngestError) -> Self {
        CliError::input(e)
    }
}
