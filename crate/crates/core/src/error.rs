use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate passage id {0}")]
    DuplicatePassage(String),
    #[error("duplicate table id {0}")]
    DuplicateTable(String),
    #[error("passage {0} has empty text")]
    EmptyPassage(String),
    #[error("table {table}: {reason}")]
    TableShape { table: String, reason: String },
    /// `row` and `column` are 1-based.
    #[error("table {table}: cell (row {row}, column {column}) links unknown passage {passage}")]
    DanglingLink {
        table: String,
        row: usize,
        column: usize,
        passage: String,
    },
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("question {0} has no table id")]
    MissingTableId(String),
    #[error("question {0} has no answer text")]
    MissingAnswer(String),
    #[error("empty positive bag")]
    EmptyBag,
    #[error("no training instances with a non-empty positive bag")]
    NoTrainableBags,
    #[error("no single-span instances for initial model")]
    NoSingleSpanInstances,
    #[error("no extraction instances")]
    NoExtractionInstances,
    #[error("table {0} has no rows")]
    EmptyTable(String),
    #[error("no hard negative available")]
    NoHardNegative,
    #[error("duplicate prediction for question {0}")]
    DuplicatePrediction(String),
    #[error("prediction for unknown question {0}")]
    UnknownQuestion(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
