//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. The variants map
//! one-to-one onto the error classes surfaced by the CLI (`error:
//! <class>: <message>`), so [`Error::class`] must stay stable.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Option index beyond what a single Latin letter can address.
    #[error("option index {0} out of range (letters cover indices 0..=25)")]
    OutOfRange(usize),

    /// A letter that does not name one of the record's options.
    #[error("'{ch}' does not name one of the first {m} options")]
    NotAnOption { ch: char, m: usize },

    /// A video source with zero frames.
    #[error("video source has no frames: {0}")]
    EmptyVideo(String),

    /// Unreadable or corrupt video source, or a failing external decoder.
    #[error("video source error: {0}")]
    Source(String),

    /// Duplicate registration (template ids, rig sentinels).
    #[error("conflict: {0}")]
    Conflict(String),

    /// Template body rejected at registration.
    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("not found: {0}")]
    NotFound(String),

    /// Empty question passed to a question-dependent template.
    #[error("invalid question: {0}")]
    InvalidQuestion(String),

    /// Retries exhausted against an inference endpoint.
    #[error("service unavailable: {0}")]
    Unavailable(String),

    /// Non-retryable rejection from an inference endpoint.
    #[error("bad request: {0}")]
    BadRequest(String),

    /// Response that does not conform to the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Cache storage failure.
    #[error("storage error: {0}")]
    Storage(String),

    /// Dataset or input validation failure.
    #[error("validation error: {0}")]
    Validation(String),

    /// Unknown dataset source format.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Benchmark annotation file does not match the expected layout.
    #[error("adapter error: {0}")]
    Adapter(String),

    /// Scoring input that cannot be reconciled with the dataset.
    #[error("report error: {0}")]
    Report(String),

    /// Bad configuration file or flag combination.
    #[error("config error: {0}")]
    Config(String),

    /// Run stopped before completion (signal-initiated drain).
    #[error("run interrupted: {0}")]
    Interrupted(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-parsable class tag, one per variant.
    pub fn class(&self) -> &'static str {
        match self {
            Error::OutOfRange(_) => "out_of_range",
            Error::NotAnOption { .. } => "not_an_option",
            Error::EmptyVideo(_) => "empty_video",
            Error::Source(_) => "source_error",
            Error::Conflict(_) => "conflict",
            Error::InvalidTemplate(_) => "invalid_template",
            Error::NotFound(_) => "not_found",
            Error::InvalidQuestion(_) => "invalid_question",
            Error::Unavailable(_) => "unavailable",
            Error::BadRequest(_) => "bad_request",
            Error::Protocol(_) => "protocol_error",
            Error::Storage(_) => "storage_error",
            Error::Validation(_) => "validation_error",
            Error::Unsupported(_) => "unsupported",
            Error::Adapter(_) => "adapter_error",
            Error::Report(_) => "report_error",
            Error::Config(_) => "config_error",
            Error::Interrupted(_) => "interrupted",
            Error::Io(_) => "io_error",
        }
    }
}
