use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no records to build a corpus from")]
    NoRecords,
    #[error("record {line}: {reason}")]
    InvalidRecord { line: usize, reason: String },
    #[error("every document was emptied by vocabulary filtering")]
    AllDocumentsEmpty,
    #[error("need at least 2 initiatives to partition, found {0}")]
    TooFewInitiatives(usize),
    #[error("invalid partition ratio {0}, expected a value in (0, 1)")]
    InvalidRatio(f64),

    #[error("cannot train a topic model on an empty corpus")]
    EmptyCorpus,
    #[error("invalid number of topics {0}, need at least 2")]
    InvalidK(usize),
    #[error("document has no terms known to the topic model")]
    NoKnownTerms,
    #[error("document index {0} has no topic distribution in this model")]
    UnknownDocument(usize),

    #[error("topic distribution has no positive entry")]
    DegenerateDistribution,
    #[error("invalid topic distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("term {term} has zero likelihood under every selected topic")]
    ZeroDenominator { term: u32 },

    #[error("cannot build an index from zero subprofiles")]
    EmptyInput,
    #[error("duplicate subprofile `{0}`")]
    DuplicateSubprofile(String),
    #[error("query vector is all zeros")]
    ZeroVector,

    #[error("query `{0}` is empty after preprocessing")]
    EmptyQuery(String),
    #[error("metric is undefined for a query with no relevant candidates")]
    UndefinedForEmptyQrel,
    #[error("need at least {expected} values, got {got}")]
    TooFewValues { expected: usize, got: usize },
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("normalized entropy needs at least 2 categories, got {0}")]
    SingleCategory(usize),
    #[error("counts sum to zero")]
    ZeroMass,

    #[error("invalid synthetic corpus parameters: {0}")]
    InvalidParams(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
