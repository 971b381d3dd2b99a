use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unmappable Arabic code point U+{code:04X} at position {pos}")]
    UnmappableCodePoint { code: u32, pos: usize },

    #[error("character {ch:?} at position {pos} collides with a Buckwalter symbol")]
    ReservedAscii { ch: char, pos: usize },

    #[error("unknown Buckwalter symbol {ch:?} at position {pos}")]
    UnknownSymbol { ch: char, pos: usize },

    #[error("ambiguous symbol {ch:?} at position {pos}: Arabic script inside Buckwalter text")]
    AmbiguousSymbol { ch: char, pos: usize },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid entry: {0}")]
    InvalidEntry(String),

    #[error("empty surface form")]
    EmptySurface,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("gold reference has no lemma")]
    EmptyGoldLemma,

    #[error("no evaluatable token carries both a gold lemma and a gold POS")]
    NoTrainingData,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("cannot embed an empty phrase")]
    EmptyPhrase,

    #[error("no vector for {0:?} and the hashing fallback is disabled")]
    NoVector(String),

    #[error("k = {k} exceeds the number of points ({points})")]
    TooManyClusters { k: usize, points: usize },

    #[error("invalid clustering parameters: {0}")]
    ClusterParams(String),

    #[error("no ambiguous word types: the compactness ratio is undefined")]
    NoAmbiguousWords,

    #[error("LPG {0:?} has no cluster assignment")]
    MissingAssignment(String),

    #[error("LPG {0:?} is already assigned to a cluster")]
    AlreadyAssigned(String),

    #[error("no prediction for evaluatable token {sentence}:{index}")]
    MissingPrediction { sentence: String, index: usize },

    #[error("sentence {0:?} has no translation")]
    MissingTranslation(String),

    #[error("alignment index out of range in sentence {sentence:?}: {detail}")]
    AlignmentOutOfRange { sentence: String, detail: String },

    #[error("stage `{stage}` requires {flag}")]
    MissingResource { stage: String, flag: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("granularity {0} is not available: no evaluatable token carries that gold component")]
    GranularityUnavailable(&'static str),

    #[error("system outputs cover different tokens ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from how the tool was invoked rather than from
    /// the data it was given.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::MissingResource { .. } | Error::Config(_) | Error::ClusterParams(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
