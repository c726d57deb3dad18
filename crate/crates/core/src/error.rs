use std::io;

use thiserror::Error;

use crate::model::ParamStore;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("word is empty after stripping the continuation prefix")]
    EmptyWord,

    #[error("no vocabulary entry is phonetically similar to {target:?}")]
    DegenerateSupport { target: String },

    #[error("{what}, line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("phoneme {symbol:?} is not in the inventory")]
    UnknownPhoneme { symbol: String },

    #[error("vocabulary size {requested} is below the minimum {minimum}")]
    SizeTooSmall { requested: usize, minimum: usize },

    #[error("corruption prior {0} is outside [0, 1]")]
    PriorOutOfRange(f64),

    #[error("cannot estimate a corruption prior from an empty corpus")]
    EmptyCorpus,

    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("decoder prefix of {len} tokens exceeds the generation limit {max}")]
    PrefixTooLong { len: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite gradient in {array}")]
    NonFiniteGradient { array: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        last_good: Box<ParamStore>,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint version mismatch: found {found:?}")]
    VersionMismatch { found: String },

    #[error("generated length {m} is outside [1, {max}]")]
    OutOfRange { m: usize, max: usize },

    #[error("corruption plan does not match spans: {0}")]
    PlanMismatch(String),

    #[error("reference has {reference} texts but hypothesis has {hypothesis}")]
    LengthMismatch { reference: usize, hypothesis: usize },

    #[error("token {token:?} has {count} observations, need at least {required}")]
    InsufficientData {
        token: String,
        count: usize,
        required: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}
