use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate quantiles: knots {lower} and {upper} coincide at {value}")]
    DegenerateQuantiles { lower: usize, upper: usize, value: f64 },

    #[error("underdetermined segment: {distinct} distinct abscissae")]
    UnderdeterminedSegment { distinct: usize },

    #[error("ill-conditioned segment: condition estimate {condition:e}")]
    IllConditionedSegment { condition: f64 },

    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no support in range [{lo}, {hi}]")]
    NoSupportInRange { lo: f64, hi: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("integer bits exceed budget: m = {int_bits}, bit_max = {bit_max}")]
    IntegerBitsExceedBudget { int_bits: i32, bit_max: u32 },

    #[error("knots collapse at this precision: knots {lower} and {upper} both encode to {code}")]
    KnotsCollapse { lower: usize, upper: usize, code: i32 },

    #[error("accumulator overflow: sum exceeds 32 bits for a vector of length {len}")]
    AccumulatorOverflow { len: usize },

    #[error("training diverged: {variant} variant produced a non-finite loss at epoch {epoch}")]
    Diverged { variant: String, epoch: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn in_segment(self, index: usize) -> Self {
        Error::Segment {
            index,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
