use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("shape {shape:?} does not hold {len} values")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape node {node} refers to a later node {parent}")]
    GraphCycle { node: usize, parent: usize },
    #[error("parameter {0} is not registered with the optimizer")]
    UnknownParameter(usize),
    #[error("timestep {t} outside 1..={steps}")]
    TimestepOutOfRange { t: usize, steps: usize },
    #[error("epsilon prediction cannot denoise from a zero-SNR step (t = {0})")]
    ZeroSnrEpsilon(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("message index {m} outside 0..{count}")]
    MessageOutOfRange { m: usize, count: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}
