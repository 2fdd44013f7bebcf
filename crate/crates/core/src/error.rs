use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("degenerate input to {op}: {reason}")]
    Degenerate { op: &'static str, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: non-finite gradient in parameter `{param}`")]
    Divergence { param: String },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid data: {0}")]
    Data(String),
}
