//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Error, Debug)]
pub enum CoreError {
    #[error("shape mismatch in {op}: operand `{operand}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        op: &'static str,
        operand: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: u32, b: u32 },

    #[error("noise signal is silent; mixing gain is undefined")]
    SilentNoise,

    #[error("reference signal is all-zero")]
    ZeroReference,

    #[error("wav error: {0}")]
    Wav(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint config digest mismatch: checkpoint has {found}, expected {expected}")]
    ConfigDigestMismatch { expected: String, found: String },

    #[error("invalid config: field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("training diverged at step {step} (loss {loss}); last good checkpoint: {last_good:?}")]
    Divergence {
        step: usize,
        loss: f64,
        last_good: Option<PathBuf>,
    },

    #[error("non-finite state during ODE integration at step {step}")]
    NonFiniteState { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
