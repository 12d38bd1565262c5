//! Minimal differentiable-layer toolkit for the fixed classifier
//! architecture family: dense, batch normalization, dropout, same-padded
//! temporal convolution, LSTM, masked sequence ops, BCE loss, AdamW, and a
//! finite-difference gradient checker.
//!
//! All arithmetic is f64. Trainable parameters are kept on the f32 grid
//! (initializers and the optimizer round through f32), so serializing them
//! as float32 checkpoints is lossless and reloaded models predict
//! bit-identically.

mod gradcheck;
mod layers;
mod loss;
mod lstm;
mod optim;
mod seq;

pub use gradcheck::{max_rel_error_subsampled, relative_error, GRADCHECK_H};
pub use layers::{relu, relu_backward, sigmoid, BatchNorm1d, BatchNormCache, Conv1dSame, Dense, Dropout};
pub use loss::bce_loss;
pub use lstm::{BiLstm, BiLstmCache, LstmCache, LstmDirection};
pub use optim::{quantize_f32, quantize_slice, AdamW, AdamWConfig, ParamMut};
pub use seq::{
    masked_max, masked_max_backward, masked_mean, masked_mean_backward, masked_softmax,
    masked_softmax_backward, reverse_valid, SequenceBatch,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch normalization in training mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("convolution kernel must be odd, got {0}")]
    EvenKernel(usize),
    #[error("sequence with no valid positions")]
    EmptySequence,
    #[error("non-finite value encountered")]
    NonFinite,
}
