//! Minimal dense-tensor kernel: hand-derived forward/backward passes for the
//! layers the deep text models need, Adam, and a finite-difference gradient
//! checker.

mod conv;
mod dense;
mod dropout;
mod embedding;
mod gradcheck;
mod init;
mod loss;
mod lstm;
mod params;
mod pool;
mod tensor;

pub use conv::{conv1d_backward, conv1d_forward, Conv1dCache};
pub use dense::{dense_backward, dense_forward, Activation, DenseCache};
pub use dropout::{apply_mask, dropout_mask};
pub use embedding::{embedding_backward, embedding_forward};
pub use gradcheck::{finite_difference_check, GradCheckReport, LossFragment};
pub use init::{glorot_uniform, uniform_init};
pub use loss::{
    sigmoid, sigmoid_bce_backward, sigmoid_bce_loss, softmax, softmax_ce_backward, softmax_ce_loss,
};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_cell_backward, lstm_cell_forward, BilstmCache,
    LstmCellCache, LstmGateGrads, LstmGateParams, GATE_NAMES,
};
pub use params::{adam_step, AdamState, ParamSet};
pub use pool::{global_max_pool_backward, global_max_pool_forward, PoolCache};
pub use tensor::Tensor;

/// Errors from the tensor kernel.
#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("{context}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("embedding index {index} out of range for vocabulary of {vocab}")]
    IndexOutOfRange { index: usize, vocab: usize },
    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropoutRate(f64),
    #[error("{context}: empty time axis")]
    EmptyTimeAxis { context: &'static str },
    #[error("non-finite loss during gradient check")]
    NonFiniteLoss,
}
