//! Whole-model loss fragment for finite-difference gradient checking.

use crate::numkit::{LossFragment, NumError, ParamSet};
use crate::preprocess::TokenSequence;
use crate::scalar::Scalar;

use super::net::batch_loss;
use super::{DlError, TrainedModel};

/// Wraps a model with a fixed input batch so the full forward/backward pass
/// can be checked against central finite differences. Runs dropout-free, so
/// the loss is a deterministic function of the parameters.
pub struct ModelFragment<S: Scalar> {
    model: TrainedModel<S>,
    indices: Vec<usize>,
    batch: usize,
    labels: Vec<usize>,
}

impl<S: Scalar> ModelFragment<S> {
    pub fn new(
        model: TrainedModel<S>,
        sequences: &[TokenSequence],
        labels: &[usize],
    ) -> Result<Self, DlError> {
        if sequences.is_empty() {
            return Err(DlError::EmptyTrainingSet);
        }
        if sequences.len() != labels.len() {
            return Err(DlError::LengthMismatch {
                sequences: sequences.len(),
                labels: labels.len(),
            });
        }
        let seq_len = model.arch.seq_len();
        let mut indices = Vec::with_capacity(sequences.len() * seq_len);
        for s in sequences {
            if s.indices.len() != seq_len {
                return Err(DlError::SequenceLength {
                    expected: seq_len,
                    got: s.indices.len(),
                });
            }
            indices.extend_from_slice(&s.indices);
        }
        Ok(ModelFragment {
            batch: sequences.len(),
            model,
            indices,
            labels: labels.to_vec(),
        })
    }

    pub fn into_model(self) -> TrainedModel<S> {
        self.model
    }
}

impl<S: Scalar> LossFragment<S> for ModelFragment<S> {
    fn loss(&mut self) -> Result<S, NumError> {
        batch_loss(
            &self.model.arch.clone(),
            &mut self.model.params,
            &self.indices,
            self.batch,
            &self.labels,
            None,
            false,
        )
    }

    fn loss_and_grads(&mut self) -> Result<S, NumError> {
        batch_loss(
            &self.model.arch.clone(),
            &mut self.model.params,
            &self.indices,
            self.batch,
            &self.labels,
            None,
            true,
        )
    }

    fn params(&mut self) -> &mut ParamSet<S> {
        &mut self.model.params
    }
}
