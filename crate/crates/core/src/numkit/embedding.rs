//! Embedding lookup layer.

use crate::scalar::Scalar;

use super::{NumError, Tensor};

/// Row lookup: `indices` is a row-major [batch, seq] index grid, `table` is
/// [vocab, dim]; the result is [batch, seq, dim]. Padding index 0 is looked
/// up like any other row.
pub fn embedding_forward<S: Scalar>(
    indices: &[usize],
    batch: usize,
    seq: usize,
    table: &Tensor<S>,
) -> Result<Tensor<S>, NumError> {
    if indices.len() != batch * seq || table.shape().len() != 2 {
        return Err(NumError::ShapeMismatch {
            context: "embedding_forward",
            expected: vec![batch, seq],
            got: vec![indices.len()],
        });
    }
    let (vocab, dim) = (table.shape()[0], table.shape()[1]);
    let mut out = Tensor::zeros(&[batch, seq, dim]);
    for (pos, &idx) in indices.iter().enumerate() {
        if idx >= vocab {
            return Err(NumError::IndexOutOfRange { index: idx, vocab });
        }
        out.data_mut()[pos * dim..(pos + 1) * dim]
            .copy_from_slice(&table.data()[idx * dim..(idx + 1) * dim]);
    }
    Ok(out)
}

/// Accumulates the upstream gradient into the looked-up table rows.
pub fn embedding_backward<S: Scalar>(
    indices: &[usize],
    table_shape: &[usize],
    grad_output: &Tensor<S>,
) -> Result<Tensor<S>, NumError> {
    let dim = table_shape[1];
    if grad_output.len() != indices.len() * dim {
        return Err(NumError::ShapeMismatch {
            context: "embedding_backward",
            expected: vec![indices.len(), dim],
            got: grad_output.shape().to_vec(),
        });
    }
    let mut d_table = Tensor::zeros(table_shape);
    for (pos, &idx) in indices.iter().enumerate() {
        let src = &grad_output.data()[pos * dim..(pos + 1) * dim];
        let dst = &mut d_table.data_mut()[idx * dim..(idx + 1) * dim];
        for (d, &g) in dst.iter_mut().zip(src) {
            *d = *d + g;
        }
    }
    Ok(d_table)
}
