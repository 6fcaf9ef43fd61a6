//! Global max pooling over the time axis.

use crate::scalar::Scalar;

use super::{NumError, Tensor};

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>, // time index per (batch, channel)
}

/// Per-channel maximum over time: [batch, seq, ch] -> [batch, ch].
/// Ties route to the earliest time position.
pub fn global_max_pool_forward<S: Scalar>(
    input: &Tensor<S>,
) -> Result<(Tensor<S>, PoolCache), NumError> {
    if input.shape().len() != 3 {
        return Err(NumError::ShapeMismatch {
            context: "global_max_pool_forward",
            expected: vec![3],
            got: vec![input.shape().len()],
        });
    }
    let (batch, seq, ch) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if seq == 0 {
        return Err(NumError::EmptyTimeAxis {
            context: "global_max_pool_forward",
        });
    }
    let mut out = Tensor::zeros(&[batch, ch]);
    let mut argmax = vec![0usize; batch * ch];
    for b in 0..batch {
        for c in 0..ch {
            let mut best = input.at3(b, 0, c);
            let mut best_t = 0;
            for t in 1..seq {
                let v = input.at3(b, t, c);
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            *out.at2_mut(b, c) = best;
            argmax[b * ch + c] = best_t;
        }
    }
    Ok((
        out,
        PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

/// Routes each channel's gradient to its argmax time position.
pub fn global_max_pool_backward<S: Scalar>(
    cache: &PoolCache,
    grad_output: &Tensor<S>,
) -> Result<Tensor<S>, NumError> {
    let (batch, _, ch) = (
        cache.input_shape[0],
        cache.input_shape[1],
        cache.input_shape[2],
    );
    if grad_output.shape() != [batch, ch] {
        return Err(NumError::ShapeMismatch {
            context: "global_max_pool_backward",
            expected: vec![batch, ch],
            got: grad_output.shape().to_vec(),
        });
    }
    let mut d_input = Tensor::zeros(&cache.input_shape);
    for b in 0..batch {
        for c in 0..ch {
            let t = cache.argmax[b * ch + c];
            *d_input.at3_mut(b, t, c) = grad_output.at2(b, c);
        }
    }
    Ok(d_input)
}
