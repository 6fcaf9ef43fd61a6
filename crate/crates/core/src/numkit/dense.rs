//! Fully-connected layer.

use crate::scalar::Scalar;

use super::{NumError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache<S> {
    input: Tensor<S>,
    preactivation: Tensor<S>,
    activation: Activation,
}

/// `y = act(x · W + b)` for `x: [batch, in]`, `W: [in, out]`, `b: [out]`.
pub fn dense_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
    activation: Activation,
) -> Result<(Tensor<S>, DenseCache<S>), NumError> {
    if input.shape().len() != 2
        || weights.shape().len() != 2
        || input.shape()[1] != weights.shape()[0]
        || bias.shape() != [weights.shape()[1]]
    {
        return Err(NumError::ShapeMismatch {
            context: "dense_forward",
            expected: weights.shape().to_vec(),
            got: input.shape().to_vec(),
        });
    }
    let mut pre = input.matmul(weights)?;
    let out_dim = weights.shape()[1];
    for row in pre.data_mut().chunks_mut(out_dim) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
    let output = match activation {
        Activation::Linear => pre.clone(),
        Activation::Relu => pre.map(|v| if v > S::zero() { v } else { S::zero() }),
    };
    let cache = DenseCache {
        input: input.clone(),
        preactivation: pre,
        activation,
    };
    Ok((output, cache))
}

/// Returns (d_input, d_weights, d_bias).
pub fn dense_backward<S: Scalar>(
    cache: &DenseCache<S>,
    weights: &Tensor<S>,
    grad_output: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>), NumError> {
    let mut d_pre = grad_output.clone();
    if let Activation::Relu = cache.activation {
        for (g, &p) in d_pre.data_mut().iter_mut().zip(cache.preactivation.data()) {
            if p <= S::zero() {
                *g = S::zero();
            }
        }
    }
    let d_input = d_pre.matmul(&weights.transpose2()?)?;
    let d_weights = cache.input.transpose2()?.matmul(&d_pre)?;
    let out_dim = weights.shape()[1];
    let mut d_bias = Tensor::zeros(&[out_dim]);
    for row in d_pre.data().chunks(out_dim) {
        for (b, &g) in d_bias.data_mut().iter_mut().zip(row) {
            *b = *b + g;
        }
    }
    Ok((d_input, d_weights, d_bias))
}
