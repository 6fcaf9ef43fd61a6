//! Valid (no-padding) 1-D convolution over the time axis.

use crate::scalar::Scalar;

use super::dense::Activation;
use super::{NumError, Tensor};

#[derive(Debug, Clone)]
pub struct Conv1dCache<S> {
    input: Tensor<S>,
    preactivation: Tensor<S>,
    activation: Activation,
    stride: usize,
}

/// Cross-correlation of `input: [batch, seq, in]` with
/// `filters: [k, in, out]`; output time length is ⌊(seq − k)/stride⌋ + 1.
pub fn conv1d_forward<S: Scalar>(
    input: &Tensor<S>,
    filters: &Tensor<S>,
    bias: &Tensor<S>,
    stride: usize,
    activation: Activation,
) -> Result<(Tensor<S>, Conv1dCache<S>), NumError> {
    if input.shape().len() != 3 || filters.shape().len() != 3 {
        return Err(NumError::ShapeMismatch {
            context: "conv1d_forward",
            expected: vec![3],
            got: vec![input.shape().len()],
        });
    }
    let (batch, seq, in_ch) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (k, f_in, out_ch) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    if f_in != in_ch || bias.shape() != [out_ch] || stride == 0 {
        return Err(NumError::ShapeMismatch {
            context: "conv1d_forward filters",
            expected: vec![k, in_ch, out_ch],
            got: filters.shape().to_vec(),
        });
    }
    if seq < k {
        return Err(NumError::ShapeMismatch {
            context: "conv1d_forward seq shorter than kernel",
            expected: vec![k],
            got: vec![seq],
        });
    }
    let out_len = (seq - k) / stride + 1;
    let mut pre = Tensor::zeros(&[batch, out_len, out_ch]);
    for b in 0..batch {
        for t in 0..out_len {
            let dst = &mut pre.data_mut()[(b * out_len + t) * out_ch..(b * out_len + t + 1) * out_ch];
            dst.copy_from_slice(bias.data());
            for dk in 0..k {
                let x_row = &input.data()
                    [(b * seq + t * stride + dk) * in_ch..(b * seq + t * stride + dk + 1) * in_ch];
                for (i, &x) in x_row.iter().enumerate() {
                    if x == S::zero() {
                        continue;
                    }
                    let f_row = &filters.data()[(dk * in_ch + i) * out_ch..(dk * in_ch + i + 1) * out_ch];
                    for (d, &f) in dst.iter_mut().zip(f_row) {
                        *d = *d + x * f;
                    }
                }
            }
        }
    }
    let output = match activation {
        Activation::Linear => pre.clone(),
        Activation::Relu => pre.map(|v| if v > S::zero() { v } else { S::zero() }),
    };
    let cache = Conv1dCache {
        input: input.clone(),
        preactivation: pre,
        activation,
        stride,
    };
    Ok((output, cache))
}

/// Returns (d_input, d_filters, d_bias).
pub fn conv1d_backward<S: Scalar>(
    cache: &Conv1dCache<S>,
    filters: &Tensor<S>,
    grad_output: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>), NumError> {
    let (batch, seq, in_ch) = (
        cache.input.shape()[0],
        cache.input.shape()[1],
        cache.input.shape()[2],
    );
    let (k, _, out_ch) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    let out_len = cache.preactivation.shape()[1];
    if grad_output.shape() != [batch, out_len, out_ch] {
        return Err(NumError::ShapeMismatch {
            context: "conv1d_backward",
            expected: vec![batch, out_len, out_ch],
            got: grad_output.shape().to_vec(),
        });
    }

    let mut d_pre = grad_output.clone();
    if let Activation::Relu = cache.activation {
        for (g, &p) in d_pre.data_mut().iter_mut().zip(cache.preactivation.data()) {
            if p <= S::zero() {
                *g = S::zero();
            }
        }
    }

    let mut d_input = Tensor::zeros(&[batch, seq, in_ch]);
    let mut d_filters = Tensor::zeros(filters.shape());
    let mut d_bias = Tensor::zeros(&[out_ch]);
    for b in 0..batch {
        for t in 0..out_len {
            let g_row = &d_pre.data()[(b * out_len + t) * out_ch..(b * out_len + t + 1) * out_ch];
            for (bias, &g) in d_bias.data_mut().iter_mut().zip(g_row) {
                *bias = *bias + g;
            }
            for dk in 0..k {
                let x_pos = (b * seq + t * cache.stride + dk) * in_ch;
                for i in 0..in_ch {
                    let x = cache.input.data()[x_pos + i];
                    let f_row = &filters.data()[(dk * in_ch + i) * out_ch..(dk * in_ch + i + 1) * out_ch];
                    let mut dx = S::zero();
                    for (o, &g) in g_row.iter().enumerate() {
                        dx = dx + g * f_row[o];
                        let df = &mut d_filters.data_mut()[(dk * in_ch + i) * out_ch + o];
                        *df = *df + g * x;
                    }
                    let slot = &mut d_input.data_mut()[x_pos + i];
                    *slot = *slot + dx;
                }
            }
        }
    }
    Ok((d_input, d_filters, d_bias))
}
