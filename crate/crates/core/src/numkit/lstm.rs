//! LSTM cell and bidirectional LSTM layer with backpropagation through time.

use crate::scalar::Scalar;

use super::{NumError, Tensor};

/// Gate order used throughout: input, forget, cell-candidate, output.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "cell", "output"];

/// One direction's parameters: per gate, a weight block over the
/// concatenation [x_t, h_prev] of shape [in + hidden, hidden] plus a bias.
#[derive(Debug, Clone, Copy)]
pub struct LstmGateParams<'a, S> {
    pub weights: [&'a Tensor<S>; 4],
    pub biases: [&'a Tensor<S>; 4],
}

impl<'a, S: Scalar> LstmGateParams<'a, S> {
    pub fn hidden(&self) -> usize {
        self.weights[0].shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].shape()[0] - self.hidden()
    }

    fn validate(&self, input_dim: usize) -> Result<(), NumError> {
        let hidden = self.hidden();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if w.shape() != [input_dim + hidden, hidden] || b.shape() != [hidden] {
                return Err(NumError::ShapeMismatch {
                    context: "lstm gate params",
                    expected: vec![input_dim + hidden, hidden],
                    got: w.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// Per-gate parameter gradients, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LstmGateGrads<S> {
    pub weights: [Tensor<S>; 4],
    pub biases: [Tensor<S>; 4],
}

impl<S: Scalar> LstmGateGrads<S> {
    fn zeros_like(params: &LstmGateParams<'_, S>) -> Self {
        LstmGateGrads {
            weights: std::array::from_fn(|g| Tensor::zeros(params.weights[g].shape())),
            biases: std::array::from_fn(|g| Tensor::zeros(params.biases[g].shape())),
        }
    }

    fn accumulate(&mut self, other: &LstmGateGrads<S>) -> Result<(), NumError> {
        for g in 0..4 {
            self.weights[g].add_assign(&other.weights[g])?;
            self.biases[g].add_assign(&other.biases[g])?;
        }
        Ok(())
    }
}

/// Forward-pass values one cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmCellCache<S> {
    concat_input: Tensor<S>, // [batch, in + hidden]
    gate_i: Tensor<S>,
    gate_f: Tensor<S>,
    gate_g: Tensor<S>,
    gate_o: Tensor<S>,
    c_prev: Tensor<S>,
    tanh_c: Tensor<S>,
}

fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// One LSTM step: i,f,o = sigmoid gates, g = tanh candidate,
/// c_t = f ⊙ c_prev + i ⊙ g, h_t = o ⊙ tanh(c_t).
pub fn lstm_cell_forward<S: Scalar>(
    x: &Tensor<S>,
    h_prev: &Tensor<S>,
    c_prev: &Tensor<S>,
    params: &LstmGateParams<'_, S>,
) -> Result<(Tensor<S>, Tensor<S>, LstmCellCache<S>), NumError> {
    let batch = x.shape()[0];
    let input_dim = x.shape()[1];
    let hidden = params.hidden();
    params.validate(input_dim)?;
    if h_prev.shape() != [batch, hidden] || c_prev.shape() != [batch, hidden] {
        return Err(NumError::ShapeMismatch {
            context: "lstm_cell_forward state",
            expected: vec![batch, hidden],
            got: h_prev.shape().to_vec(),
        });
    }

    let mut concat = Tensor::zeros(&[batch, input_dim + hidden]);
    for b in 0..batch {
        let dst = &mut concat.data_mut()[b * (input_dim + hidden)..(b + 1) * (input_dim + hidden)];
        dst[..input_dim].copy_from_slice(&x.data()[b * input_dim..(b + 1) * input_dim]);
        dst[input_dim..].copy_from_slice(&h_prev.data()[b * hidden..(b + 1) * hidden]);
    }

    let mut pre = Vec::with_capacity(4);
    for g in 0..4 {
        let mut p = concat.matmul(params.weights[g])?;
        for row in p.data_mut().chunks_mut(hidden) {
            for (v, &b) in row.iter_mut().zip(params.biases[g].data()) {
                *v = *v + b;
            }
        }
        pre.push(p);
    }
    let gate_i = pre[0].map(sigmoid_scalar);
    let gate_f = pre[1].map(sigmoid_scalar);
    let gate_g = pre[2].map(|v| v.tanh());
    let gate_o = pre[3].map(sigmoid_scalar);

    let mut c = Tensor::zeros(&[batch, hidden]);
    for idx in 0..batch * hidden {
        c.data_mut()[idx] = gate_f.data()[idx] * c_prev.data()[idx]
            + gate_i.data()[idx] * gate_g.data()[idx];
    }
    let tanh_c = c.map(|v| v.tanh());
    let mut h = Tensor::zeros(&[batch, hidden]);
    for idx in 0..batch * hidden {
        h.data_mut()[idx] = gate_o.data()[idx] * tanh_c.data()[idx];
    }

    let cache = LstmCellCache {
        concat_input: concat,
        gate_i,
        gate_f,
        gate_g,
        gate_o,
        c_prev: c_prev.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backward through one cell step. Returns (d_x, d_h_prev, d_c_prev, grads).
pub fn lstm_cell_backward<S: Scalar>(
    cache: &LstmCellCache<S>,
    params: &LstmGateParams<'_, S>,
    d_h: &Tensor<S>,
    d_c: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Tensor<S>, LstmGateGrads<S>), NumError> {
    let hidden = params.hidden();
    let input_dim = params.input_dim();
    let batch = cache.concat_input.shape()[0];
    let one = S::one();
    let n = batch * hidden;

    let mut d_pre = [
        Tensor::zeros(&[batch, hidden]),
        Tensor::zeros(&[batch, hidden]),
        Tensor::zeros(&[batch, hidden]),
        Tensor::zeros(&[batch, hidden]),
    ];
    let mut d_c_prev = Tensor::zeros(&[batch, hidden]);

    for idx in 0..n {
        let i = cache.gate_i.data()[idx];
        let f = cache.gate_f.data()[idx];
        let g = cache.gate_g.data()[idx];
        let o = cache.gate_o.data()[idx];
        let tc = cache.tanh_c.data()[idx];
        let dh = d_h.data()[idx];
        let dc_up = d_c.data()[idx];

        let d_o = dh * tc;
        let dc_total = dc_up + dh * o * (one - tc * tc);
        let d_f = dc_total * cache.c_prev.data()[idx];
        let d_i = dc_total * g;
        let d_g = dc_total * i;
        d_c_prev.data_mut()[idx] = dc_total * f;

        d_pre[0].data_mut()[idx] = d_i * i * (one - i);
        d_pre[1].data_mut()[idx] = d_f * f * (one - f);
        d_pre[2].data_mut()[idx] = d_g * (one - g * g);
        d_pre[3].data_mut()[idx] = d_o * o * (one - o);
    }

    let concat_t = cache.concat_input.transpose2()?;
    let mut d_concat = Tensor::zeros(&[batch, input_dim + hidden]);
    let mut grads = LstmGateGrads::zeros_like(params);
    for g in 0..4 {
        d_concat.add_assign(&d_pre[g].matmul(&params.weights[g].transpose2()?)?)?;
        grads.weights[g] = concat_t.matmul(&d_pre[g])?;
        for row in d_pre[g].data().chunks(hidden) {
            for (b, &v) in grads.biases[g].data_mut().iter_mut().zip(row) {
                *b = *b + v;
            }
        }
    }

    let mut d_x = Tensor::zeros(&[batch, input_dim]);
    let mut d_h_prev = Tensor::zeros(&[batch, hidden]);
    for b in 0..batch {
        let src = &d_concat.data()[b * (input_dim + hidden)..(b + 1) * (input_dim + hidden)];
        d_x.data_mut()[b * input_dim..(b + 1) * input_dim].copy_from_slice(&src[..input_dim]);
        d_h_prev.data_mut()[b * hidden..(b + 1) * hidden].copy_from_slice(&src[input_dim..]);
    }
    Ok((d_x, d_h_prev, d_c_prev, grads))
}

/// Cache for one direction's unrolled pass.
#[derive(Debug, Clone)]
struct DirectionCache<S> {
    step_caches: Vec<LstmCellCache<S>>, // in processing order
    order: Vec<usize>,                  // time index processed at each step
}

/// Cache for the whole bidirectional layer.
#[derive(Debug, Clone)]
pub struct BilstmCache<S> {
    forward: DirectionCache<S>,
    backward: DirectionCache<S>,
    batch: usize,
    seq: usize,
    input_dim: usize,
    return_sequences: bool,
    recurrent_masks: Option<(Tensor<S>, Tensor<S>)>,
}

fn slice_time<S: Scalar>(input: &Tensor<S>, t: usize) -> Tensor<S> {
    let (batch, seq, dim) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let mut out = Tensor::zeros(&[batch, dim]);
    for b in 0..batch {
        let src = &input.data()[(b * seq + t) * dim..(b * seq + t + 1) * dim];
        out.data_mut()[b * dim..(b + 1) * dim].copy_from_slice(src);
    }
    out
}

fn run_direction<S: Scalar>(
    input: &Tensor<S>,
    params: &LstmGateParams<'_, S>,
    order: Vec<usize>,
    recurrent_mask: Option<&Tensor<S>>,
) -> Result<(Vec<Tensor<S>>, DirectionCache<S>), NumError> {
    let batch = input.shape()[0];
    let hidden = params.hidden();
    let mut h = Tensor::zeros(&[batch, hidden]);
    let mut c = Tensor::zeros(&[batch, hidden]);
    let mut hs_by_time = vec![Tensor::zeros(&[batch, hidden]); order.len()];
    let mut step_caches = Vec::with_capacity(order.len());
    for &t in &order {
        let x_t = slice_time(input, t);
        let h_in = match recurrent_mask {
            Some(mask) => h.hadamard(mask)?,
            None => h.clone(),
        };
        let (h_next, c_next, cache) = lstm_cell_forward(&x_t, &h_in, &c, params)?;
        hs_by_time[t] = h_next.clone();
        step_caches.push(cache);
        h = h_next;
        c = c_next;
    }
    Ok((hs_by_time, DirectionCache { step_caches, order }))
}

/// Bidirectional LSTM over `input: [batch, seq, in]`.
///
/// The forward LSTM reads left-to-right, the backward one reads the reversed
/// sequence; per-step hidden states are concatenated to feature size
/// 2·hidden. `return_sequences` selects [batch, seq, 2·hidden] vs the
/// concatenated final states [batch, 2·hidden]. `recurrent_masks`, when
/// given, are fixed per-sequence dropout masks applied to the hidden state
/// entering each direction's gate computations.
pub fn bilstm_forward<S: Scalar>(
    input: &Tensor<S>,
    params_fwd: &LstmGateParams<'_, S>,
    params_bwd: &LstmGateParams<'_, S>,
    return_sequences: bool,
    recurrent_masks: Option<(&Tensor<S>, &Tensor<S>)>,
) -> Result<(Tensor<S>, BilstmCache<S>), NumError> {
    if input.shape().len() != 3 {
        return Err(NumError::ShapeMismatch {
            context: "bilstm_forward",
            expected: vec![3],
            got: vec![input.shape().len()],
        });
    }
    let (batch, seq, input_dim) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let hidden = params_fwd.hidden();

    let (hs_fwd, cache_fwd) = run_direction(
        input,
        params_fwd,
        (0..seq).collect(),
        recurrent_masks.map(|(m, _)| m),
    )?;
    let (hs_bwd, cache_bwd) = run_direction(
        input,
        params_bwd,
        (0..seq).rev().collect(),
        recurrent_masks.map(|(_, m)| m),
    )?;

    let output = if return_sequences {
        let mut out = Tensor::zeros(&[batch, seq, 2 * hidden]);
        for t in 0..seq {
            for b in 0..batch {
                let dst =
                    &mut out.data_mut()[(b * seq + t) * 2 * hidden..(b * seq + t + 1) * 2 * hidden];
                dst[..hidden].copy_from_slice(&hs_fwd[t].data()[b * hidden..(b + 1) * hidden]);
                dst[hidden..].copy_from_slice(&hs_bwd[t].data()[b * hidden..(b + 1) * hidden]);
            }
        }
        out
    } else {
        // Final states: forward direction at time seq-1, backward at time 0.
        let mut out = Tensor::zeros(&[batch, 2 * hidden]);
        for b in 0..batch {
            let dst = &mut out.data_mut()[b * 2 * hidden..(b + 1) * 2 * hidden];
            dst[..hidden].copy_from_slice(&hs_fwd[seq - 1].data()[b * hidden..(b + 1) * hidden]);
            dst[hidden..].copy_from_slice(&hs_bwd[0].data()[b * hidden..(b + 1) * hidden]);
        }
        out
    };

    let cache = BilstmCache {
        forward: cache_fwd,
        backward: cache_bwd,
        batch,
        seq,
        input_dim,
        return_sequences,
        recurrent_masks: recurrent_masks.map(|(a, b)| (a.clone(), b.clone())),
    };
    Ok((output, cache))
}

#[allow(clippy::too_many_arguments)]
fn backprop_direction<S: Scalar>(
    cache: &DirectionCache<S>,
    params: &LstmGateParams<'_, S>,
    grad_output: &Tensor<S>,
    return_sequences: bool,
    half: usize, // 0 for forward direction, 1 for backward
    batch: usize,
    seq: usize,
    input_dim: usize,
    recurrent_mask: Option<&Tensor<S>>,
    d_input: &mut Tensor<S>,
) -> Result<LstmGateGrads<S>, NumError> {
    let hidden = params.hidden();
    let mut grads = LstmGateGrads::zeros_like(params);
    let mut d_h_carry = Tensor::zeros(&[batch, hidden]);
    let mut d_c_carry = Tensor::zeros(&[batch, hidden]);
    let last_step = cache.order.len() - 1;

    for step in (0..cache.order.len()).rev() {
        let t = cache.order[step];
        // Upstream gradient on this step's hidden output.
        let mut d_h = d_h_carry;
        if return_sequences {
            for b in 0..batch {
                let src = &grad_output.data()
                    [(b * seq + t) * 2 * hidden + half * hidden
                        ..(b * seq + t) * 2 * hidden + (half + 1) * hidden];
                let dst = &mut d_h.data_mut()[b * hidden..(b + 1) * hidden];
                for (d, &g) in dst.iter_mut().zip(src) {
                    *d = *d + g;
                }
            }
        } else if step == last_step {
            for b in 0..batch {
                let src = &grad_output.data()
                    [b * 2 * hidden + half * hidden..b * 2 * hidden + (half + 1) * hidden];
                let dst = &mut d_h.data_mut()[b * hidden..(b + 1) * hidden];
                for (d, &g) in dst.iter_mut().zip(src) {
                    *d = *d + g;
                }
            }
        }

        let (d_x, d_h_prev, d_c_prev, step_grads) =
            lstm_cell_backward(&cache.step_caches[step], params, &d_h, &d_c_carry)?;
        grads.accumulate(&step_grads)?;

        // The cell saw a masked hidden state; route the gradient through it.
        d_h_carry = match recurrent_mask {
            Some(mask) => d_h_prev.hadamard(mask)?,
            None => d_h_prev,
        };
        d_c_carry = d_c_prev;

        for b in 0..batch {
            let dst =
                &mut d_input.data_mut()[(b * seq + t) * input_dim..(b * seq + t + 1) * input_dim];
            let src = &d_x.data()[b * input_dim..(b + 1) * input_dim];
            for (d, &g) in dst.iter_mut().zip(src) {
                *d = *d + g;
            }
        }
    }
    Ok(grads)
}

/// Backpropagation through time for the bidirectional layer.
/// Returns (d_input, gate grads forward, gate grads backward).
pub fn bilstm_backward<S: Scalar>(
    cache: &BilstmCache<S>,
    params_fwd: &LstmGateParams<'_, S>,
    params_bwd: &LstmGateParams<'_, S>,
    grad_output: &Tensor<S>,
) -> Result<(Tensor<S>, LstmGateGrads<S>, LstmGateGrads<S>), NumError> {
    let mut d_input = Tensor::zeros(&[cache.batch, cache.seq, cache.input_dim]);
    let grads_fwd = backprop_direction(
        &cache.forward,
        params_fwd,
        grad_output,
        cache.return_sequences,
        0,
        cache.batch,
        cache.seq,
        cache.input_dim,
        cache.recurrent_masks.as_ref().map(|(m, _)| m),
        &mut d_input,
    )?;
    let grads_bwd = backprop_direction(
        &cache.backward,
        params_bwd,
        grad_output,
        cache.return_sequences,
        1,
        cache.batch,
        cache.seq,
        cache.input_dim,
        cache.recurrent_masks.as_ref().map(|(_, m)| m),
        &mut d_input,
    )?;
    Ok((d_input, grads_fwd, grads_bwd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn owned_params(input_dim: usize, hidden: usize, fill: f64) -> Vec<Tensor<f64>> {
        let mut v = Vec::new();
        for _ in 0..4 {
            v.push(Tensor::filled(&[input_dim + hidden, hidden], fill));
        }
        for _ in 0..4 {
            v.push(Tensor::filled(&[hidden], fill));
        }
        v
    }

    fn as_gate_params(owned: &[Tensor<f64>]) -> LstmGateParams<'_, f64> {
        LstmGateParams {
            weights: [&owned[0], &owned[1], &owned[2], &owned[3]],
            biases: [&owned[4], &owned[5], &owned[6], &owned[7]],
        }
    }

    #[test]
    fn zero_params_zero_state_gives_zero_outputs() {
        let owned = owned_params(3, 2, 0.0);
        let params = as_gate_params(&owned);
        let x = Tensor::filled(&[2, 3], 1.0);
        let h = Tensor::zeros(&[2, 2]);
        let c = Tensor::zeros(&[2, 2]);
        let (h_t, c_t, _) = lstm_cell_forward(&x, &h, &c, &params).unwrap();
        assert!(h_t.iter().all(|&v| v == 0.0));
        assert!(c_t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_carries_cell_state() {
        // Zero weights, forget bias 50 (sigmoid ≈ 1), input/output gates at
        // their zero-bias values: c_t ≈ c_prev.
        let mut owned = owned_params(2, 2, 0.0);
        owned[5] = Tensor::filled(&[2], 50.0);
        let params = as_gate_params(&owned);
        let x = Tensor::filled(&[1, 2], 0.3);
        let h = Tensor::zeros(&[1, 2]);
        let c = Tensor::from_vec(&[1, 2], vec![0.9, -1.4]).unwrap();
        let (_, c_t, _) = lstm_cell_forward(&x, &h, &c, &params).unwrap();
        for (got, want) in c_t.iter().zip(c.iter()) {
            assert!((got - want).abs() < 1e-9, "cell state not carried");
        }
    }

    #[test]
    fn bilstm_output_feature_size_doubles_hidden() {
        let owned_f = owned_params(3, 4, 0.01);
        let owned_b = owned_params(3, 4, 0.02);
        let pf = as_gate_params(&owned_f);
        let pb = as_gate_params(&owned_b);
        let x = Tensor::filled(&[2, 5, 3], 0.5);
        let (seq_out, _) = bilstm_forward(&x, &pf, &pb, true, None).unwrap();
        assert_eq!(seq_out.shape(), &[2, 5, 8]);
        let (final_out, _) = bilstm_forward(&x, &pf, &pb, false, None).unwrap();
        assert_eq!(final_out.shape(), &[2, 8]);
    }

    #[test]
    fn palindrome_with_tied_params_gives_symmetric_final_state() {
        let owned = owned_params(2, 3, 0.07);
        let params = as_gate_params(&owned);
        // Palindromic along time.
        let x = Tensor::from_vec(
            &[1, 3, 2],
            vec![0.1, 0.9, -0.4, 0.2, 0.1, 0.9],
        )
        .unwrap();
        let (out, _) = bilstm_forward(&x, &params, &params, false, None).unwrap();
        let (fwd_half, bwd_half) = out.data().split_at(3);
        for (a, b) in fwd_half.iter().zip(bwd_half) {
            assert!((a - b).abs() < 1e-12, "directions disagree on palindrome");
        }
    }
}
