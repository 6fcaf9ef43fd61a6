//! Shared forward and backward passes for both architectures.

use crate::numkit::{
    bilstm_backward, bilstm_forward, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, embedding_backward, embedding_forward, global_max_pool_backward,
    global_max_pool_forward, sigmoid_bce_backward, sigmoid_bce_loss, softmax_ce_backward,
    softmax_ce_loss, Activation, BilstmCache, Conv1dCache, DenseCache, LstmGateGrads,
    LstmGateParams, NumError, ParamSet, PoolCache, Tensor, GATE_NAMES,
};
use crate::scalar::Scalar;

use super::{ArchitectureConfig, HeadKind};

/// Per-batch dropout masks for the LSTM architecture. The CNN trains
/// without dropout.
#[derive(Debug, Clone)]
pub(super) struct Masks<S> {
    /// Inverted-dropout mask on the second BiLSTM's input sequence.
    pub input: Option<Tensor<S>>,
    /// Per-sequence recurrent masks on each direction's hidden state.
    pub rec_fwd: Option<Tensor<S>>,
    pub rec_bwd: Option<Tensor<S>>,
}

impl<S> Masks<S> {
    pub fn none() -> Self {
        Masks {
            input: None,
            rec_fwd: None,
            rec_bwd: None,
        }
    }
}

pub(super) enum Caches<S> {
    Lstm {
        cache1: BilstmCache<S>,
        input_mask: Option<Tensor<S>>,
        cache2: BilstmCache<S>,
        dense: DenseCache<S>,
        head: DenseCache<S>,
    },
    Cnn {
        conv1: Conv1dCache<S>,
        conv2: Conv1dCache<S>,
        pool: PoolCache,
        dense: DenseCache<S>,
        head: DenseCache<S>,
    },
}

fn gate_params<'a, S: Scalar>(
    params: &'a ParamSet<S>,
    layer: usize,
    dir: &str,
) -> LstmGateParams<'a, S> {
    LstmGateParams {
        weights: std::array::from_fn(|g| {
            params.get(&format!("bilstm{layer}.{dir}.w.{}", GATE_NAMES[g]))
        }),
        biases: std::array::from_fn(|g| {
            params.get(&format!("bilstm{layer}.{dir}.b.{}", GATE_NAMES[g]))
        }),
    }
}

fn accumulate_gate_grads<S: Scalar>(
    params: &mut ParamSet<S>,
    layer: usize,
    dir: &str,
    grads: &LstmGateGrads<S>,
) -> Result<(), NumError> {
    for (g, gate) in GATE_NAMES.iter().enumerate() {
        params.accumulate_grad(&format!("bilstm{layer}.{dir}.w.{gate}"), &grads.weights[g])?;
        params.accumulate_grad(&format!("bilstm{layer}.{dir}.b.{gate}"), &grads.biases[g])?;
    }
    Ok(())
}

/// Forward pass to head logits. `masks` carries training-time dropout; pass
/// `None` for inference.
pub(super) fn logits<S: Scalar>(
    arch: &ArchitectureConfig,
    params: &ParamSet<S>,
    indices: &[usize],
    batch: usize,
    masks: Option<&Masks<S>>,
) -> Result<(Tensor<S>, Caches<S>), NumError> {
    match arch {
        ArchitectureConfig::Lstm(cfg) => {
            let emb = embedding_forward(indices, batch, cfg.seq_len, params.get("embedding"))?;
            let p1f = gate_params(params, 1, "fwd");
            let p1b = gate_params(params, 1, "bwd");
            let (h1, cache1) = bilstm_forward(&emb, &p1f, &p1b, true, None)?;
            let input_mask = masks.and_then(|m| m.input.clone());
            let x2 = match &input_mask {
                Some(mask) => h1.hadamard(mask)?,
                None => h1,
            };
            let p2f = gate_params(params, 2, "fwd");
            let p2b = gate_params(params, 2, "bwd");
            let rec = masks.and_then(|m| {
                m.rec_fwd
                    .as_ref()
                    .zip(m.rec_bwd.as_ref())
            });
            let (h2, cache2) = bilstm_forward(&x2, &p2f, &p2b, false, rec)?;
            let (d_out, dense) =
                dense_forward(&h2, params.get("dense.w"), params.get("dense.b"), Activation::Relu)?;
            let (out, head) = dense_forward(
                &d_out,
                params.get("head.w"),
                params.get("head.b"),
                Activation::Linear,
            )?;
            Ok((
                out,
                Caches::Lstm {
                    cache1,
                    input_mask,
                    cache2,
                    dense,
                    head,
                },
            ))
        }
        ArchitectureConfig::Cnn(cfg) => {
            let emb = embedding_forward(indices, batch, cfg.seq_len, params.get("embedding"))?;
            let (c1, conv1) = conv1d_forward(
                &emb,
                params.get("conv1.w"),
                params.get("conv1.b"),
                cfg.conv1.stride,
                Activation::Relu,
            )?;
            let (c2, conv2) = conv1d_forward(
                &c1,
                params.get("conv2.w"),
                params.get("conv2.b"),
                cfg.conv2.stride,
                Activation::Relu,
            )?;
            let (pooled, pool) = global_max_pool_forward(&c2)?;
            let (d_out, dense) = dense_forward(
                &pooled,
                params.get("dense.w"),
                params.get("dense.b"),
                Activation::Relu,
            )?;
            let (out, head) = dense_forward(
                &d_out,
                params.get("head.w"),
                params.get("head.b"),
                Activation::Linear,
            )?;
            Ok((
                out,
                Caches::Cnn {
                    conv1,
                    conv2,
                    pool,
                    dense,
                    head,
                },
            ))
        }
    }
}

/// Head loss. Returns the probability tensor needed by the backward pass
/// and the scalar loss.
pub(super) fn head_loss<S: Scalar>(
    head: HeadKind,
    logits: &Tensor<S>,
    labels: &[usize],
) -> Result<(Tensor<S>, S), NumError> {
    match head {
        HeadKind::Softmax { .. } => softmax_ce_loss(logits, labels),
        HeadKind::Sigmoid => sigmoid_bce_loss(logits, labels),
    }
}

pub(super) fn head_backward<S: Scalar>(
    head: HeadKind,
    probs: &Tensor<S>,
    labels: &[usize],
) -> Tensor<S> {
    match head {
        HeadKind::Softmax { .. } => softmax_ce_backward(probs, labels),
        HeadKind::Sigmoid => sigmoid_bce_backward(probs, labels),
    }
}

/// Backpropagates `d_logits` through the whole network, accumulating
/// parameter gradients in `params`.
pub(super) fn backward<S: Scalar>(
    arch: &ArchitectureConfig,
    params: &mut ParamSet<S>,
    indices: &[usize],
    caches: &Caches<S>,
    d_logits: &Tensor<S>,
) -> Result<(), NumError> {
    match (arch, caches) {
        (
            ArchitectureConfig::Lstm(_),
            Caches::Lstm {
                cache1,
                input_mask,
                cache2,
                dense,
                head,
            },
        ) => {
            let (g2f, g2b, g1f, g1b, d_table, d_grads) = {
                let p = &*params;
                let (d_dense_out, d_hw, d_hb) = dense_backward(head, p.get("head.w"), d_logits)?;
                let (d_h2, d_dw, d_db) = dense_backward(dense, p.get("dense.w"), &d_dense_out)?;
                let p2f = gate_params(p, 2, "fwd");
                let p2b = gate_params(p, 2, "bwd");
                let (d_x2, g2f, g2b) = bilstm_backward(cache2, &p2f, &p2b, &d_h2)?;
                let d_h1 = match input_mask {
                    Some(mask) => d_x2.hadamard(mask)?,
                    None => d_x2,
                };
                let p1f = gate_params(p, 1, "fwd");
                let p1b = gate_params(p, 1, "bwd");
                let (d_emb, g1f, g1b) = bilstm_backward(cache1, &p1f, &p1b, &d_h1)?;
                let d_table = embedding_backward(indices, p.get("embedding").shape(), &d_emb)?;
                (g2f, g2b, g1f, g1b, d_table, (d_hw, d_hb, d_dw, d_db))
            };
            let (d_hw, d_hb, d_dw, d_db) = d_grads;
            params.accumulate_grad("head.w", &d_hw)?;
            params.accumulate_grad("head.b", &d_hb)?;
            params.accumulate_grad("dense.w", &d_dw)?;
            params.accumulate_grad("dense.b", &d_db)?;
            accumulate_gate_grads(params, 2, "fwd", &g2f)?;
            accumulate_gate_grads(params, 2, "bwd", &g2b)?;
            accumulate_gate_grads(params, 1, "fwd", &g1f)?;
            accumulate_gate_grads(params, 1, "bwd", &g1b)?;
            params.accumulate_grad("embedding", &d_table)?;
            Ok(())
        }
        (
            ArchitectureConfig::Cnn(_),
            Caches::Cnn {
                conv1,
                conv2,
                pool,
                dense,
                head,
            },
        ) => {
            let grads = {
                let p = &*params;
                let (d_dense_out, d_hw, d_hb) = dense_backward(head, p.get("head.w"), d_logits)?;
                let (d_pooled, d_dw, d_db) = dense_backward(dense, p.get("dense.w"), &d_dense_out)?;
                let d_c2 = global_max_pool_backward(pool, &d_pooled)?;
                let (d_c1, d_f2, d_b2) = conv1d_backward(conv2, p.get("conv2.w"), &d_c2)?;
                let (d_emb, d_f1, d_b1) = conv1d_backward(conv1, p.get("conv1.w"), &d_c1)?;
                let d_table = embedding_backward(indices, p.get("embedding").shape(), &d_emb)?;
                (d_hw, d_hb, d_dw, d_db, d_f2, d_b2, d_f1, d_b1, d_table)
            };
            let (d_hw, d_hb, d_dw, d_db, d_f2, d_b2, d_f1, d_b1, d_table) = grads;
            params.accumulate_grad("head.w", &d_hw)?;
            params.accumulate_grad("head.b", &d_hb)?;
            params.accumulate_grad("dense.w", &d_dw)?;
            params.accumulate_grad("dense.b", &d_db)?;
            params.accumulate_grad("conv2.w", &d_f2)?;
            params.accumulate_grad("conv2.b", &d_b2)?;
            params.accumulate_grad("conv1.w", &d_f1)?;
            params.accumulate_grad("conv1.b", &d_b1)?;
            params.accumulate_grad("embedding", &d_table)?;
            Ok(())
        }
        _ => unreachable!("cache variant always matches the architecture"),
    }
}

/// Mean loss on one batch, with gradients accumulated when `grads` is true.
pub(super) fn batch_loss<S: Scalar>(
    arch: &ArchitectureConfig,
    params: &mut ParamSet<S>,
    indices: &[usize],
    batch: usize,
    labels: &[usize],
    masks: Option<&Masks<S>>,
    grads: bool,
) -> Result<S, NumError> {
    let (out, caches) = logits(arch, &*params, indices, batch, masks)?;
    let (probs, loss) = head_loss(arch.head(), &out, labels)?;
    if grads {
        let d_logits = head_backward(arch.head(), &probs, labels);
        backward(arch, params, indices, &caches, &d_logits)?;
    }
    Ok(loss)
}
