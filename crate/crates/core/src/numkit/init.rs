//! Seeded weight initialization.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use crate::scalar::Scalar;

use super::Tensor;

/// Uniform init on [low, high), drawn in f64 then converted, so f32 and f64
/// runs see the same underlying stream.
pub fn uniform_init<S: Scalar, R: Rng>(shape: &[usize], low: f64, high: f64, rng: &mut R) -> Tensor<S> {
    let dist = Uniform::new(low, high);
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| S::from_f64_lossy(dist.sample(rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape by construction")
}

/// Glorot/Xavier uniform for a weight of shape [fan_in, fan_out, ..].
///
/// fan_in and fan_out are taken from the first and last axes; for conv
/// filters [k, in, out] the receptive field is folded into fan_in.
pub fn glorot_uniform<S: Scalar, R: Rng>(shape: &[usize], rng: &mut R) -> Tensor<S> {
    let (fan_in, fan_out) = match shape.len() {
        2 => (shape[0], shape[1]),
        3 => (shape[0] * shape[1], shape[2]),
        _ => (shape[0], shape[shape.len() - 1]),
    };
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform_init(shape, -limit, limit, rng)
}
