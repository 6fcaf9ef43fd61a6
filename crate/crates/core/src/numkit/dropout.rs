//! Inverted dropout.

use rand::Rng;

use crate::scalar::Scalar;

use super::{NumError, Tensor};

/// Samples an inverted-dropout mask: each element is 0 with probability
/// `rate` and 1/(1 − rate) otherwise. Applying the mask at training time
/// preserves the activation mean; inference skips masking entirely.
pub fn dropout_mask<S: Scalar, R: Rng>(
    shape: &[usize],
    rate: f64,
    rng: &mut R,
) -> Result<Tensor<S>, NumError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumError::InvalidDropoutRate(rate));
    }
    let keep = S::from_f64_lossy(1.0 / (1.0 - rate));
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                S::zero()
            } else {
                keep
            }
        })
        .collect();
    Ok(Tensor::from_vec(shape, data).expect("length matches shape"))
}

/// Elementwise application of a dropout mask; `training = false` is the
/// identity regardless of the mask.
pub fn apply_mask<S: Scalar>(
    input: &Tensor<S>,
    mask: &Tensor<S>,
    training: bool,
) -> Result<Tensor<S>, NumError> {
    if !training {
        return Ok(input.clone());
    }
    input.hadamard(mask)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask: Tensor<f64> = dropout_mask(&[10], 0.0, &mut rng).unwrap();
        assert!(mask.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn inference_mode_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mask: Tensor<f64> = dropout_mask(&[10], 0.9, &mut rng).unwrap();
        let x = Tensor::filled(&[10], 2.0);
        assert_eq!(apply_mask(&x, &mask, false).unwrap(), x);
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(dropout_mask::<f64, _>(&[4], 1.0, &mut rng).is_err());
    }

    #[test]
    fn survival_fraction_and_mean_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mask: Tensor<f64> = dropout_mask(&[n], 0.2, &mut rng).unwrap();
        let surviving = mask.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((surviving - 0.8).abs() < 0.01, "survival {surviving}");
        let x = Tensor::filled(&[n], 1.0);
        let y = apply_mask(&x, &mask, true).unwrap();
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }
}
