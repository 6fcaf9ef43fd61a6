//! Classification heads: softmax + categorical cross-entropy and
//! sigmoid + binary cross-entropy.

use crate::scalar::Scalar;

use super::{NumError, Tensor};

/// Numerically stable row-wise softmax for logits `[batch, classes]`.
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    let classes = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(classes) {
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        let mut sum = S::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Mean categorical cross-entropy. Returns (probabilities, loss).
pub fn softmax_ce_loss<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[usize],
) -> Result<(Tensor<S>, S), NumError> {
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != batch {
        return Err(NumError::ShapeMismatch {
            context: "softmax_ce_loss",
            expected: vec![batch],
            got: vec![labels.len()],
        });
    }
    let probs = softmax(logits);
    let mut loss = S::zero();
    for (b, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(NumError::LabelOutOfRange { label, classes });
        }
        loss = loss - probs.at2(b, label).max(S::from_f64_lossy(1e-300)).ln();
    }
    Ok((probs, loss / S::from_f64_lossy(batch as f64)))
}

/// Combined softmax + cross-entropy backward: (p − onehot)/batch.
pub fn softmax_ce_backward<S: Scalar>(probs: &Tensor<S>, labels: &[usize]) -> Tensor<S> {
    let (batch, _classes) = (probs.shape()[0], probs.shape()[1]);
    let scale = S::one() / S::from_f64_lossy(batch as f64);
    let mut d = probs.clone();
    for (b, &label) in labels.iter().enumerate() {
        let slot = d.at2_mut(b, label);
        *slot = *slot - S::one();
    }
    d.scale(scale);
    d
}

pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Mean binary cross-entropy over logits `[batch, 1]` with 0/1 labels.
/// Returns (probabilities, loss).
pub fn sigmoid_bce_loss<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[usize],
) -> Result<(Tensor<S>, S), NumError> {
    let batch = logits.shape()[0];
    if logits.shape().len() != 2 || logits.shape()[1] != 1 || labels.len() != batch {
        return Err(NumError::ShapeMismatch {
            context: "sigmoid_bce_loss",
            expected: vec![batch, 1],
            got: logits.shape().to_vec(),
        });
    }
    let probs = logits.map(sigmoid);
    let eps = S::from_f64_lossy(1e-300);
    let mut loss = S::zero();
    for (b, &label) in labels.iter().enumerate() {
        if label > 1 {
            return Err(NumError::LabelOutOfRange { label, classes: 2 });
        }
        let p = probs.data()[b];
        loss = loss
            - if label == 1 {
                p.max(eps).ln()
            } else {
                (S::one() - p).max(eps).ln()
            };
    }
    Ok((probs, loss / S::from_f64_lossy(batch as f64)))
}

/// Combined sigmoid + BCE backward on the logits: (p − y)/batch.
pub fn sigmoid_bce_backward<S: Scalar>(probs: &Tensor<S>, labels: &[usize]) -> Tensor<S> {
    let batch = probs.shape()[0];
    let scale = S::one() / S::from_f64_lossy(batch as f64);
    let mut d = probs.clone();
    for (b, &label) in labels.iter().enumerate() {
        let v = d.data()[b] - S::from_f64_lossy(label as f64);
        d.data_mut()[b] = v * scale;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_uniform_probabilities() {
        let logits = Tensor::zeros(&[1, 3]);
        let p = softmax::<f64>(&logits);
        for &v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Tensor::from_vec(&[2, 3], vec![5.0, -2.0, 0.3, 100.0, 99.0, 98.0]).unwrap();
        let p = softmax::<f64>(&logits);
        for row in p.rows() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn perfect_prediction_loss_approaches_zero() {
        let logits = Tensor::from_vec(&[1, 3], vec![100.0, 0.0, 0.0]).unwrap();
        let (_, loss) = softmax_ce_loss(&logits, &[0]).unwrap();
        assert!(loss < 1e-9);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let logits = Tensor::<f64>::zeros(&[1, 3]);
        assert!(softmax_ce_loss(&logits, &[3]).is_err());
    }
}
