//! Finite-difference gradient checking.

use crate::scalar::Scalar;

use super::{NumError, ParamSet};

/// A model fragment exposing a scalar loss over its parameters.
///
/// `loss` runs forward only; `loss_and_grads` additionally populates the
/// gradients in `params`. Inputs are part of the fragment's state.
pub trait LossFragment<S: Scalar> {
    fn loss(&mut self) -> Result<S, NumError>;
    fn loss_and_grads(&mut self) -> Result<S, NumError>;
    fn params(&mut self) -> &mut ParamSet<S>;
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_coordinate: usize,
    pub coordinates_checked: usize,
}

/// Central finite differences per parameter coordinate, compared against the
/// analytic gradients. Relative error per coordinate is
/// |analytic − numeric| / max(1, |analytic|, |numeric|).
pub fn finite_difference_check<S: Scalar>(
    fragment: &mut impl LossFragment<S>,
    epsilon: f64,
) -> Result<GradCheckReport, NumError> {
    let eps = S::from_f64_lossy(epsilon);
    fragment.params().zero_grads();
    let base = fragment.loss_and_grads()?;
    if !base.is_finite() {
        return Err(NumError::NonFiniteLoss);
    }

    let analytic: Vec<(String, Vec<S>)> = fragment
        .params()
        .iter()
        .map(|(name, _, grad)| (name.to_string(), grad.data().to_vec()))
        .collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_coordinate: 0,
        coordinates_checked: 0,
    };

    for (name, grads) in &analytic {
        for (coord, &a) in grads.iter().enumerate() {
            let original = fragment.params().get(name).data()[coord];
            fragment.params().get_mut(name).data_mut()[coord] = original + eps;
            let plus = fragment.loss()?;
            fragment.params().get_mut(name).data_mut()[coord] = original - eps;
            let minus = fragment.loss()?;
            fragment.params().get_mut(name).data_mut()[coord] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumError::NonFiniteLoss);
            }
            let numeric = (plus - minus) / (S::from_f64_lossy(2.0) * eps);
            let a64 = a.to_f64().unwrap_or(f64::NAN);
            let n64 = numeric.to_f64().unwrap_or(f64::NAN);
            let rel = (a64 - n64).abs() / 1.0f64.max(a64.abs()).max(n64.abs());
            report.coordinates_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_param = name.clone();
                report.worst_coordinate = coord;
            }
        }
    }
    Ok(report)
}
