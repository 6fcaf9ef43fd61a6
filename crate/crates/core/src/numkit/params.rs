//! Named parameter storage and the Adam optimizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{NumError, Tensor};

/// Named parameter tensors with matching gradient accumulators.
///
/// Names are unique; iteration order is insertion order, which makes
/// optimizer sweeps and serialization deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSet<S> {
    names: Vec<String>,
    params: Vec<Tensor<S>>,
    grads: Vec<Tensor<S>>,
    index: BTreeMap<String, usize>,
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            params: Vec::new(),
            grads: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<S>) {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.grads.push(Tensor::zeros(tensor.shape()));
        self.params.push(tensor);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> &Tensor<S> {
        let i = self.index[name];
        &self.params[i]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<S> {
        let i = self.index[name];
        &mut self.params[i]
    }

    pub fn grad(&self, name: &str) -> &Tensor<S> {
        let i = self.index[name];
        &self.grads[i]
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut Tensor<S> {
        let i = self.index[name];
        &mut self.grads[i]
    }

    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor<S>) -> Result<(), NumError> {
        self.grad_mut(name).add_assign(delta)
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            for v in g.data_mut() {
                *v = S::zero();
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>, &Tensor<S>)> {
        self.names
            .iter()
            .zip(self.params.iter().zip(self.grads.iter()))
            .map(|(n, (p, g))| (n.as_str(), p, g))
    }

    /// Mutable sweep over (name, param, grad) triples in insertion order.
    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>, &mut Tensor<S>)> {
        self.names
            .iter()
            .zip(self.params.iter_mut().zip(self.grads.iter_mut()))
            .map(|(n, (p, g))| (n.as_str(), p, g))
    }
}

/// Adam optimizer state: per-parameter moment estimates plus step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    step: u64,
    first_moment: BTreeMap<String, Tensor<S>>,
    second_moment: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(learning_rate: S) -> Self {
        AdamState {
            learning_rate,
            beta1: S::from_f64_lossy(0.9),
            beta2: S::from_f64_lossy(0.999),
            epsilon: S::from_f64_lossy(1e-8),
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

impl<S: Scalar> Default for AdamState<S> {
    fn default() -> Self {
        Self::new(S::from_f64_lossy(1e-3))
    }
}

/// One Adam update with bias correction over every parameter in the set.
pub fn adam_step<S: Scalar>(params: &mut ParamSet<S>, state: &mut AdamState<S>) {
    state.step += 1;
    let t = state.step as i32;
    let one = S::one();
    let bias1 = one - state.beta1.powi(t);
    let bias2 = one - state.beta2.powi(t);
    for (name, param, grad) in params.iter_mut() {
        let m = state
            .first_moment
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(param.shape()));
        let v = state
            .second_moment
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(param.shape()));
        let (b1, b2) = (state.beta1, state.beta2);
        for ((w, &g), (mi, vi)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            *mi = b1 * *mi + (one - b1) * g;
            *vi = b2 * *vi + (one - b2) * g * g;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *w = *w - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: f64) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::from_vec(&[1], vec![value]).unwrap());
        ps
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut ps = single_param(0.7);
        let mut state = AdamState::default();
        adam_step(&mut ps, &mut state);
        assert_eq!(ps.get("w").data()[0], 0.7);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        // Adam's unit-step property: |Δw| → lr under a constant gradient.
        let mut ps = single_param(0.0);
        let mut state = AdamState::new(1e-3);
        let mut last = 0.0f64;
        let mut prev_w = 0.0f64;
        for _ in 0..1000 {
            ps.grad_mut("w").data_mut()[0] = 2.5;
            adam_step(&mut ps, &mut state);
            let w = ps.get("w").data()[0];
            last = (w - prev_w).abs();
            prev_w = w;
        }
        assert!(
            (last - 1e-3).abs() / 1e-3 < 0.05,
            "step magnitude {last} not within 5% of lr"
        );
    }

    #[test]
    fn converges_on_quadratic_bowl() {
        // f(w) = w^2, gradient 2w, starting at w = 1. At lr 1e-3 Adam needs
        // ~2800 steps to cross 1e-3; lr 2e-3 fits the 2000-step budget.
        let mut ps = single_param(1.0);
        let mut state = AdamState::new(2e-3);
        for _ in 0..2000 {
            let w = ps.get("w").data()[0];
            ps.grad_mut("w").data_mut()[0] = 2.0 * w;
            adam_step(&mut ps, &mut state);
        }
        assert!(ps.get("w").data()[0].abs() < 1e-3);
    }

    #[test]
    fn duplicate_name_panics() {
        let result = std::panic::catch_unwind(|| {
            let mut ps = ParamSet::<f64>::new();
            ps.insert("w", Tensor::zeros(&[1]));
            ps.insert("w", Tensor::zeros(&[1]));
        });
        assert!(result.is_err());
    }
}
