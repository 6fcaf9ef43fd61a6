//! Classical baselines over bag-of-n-grams features: generalized linear
//! model, k-nearest neighbors, random forest, linear SVM and a shallow
//! neural network, behind one train/predict interface.

mod forest;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::{
    adam_step, dense_backward, dense_forward, glorot_uniform, softmax_ce_backward,
    softmax_ce_loss, Activation, AdamState, NumError, ParamSet, Tensor,
};
use crate::preprocess::FeatureVector;

pub use forest::{DecisionTree, TreeNode};

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains a single class")]
    SingleClass,
    #[error("feature/label length mismatch: {features} features, {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassicalModelKind {
    GeneralizedLinear,
    KNearest,
    RandomForest,
    SupportVector,
    ShallowNeuralNet,
}

impl ClassicalModelKind {
    pub const ALL: [ClassicalModelKind; 5] = [
        ClassicalModelKind::GeneralizedLinear,
        ClassicalModelKind::KNearest,
        ClassicalModelKind::RandomForest,
        ClassicalModelKind::SupportVector,
        ClassicalModelKind::ShallowNeuralNet,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            ClassicalModelKind::GeneralizedLinear => "Generalized Linear Regression",
            ClassicalModelKind::KNearest => "K-Nearest Neighbor",
            ClassicalModelKind::RandomForest => "Random Forest",
            ClassicalModelKind::SupportVector => "Support Vector Machine",
            ClassicalModelKind::ShallowNeuralNet => "Shallow Neural Network",
        }
    }
}

/// Hyperparameters for one baseline. The paper reports no classical
/// hyperparameters; these defaults are assumptions, all overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub kind: ClassicalModelKind,
    /// Bag-of-n-grams order the features were built with (1, 2 or 3).
    pub ngram_order: usize,
    /// Neighbor count for k-NN.
    pub k: usize,
    /// Tree count for the random forest.
    pub tree_count: usize,
    /// Depth cap for forest trees; `None` grows until pure.
    pub max_depth: Option<usize>,
    /// L2 regularization strength for GLM and SVM.
    pub l2: f64,
    /// Hidden width of the shallow network.
    pub hidden_width: usize,
    pub seed: u64,
}

impl ClassicalConfig {
    pub fn new(kind: ClassicalModelKind, ngram_order: usize, seed: u64) -> Self {
        ClassicalConfig {
            kind,
            ngram_order,
            k: 5,
            tree_count: 100,
            max_depth: None,
            l2: 1.0,
            hidden_width: 64,
            seed,
        }
    }

    fn validate(&self) -> Result<(), ClassicalError> {
        if !(1..=3).contains(&self.ngram_order) {
            return Err(ClassicalError::InvalidConfig(format!(
                "ngram order {} outside 1..=3",
                self.ngram_order
            )));
        }
        if self.k == 0 || self.tree_count == 0 || self.hidden_width == 0 {
            return Err(ClassicalError::InvalidConfig(
                "k, tree_count and hidden_width must be positive".into(),
            ));
        }
        if self.l2 < 0.0 {
            return Err(ClassicalError::InvalidConfig("l2 must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ModelState {
    Linear {
        // weights: [dim, classes], bias: [classes]
        weights: Tensor<f64>,
        bias: Tensor<f64>,
    },
    Knn {
        // L2-normalized training vectors in input order.
        vectors: Vec<FeatureVector>,
        labels: Vec<usize>,
    },
    Forest {
        trees: Vec<DecisionTree>,
    },
    Snn {
        w1: Tensor<f64>,
        b1: Tensor<f64>,
        w2: Tensor<f64>,
        b2: Tensor<f64>,
    },
}

/// A trained baseline: frozen feature dimension, class count and learned
/// state. Predicts only classes observed in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub config: ClassicalConfig,
    pub feature_dimension: usize,
    pub class_count: usize,
    observed: Vec<bool>,
    state: ModelState,
}

impl ClassicalModel {
    pub fn kind(&self) -> ClassicalModelKind {
        self.config.kind
    }
}

/// Predicted class plus per-class scores (probabilities for GLM and the
/// shallow net, vote fractions for k-NN and the forest, margins for SVM).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPrediction {
    pub class: usize,
    pub scores: Vec<f64>,
}

fn dense_matrix(features: &[FeatureVector], dimension: usize) -> Tensor<f64> {
    let mut data = vec![0.0; features.len() * dimension];
    for (i, fv) in features.iter().enumerate() {
        for (&j, &v) in &fv.counts {
            data[i * dimension + j] = v;
        }
    }
    Tensor::from_vec(&[features.len(), dimension], data).expect("consistent dimensions")
}

fn dense_row(fv: &FeatureVector) -> Tensor<f64> {
    dense_matrix(std::slice::from_ref(fv), fv.dimension)
}

/// Highest-scoring observed class; ties break toward the lowest index.
fn argmax_observed(scores: &[f64], observed: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (c, &s) in scores.iter().enumerate() {
        if observed[c] && s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

pub fn train_classical(
    features: &[FeatureVector],
    labels: &[usize],
    config: &ClassicalConfig,
) -> Result<ClassicalModel, ClassicalError> {
    config.validate()?;
    if features.is_empty() {
        return Err(ClassicalError::EmptyTrainingSet);
    }
    if features.len() != labels.len() {
        return Err(ClassicalError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let dimension = features[0].dimension;
    for fv in features {
        if fv.dimension != dimension {
            return Err(ClassicalError::DimensionMismatch {
                expected: dimension,
                got: fv.dimension,
            });
        }
    }
    let class_count = labels.iter().max().unwrap() + 1;
    let mut observed = vec![false; class_count];
    for &l in labels {
        observed[l] = true;
    }
    if observed.iter().filter(|&&o| o).count() < 2 {
        return Err(ClassicalError::SingleClass);
    }

    let state = match config.kind {
        ClassicalModelKind::GeneralizedLinear => train_glm(features, labels, class_count, config)?,
        ClassicalModelKind::KNearest => train_knn(features, labels),
        ClassicalModelKind::RandomForest => {
            forest::train_forest(features, labels, class_count, config)
        }
        ClassicalModelKind::SupportVector => train_svm(features, labels, class_count, config),
        ClassicalModelKind::ShallowNeuralNet => train_snn(features, labels, class_count, config)?,
    };
    Ok(ClassicalModel {
        config: *config,
        feature_dimension: dimension,
        class_count,
        observed,
        state,
    })
}

pub fn predict_classical(
    model: &ClassicalModel,
    features: &FeatureVector,
) -> Result<ClassicalPrediction, ClassicalError> {
    if features.dimension != model.feature_dimension {
        return Err(ClassicalError::DimensionMismatch {
            expected: model.feature_dimension,
            got: features.dimension,
        });
    }
    let scores = match &model.state {
        ModelState::Linear { weights, bias } => {
            let logits = linear_logits(features, weights, bias);
            if model.config.kind == ClassicalModelKind::GeneralizedLinear {
                softmax_row(&logits)
            } else {
                logits
            }
        }
        ModelState::Knn { vectors, labels } => {
            knn_scores(features, vectors, labels, model.class_count, model.config.k)
        }
        ModelState::Forest { trees } => {
            let mut votes = vec![0.0; model.class_count];
            for tree in trees {
                votes[tree.predict(features)] += 1.0;
            }
            for v in &mut votes {
                *v /= trees.len() as f64;
            }
            votes
        }
        ModelState::Snn { w1, b1, w2, b2 } => {
            let x = dense_row(features);
            let (h, _) = dense_forward(&x, w1, b1, Activation::Relu)?;
            let (logits, _) = dense_forward(&h, w2, b2, Activation::Linear)?;
            softmax_row(&logits.into_data())
        }
    };
    let class = argmax_observed(&scores, &model.observed);
    Ok(ClassicalPrediction { class, scores })
}

fn linear_logits(fv: &FeatureVector, weights: &Tensor<f64>, bias: &Tensor<f64>) -> Vec<f64> {
    let classes = bias.len();
    let mut logits = bias.data().to_vec();
    for (&j, &v) in &fv.counts {
        for (c, logit) in logits.iter_mut().enumerate().take(classes) {
            *logit += v * weights.at2(j, c);
        }
    }
    logits
}

fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Multinomial logistic regression with L2 penalty, full-batch Adam, run to
/// loss-change tolerance 1e-6 or 1000 iterations.
fn train_glm(
    features: &[FeatureVector],
    labels: &[usize],
    class_count: usize,
    config: &ClassicalConfig,
) -> Result<ModelState, ClassicalError> {
    let dimension = features[0].dimension;
    let n = features.len() as f64;
    let x = dense_matrix(features, dimension);
    let mut params = ParamSet::new();
    params.insert("weights", Tensor::zeros(&[dimension, class_count]));
    params.insert("bias", Tensor::zeros(&[class_count]));
    let mut adam = AdamState::new(0.1);
    let mut prev_loss = f64::INFINITY;
    for _ in 0..1000 {
        let (logits, _) = dense_forward(&x, params.get("weights"), params.get("bias"), Activation::Linear)?;
        let (probs, ce) = softmax_ce_loss(&logits, labels)?;
        let penalty: f64 = params.get("weights").iter().map(|&w| w * w).sum::<f64>()
            * (config.l2 / (2.0 * n));
        let loss = ce + penalty;
        let d_logits = softmax_ce_backward(&probs, labels);
        let xt = x.transpose2()?;
        let mut d_w = xt.matmul(&d_logits)?;
        let mut reg = params.get("weights").clone();
        reg.scale(config.l2 / n);
        d_w.add_assign(&reg)?;
        let mut d_b = Tensor::zeros(&[class_count]);
        for row in d_logits.rows() {
            for (b, &g) in d_b.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
        params.zero_grads();
        params.accumulate_grad("weights", &d_w)?;
        params.accumulate_grad("bias", &d_b)?;
        adam_step(&mut params, &mut adam);
        if (prev_loss - loss).abs() < 1e-6 {
            break;
        }
        prev_loss = loss;
    }
    Ok(ModelState::Linear {
        weights: params.get("weights").clone(),
        bias: params.get("bias").clone(),
    })
}

fn normalize(fv: &FeatureVector) -> FeatureVector {
    let norm = fv.l2_norm();
    if norm == 0.0 {
        return fv.clone();
    }
    FeatureVector {
        counts: fv.counts.iter().map(|(&k, &v)| (k, v / norm)).collect(),
        dimension: fv.dimension,
    }
}

fn train_knn(features: &[FeatureVector], labels: &[usize]) -> ModelState {
    ModelState::Knn {
        vectors: features.iter().map(normalize).collect(),
        labels: labels.to_vec(),
    }
}

/// Vote fractions of the k most cosine-similar training vectors; neighbor
/// ties break toward the earlier training index.
fn knn_scores(
    probe: &FeatureVector,
    vectors: &[FeatureVector],
    labels: &[usize],
    class_count: usize,
    k: usize,
) -> Vec<f64> {
    let probe = normalize(probe);
    let mut sims: Vec<(f64, usize)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (probe.dot(v), i))
        .collect();
    sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let k = k.min(sims.len());
    let mut votes = vec![0.0; class_count];
    for &(_, i) in &sims[..k] {
        votes[labels[i]] += 1.0;
    }
    for v in &mut votes {
        *v /= k as f64;
    }
    votes
}

/// One-vs-rest linear SVM trained by full-batch subgradient descent on the
/// primal hinge objective with L2 penalty.
fn train_svm(
    features: &[FeatureVector],
    labels: &[usize],
    class_count: usize,
    config: &ClassicalConfig,
) -> ModelState {
    let dimension = features[0].dimension;
    let n = features.len() as f64;
    let mut weights = Tensor::zeros(&[dimension, class_count]);
    let mut bias = Tensor::zeros(&[class_count]);
    for t in 0..1000u32 {
        let lr = 0.5 / (1.0 + 0.01 * t as f64);
        let mut d_w = vec![0.0; dimension * class_count];
        let mut d_b = vec![0.0; class_count];
        for (fv, &label) in features.iter().zip(labels) {
            let margins = linear_logits(fv, &weights, &bias);
            for c in 0..class_count {
                let y = if label == c { 1.0 } else { -1.0 };
                if y * margins[c] < 1.0 {
                    for (&j, &v) in &fv.counts {
                        d_w[j * class_count + c] -= y * v / n;
                    }
                    d_b[c] -= y / n;
                }
            }
        }
        for (i, w) in weights.data_mut().iter_mut().enumerate() {
            *w -= lr * (d_w[i] + config.l2 / n * *w);
        }
        for (c, b) in bias.data_mut().iter_mut().enumerate() {
            *b -= lr * d_b[c];
        }
    }
    ModelState::Linear { weights, bias }
}

/// Single ReLU hidden layer plus softmax head, trained full-batch with Adam.
fn train_snn(
    features: &[FeatureVector],
    labels: &[usize],
    class_count: usize,
    config: &ClassicalConfig,
) -> Result<ModelState, ClassicalError> {
    let dimension = features[0].dimension;
    let hidden = config.hidden_width;
    let x = dense_matrix(features, dimension);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamSet::new();
    params.insert("w1", glorot_uniform(&[dimension, hidden], &mut rng));
    params.insert("b1", Tensor::zeros(&[hidden]));
    params.insert("w2", glorot_uniform(&[hidden, class_count], &mut rng));
    params.insert("b2", Tensor::zeros(&[class_count]));
    let mut adam = AdamState::new(0.01);
    for _ in 0..300 {
        let (h, cache1) = dense_forward(&x, params.get("w1"), params.get("b1"), Activation::Relu)?;
        let (logits, cache2) =
            dense_forward(&h, params.get("w2"), params.get("b2"), Activation::Linear)?;
        let (probs, _) = softmax_ce_loss(&logits, labels)?;
        let d_logits = softmax_ce_backward(&probs, labels);
        let (d_h, d_w2, d_b2) = dense_backward(&cache2, params.get("w2"), &d_logits)?;
        let (_, d_w1, d_b1) = dense_backward(&cache1, params.get("w1"), &d_h)?;
        params.zero_grads();
        params.accumulate_grad("w1", &d_w1)?;
        params.accumulate_grad("b1", &d_b1)?;
        params.accumulate_grad("w2", &d_w2)?;
        params.accumulate_grad("b2", &d_b2)?;
        adam_step(&mut params, &mut adam);
    }
    Ok(ModelState::Snn {
        w1: params.get("w1").clone(),
        b1: params.get("b1").clone(),
        w2: params.get("w2").clone(),
        b2: params.get("b2").clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn fv(dimension: usize, entries: &[(usize, f64)]) -> FeatureVector {
        FeatureVector {
            counts: entries.iter().cloned().collect::<BTreeMap<_, _>>(),
            dimension,
        }
    }

    // 20 points in 2 features, class 0 near (3,0), class 1 near (0,3).
    fn separable() -> (Vec<FeatureVector>, Vec<usize>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let jitter = i as f64 * 0.1;
            features.push(fv(2, &[(0, 3.0 + jitter), (1, jitter)]));
            labels.push(0);
            features.push(fv(2, &[(0, jitter), (1, 3.0 + jitter)]));
            labels.push(1);
        }
        (features, labels)
    }

    fn training_accuracy(model: &ClassicalModel, features: &[FeatureVector], labels: &[usize]) -> f64 {
        let correct = features
            .iter()
            .zip(labels)
            .filter(|(f, &l)| predict_classical(model, f).unwrap().class == l)
            .count();
        correct as f64 / labels.len() as f64
    }

    #[test]
    fn glm_and_svm_separate_linearly_separable_data() {
        let (features, labels) = separable();
        for kind in [
            ClassicalModelKind::GeneralizedLinear,
            ClassicalModelKind::SupportVector,
        ] {
            let mut config = ClassicalConfig::new(kind, 1, 1);
            config.l2 = 0.01;
            let model = train_classical(&features, &labels, &config).unwrap();
            assert_eq!(training_accuracy(&model, &features, &labels), 1.0, "{kind:?}");
        }
    }

    #[test]
    fn knn_k1_reproduces_training_labels() {
        let (features, labels) = separable();
        let mut config = ClassicalConfig::new(ClassicalModelKind::KNearest, 1, 1);
        config.k = 1;
        let model = train_classical(&features, &labels, &config).unwrap();
        assert_eq!(training_accuracy(&model, &features, &labels), 1.0);
    }

    #[test]
    fn knn_cosine_is_scale_invariant() {
        let (features, labels) = separable();
        let config = ClassicalConfig::new(ClassicalModelKind::KNearest, 1, 1);
        let model = train_classical(&features, &labels, &config).unwrap();
        for f in &features {
            let scaled = FeatureVector {
                counts: f.counts.iter().map(|(&k, &v)| (k, v * 37.5)).collect(),
                dimension: f.dimension,
            };
            assert_eq!(
                predict_classical(&model, f).unwrap().class,
                predict_classical(&model, &scaled).unwrap().class
            );
        }
    }

    #[test]
    fn single_class_training_rejected() {
        let features = vec![fv(2, &[(0, 1.0)]), fv(2, &[(1, 1.0)])];
        let labels = vec![0, 0];
        let config = ClassicalConfig::new(ClassicalModelKind::GeneralizedLinear, 1, 1);
        assert!(matches!(
            train_classical(&features, &labels, &config),
            Err(ClassicalError::SingleClass)
        ));
    }

    #[test]
    fn empty_training_set_rejected() {
        let config = ClassicalConfig::new(ClassicalModelKind::KNearest, 1, 1);
        assert!(matches!(
            train_classical(&[], &[], &config),
            Err(ClassicalError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn glm_probabilities_sum_to_one() {
        let (features, labels) = separable();
        let config = ClassicalConfig::new(ClassicalModelKind::GeneralizedLinear, 1, 1);
        let model = train_classical(&features, &labels, &config).unwrap();
        for f in &features {
            let p = predict_classical(model_ref(&model), f).unwrap();
            let sum: f64 = p.scores.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    fn model_ref(model: &ClassicalModel) -> &ClassicalModel {
        model
    }

    #[test]
    fn glm_empty_vector_predicts_largest_intercept() {
        // Class 1 is far more frequent, so its intercept dominates on an
        // all-zero input.
        let mut features = vec![fv(2, &[(0, 5.0)])];
        let mut labels = vec![0];
        for _ in 0..9 {
            features.push(fv(2, &[(1, 5.0)]));
            labels.push(1);
        }
        let config = ClassicalConfig::new(ClassicalModelKind::GeneralizedLinear, 1, 1);
        let model = train_classical(&features, &labels, &config).unwrap();
        let p = predict_classical(&model, &fv(2, &[])).unwrap();
        assert_eq!(p.class, 1);
    }

    #[test]
    fn all_kinds_are_deterministic() {
        let (features, labels) = separable();
        for kind in ClassicalModelKind::ALL {
            let config = ClassicalConfig::new(kind, 1, 77);
            let a = train_classical(&features, &labels, &config).unwrap();
            let b = train_classical(&features, &labels, &config).unwrap();
            for f in &features {
                assert_eq!(
                    predict_classical(&a, f).unwrap(),
                    predict_classical(&b, f).unwrap(),
                    "{kind:?}"
                );
            }
        }
    }

    #[test]
    fn every_prediction_is_a_training_class() {
        // Labels 0 and 2 only; class 1 must never be predicted.
        let features = vec![
            fv(2, &[(0, 1.0)]),
            fv(2, &[(1, 1.0)]),
            fv(2, &[(0, 2.0)]),
            fv(2, &[(1, 2.0)]),
        ];
        let labels = vec![0, 2, 0, 2];
        for kind in ClassicalModelKind::ALL {
            let config = ClassicalConfig::new(kind, 1, 5);
            let model = train_classical(&features, &labels, &config).unwrap();
            for f in &features {
                let p = predict_classical(&model, f).unwrap();
                assert_ne!(p.class, 1, "{kind:?}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected_at_predict() {
        let (features, labels) = separable();
        let config = ClassicalConfig::new(ClassicalModelKind::KNearest, 1, 1);
        let model = train_classical(&features, &labels, &config).unwrap();
        assert!(matches!(
            predict_classical(&model, &fv(3, &[])),
            Err(ClassicalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_training_point_keeps_k1_accuracy() {
        let (mut features, mut labels) = separable();
        features.push(features[0].clone());
        labels.push(labels[0]);
        let mut config = ClassicalConfig::new(ClassicalModelKind::KNearest, 1, 1);
        config.k = 1;
        let model = train_classical(&features, &labels, &config).unwrap();
        assert_eq!(training_accuracy(&model, &features, &labels), 1.0);
    }

    #[test]
    fn snn_fits_separable_data() {
        let (features, labels) = separable();
        let config = ClassicalConfig::new(ClassicalModelKind::ShallowNeuralNet, 1, 1);
        let model = train_classical(&features, &labels, &config).unwrap();
        assert_eq!(training_accuracy(&model, &features, &labels), 1.0);
    }
}
