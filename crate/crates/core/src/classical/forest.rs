//! Random forest: seeded bootstrap samples, random feature subsets at each
//! split, gini impurity, majority vote.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::preprocess::FeatureVector;

use super::{ClassicalConfig, ModelState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    root: TreeNode,
}

fn feature_value(fv: &FeatureVector, feature: usize) -> f64 {
    fv.counts.get(&feature).copied().unwrap_or(0.0)
}

impl DecisionTree {
    pub fn predict(&self, fv: &FeatureVector) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if feature_value(fv, *feature) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut g = 1.0;
    for &c in counts {
        let p = c as f64 / total as f64;
        g -= p * p;
    }
    g
}

fn class_counts(samples: &[usize], labels: &[usize], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &i in samples {
        counts[labels[i]] += 1;
    }
    counts
}

/// Majority class; ties break toward the lowest class index.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    features: &'a [FeatureVector],
    labels: &'a [usize],
    class_count: usize,
    feature_subset_size: usize,
    max_depth: Option<usize>,
}

impl Builder<'_> {
    fn build(&self, samples: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let counts = class_counts(samples, self.labels, self.class_count);
        let node_gini = gini(&counts, samples.len());
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if node_gini == 0.0 || depth_capped {
            return TreeNode::Leaf {
                class: majority(&counts),
            };
        }

        let dimension = self.features[0].dimension;
        let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
        for _ in 0..self.feature_subset_size {
            let feature = rng.gen_range(0..dimension);
            let mut values: Vec<f64> = samples
                .iter()
                .map(|&i| feature_value(&self.features[i], feature))
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for pair in values.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let mut left = vec![0usize; self.class_count];
                let mut right = vec![0usize; self.class_count];
                let mut n_left = 0usize;
                for &i in samples {
                    if feature_value(&self.features[i], feature) <= threshold {
                        left[self.labels[i]] += 1;
                        n_left += 1;
                    } else {
                        right[self.labels[i]] += 1;
                    }
                }
                let n_right = samples.len() - n_left;
                let weighted = (n_left as f64 * gini(&left, n_left)
                    + n_right as f64 * gini(&right, n_right))
                    / samples.len() as f64;
                if best.is_none_or(|(g, _, _)| weighted < g) {
                    best = Some((weighted, feature, threshold));
                }
            }
        }

        match best {
            Some((weighted, feature, threshold)) if weighted < node_gini => {
                let (left, right): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| feature_value(&self.features[i], feature) <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&left, depth + 1, rng)),
                    right: Box::new(self.build(&right, depth + 1, rng)),
                }
            }
            _ => TreeNode::Leaf {
                class: majority(&counts),
            },
        }
    }
}

pub(super) fn train_forest(
    features: &[FeatureVector],
    labels: &[usize],
    class_count: usize,
    config: &ClassicalConfig,
) -> ModelState {
    let n = features.len();
    let dimension = features[0].dimension;
    let builder = Builder {
        features,
        labels,
        class_count,
        feature_subset_size: (dimension as f64).sqrt().ceil() as usize,
        max_depth: config.max_depth,
    };
    let trees = (0..config.tree_count)
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(
                config
                    .seed
                    .wrapping_add((t as u64).wrapping_mul(0x9E3779B97F4A7C15)),
            );
            let samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            DecisionTree {
                root: builder.build(&samples, 0, &mut rng),
            }
        })
        .collect();
    ModelState::Forest { trees }
}

#[cfg(test)]
mod tests {
    use super::super::{
        predict_classical, train_classical, ClassicalConfig, ClassicalModelKind,
    };
    use super::*;
    use std::collections::BTreeMap;

    fn fv(dimension: usize, entries: &[(usize, f64)]) -> FeatureVector {
        FeatureVector {
            counts: entries.iter().cloned().collect::<BTreeMap<_, _>>(),
            dimension,
        }
    }

    #[test]
    fn forest_fits_axis_aligned_data() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            features.push(fv(2, &[(0, 2.0 + i as f64 * 0.1)]));
            labels.push(0);
            features.push(fv(2, &[(1, 2.0 + i as f64 * 0.1)]));
            labels.push(1);
        }
        let config = ClassicalConfig::new(ClassicalModelKind::RandomForest, 1, 3);
        let model = train_classical(&features, &labels, &config).unwrap();
        for (f, &l) in features.iter().zip(&labels) {
            assert_eq!(predict_classical(&model, f).unwrap().class, l);
        }
    }

    #[test]
    fn depth_zero_trees_predict_the_majority_class() {
        let features = vec![
            fv(1, &[(0, 1.0)]),
            fv(1, &[(0, 2.0)]),
            fv(1, &[(0, 3.0)]),
            fv(1, &[(0, 9.0)]),
        ];
        let labels = vec![1, 1, 1, 0];
        let mut config = ClassicalConfig::new(ClassicalModelKind::RandomForest, 1, 3);
        config.max_depth = Some(0);
        config.tree_count = 9;
        let model = train_classical(&features, &labels, &config).unwrap();
        // Bootstrap resampling can flip a single tree's majority, but the
        // forest vote across 9 stumps stays with the dominant class.
        for probe in [fv(1, &[(0, 0.0)]), fv(1, &[(0, 100.0)])] {
            assert_eq!(predict_classical(&model, &probe).unwrap().class, 1);
        }
    }

    #[test]
    fn tie_in_leaf_prefers_lowest_class() {
        assert_eq!(majority(&[2, 2, 1]), 0);
        assert_eq!(majority(&[0, 3, 3]), 1);
    }

    #[test]
    fn gini_of_pure_node_is_zero() {
        assert_eq!(gini(&[5, 0, 0], 5), 0.0);
        assert!((gini(&[1, 1], 2) - 0.5).abs() < 1e-12);
    }
}
