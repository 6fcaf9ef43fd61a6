//! Mini-batch training with Adam and validation-loss early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numkit::{adam_step, dropout_mask, AdamState, ParamSet};
use crate::preprocess::TokenSequence;
use crate::scalar::Scalar;

use super::net::{batch_loss, Masks};
use super::{ArchitectureConfig, DlError, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs allowed without a validation-loss improvement before training
    /// stops; patience 0 stops one epoch past the best.
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 10,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DlError> {
        if self.epochs == 0 || self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(DlError::InvalidConfig(
                "epochs, batch_size and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean train and validation loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

fn flatten(
    sequences: &[TokenSequence],
    labels: &[usize],
    seq_len: usize,
    class_count: usize,
) -> Result<Vec<usize>, DlError> {
    if sequences.len() != labels.len() {
        return Err(DlError::LengthMismatch {
            sequences: sequences.len(),
            labels: labels.len(),
        });
    }
    let mut flat = Vec::with_capacity(sequences.len() * seq_len);
    for s in sequences {
        if s.indices.len() != seq_len {
            return Err(DlError::SequenceLength {
                expected: seq_len,
                got: s.indices.len(),
            });
        }
        flat.extend_from_slice(&s.indices);
    }
    for &l in labels {
        if l >= class_count {
            return Err(DlError::LabelArity {
                label: l,
                arity: class_count,
            });
        }
    }
    Ok(flat)
}

fn gather_batch(
    flat: &[usize],
    labels: &[usize],
    chunk: &[usize],
    seq_len: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices = Vec::with_capacity(chunk.len() * seq_len);
    let mut batch_labels = Vec::with_capacity(chunk.len());
    for &i in chunk {
        indices.extend_from_slice(&flat[i * seq_len..(i + 1) * seq_len]);
        batch_labels.push(labels[i]);
    }
    (indices, batch_labels)
}

fn sample_masks<S: Scalar>(
    arch: &ArchitectureConfig,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Masks<S>, DlError> {
    match arch {
        ArchitectureConfig::Lstm(cfg) => {
            let input = if cfg.dropout > 0.0 {
                Some(dropout_mask(
                    &[batch, cfg.seq_len, 2 * cfg.bilstm1_hidden],
                    cfg.dropout,
                    rng,
                )?)
            } else {
                None
            };
            let (rec_fwd, rec_bwd) = if cfg.recurrent_dropout > 0.0 {
                (
                    Some(dropout_mask(&[batch, cfg.bilstm2_hidden], cfg.recurrent_dropout, rng)?),
                    Some(dropout_mask(&[batch, cfg.bilstm2_hidden], cfg.recurrent_dropout, rng)?),
                )
            } else {
                (None, None)
            };
            Ok(Masks {
                input,
                rec_fwd,
                rec_bwd,
            })
        }
        ArchitectureConfig::Cnn(_) => Ok(Masks::none()),
    }
}

fn dataset_loss<S: Scalar>(
    arch: &ArchitectureConfig,
    params: &mut ParamSet<S>,
    flat: &[usize],
    labels: &[usize],
    seq_len: usize,
    batch_size: usize,
) -> Result<f64, DlError> {
    let order: Vec<usize> = (0..labels.len()).collect();
    let mut total = 0.0;
    for chunk in order.chunks(batch_size) {
        let (indices, batch_labels) = gather_batch(flat, labels, chunk, seq_len);
        let loss = batch_loss(arch, params, &indices, chunk.len(), &batch_labels, None, false)?;
        total += loss.to_f64().unwrap_or(f64::NAN) * chunk.len() as f64;
    }
    Ok(total / labels.len() as f64)
}

/// Trains with mini-batch Adam: per-epoch seeded shuffle, dropout at
/// training time only, early stopping that restores the best-validation-loss
/// parameters. Deterministic given the model seed, data order and train
/// seed.
pub fn train_model<S: Scalar>(
    mut model: TrainedModel<S>,
    train: &[TokenSequence],
    train_labels: &[usize],
    validation: &[TokenSequence],
    validation_labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainedModel<S>, DlError> {
    config.validate()?;
    if train.is_empty() {
        return Err(DlError::EmptyTrainingSet);
    }
    let seq_len = model.arch.seq_len();
    let class_count = model.arch.head().class_count();
    let flat_train = flatten(train, train_labels, seq_len, class_count)?;
    let flat_val = flatten(validation, validation_labels, seq_len, class_count)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(S::from_f64_lossy(config.learning_rate));
    let mut history = Vec::new();
    let mut best_params = model.params.clone();
    let mut best_val = f64::INFINITY;
    let mut wait = 0usize;

    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (indices, batch_labels) = gather_batch(&flat_train, train_labels, chunk, seq_len);
            let masks = sample_masks(&model.arch, chunk.len(), &mut rng)?;
            model.params.zero_grads();
            let loss = batch_loss(
                &model.arch,
                &mut model.params,
                &indices,
                chunk.len(),
                &batch_labels,
                Some(&masks),
                true,
            )?;
            adam_step(&mut model.params, &mut adam);
            train_total += loss.to_f64().unwrap_or(f64::NAN) * chunk.len() as f64;
        }
        let train_loss = train_total / train.len() as f64;
        let val_loss = if validation.is_empty() {
            train_loss
        } else {
            dataset_loss(
                &model.arch,
                &mut model.params,
                &flat_val,
                validation_labels,
                seq_len,
                config.batch_size,
            )?
        };
        history.push(EpochStats {
            train_loss,
            val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_params = model.params.clone();
            wait = 0;
        } else {
            wait += 1;
            if wait > config.patience {
                break;
            }
        }
    }

    model.params = best_params;
    model.history = history;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::super::{build_model, predict, CnnModelConfig, LstmModelConfig};
    use super::*;
    use crate::corpus::NoteType;

    fn tiny_lstm() -> LstmModelConfig {
        let mut cfg = LstmModelConfig::desk(NoteType::Radiology, 5);
        cfg.embedding_dim = 8;
        cfg.vocab_max = 20;
        cfg.seq_len = 6;
        cfg.bilstm1_hidden = 4;
        cfg.bilstm2_hidden = 4;
        cfg.dense_hidden = 8;
        cfg
    }

    fn tiny_cnn() -> CnnModelConfig {
        let mut cfg = CnnModelConfig::desk(NoteType::Radiology, 5);
        cfg.embedding_dim = 8;
        cfg.vocab_max = 20;
        cfg.seq_len = 10;
        cfg.conv1.filters = 6;
        cfg.conv2.filters = 6;
        cfg.dense_hidden = 8;
        cfg
    }

    // Token 2 marks class 0, token 3 class 1, token 4 class 2.
    fn toy_data(seq_len: usize, n_per_class: usize) -> (Vec<TokenSequence>, Vec<usize>) {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for class in 0..3usize {
            for i in 0..n_per_class {
                let mut indices = vec![(5 + (i % 7)) % 20; seq_len];
                indices[i % seq_len] = class + 2;
                seqs.push(TokenSequence {
                    indices,
                    original_length: seq_len,
                });
                labels.push(class);
            }
        }
        (seqs, labels)
    }

    #[test]
    fn lstm_memorizes_toy_corpus() {
        let cfg = tiny_lstm();
        let model = build_model::<f64>(super::super::ArchitectureConfig::Lstm(cfg)).unwrap();
        let (seqs, labels) = toy_data(cfg.seq_len, 4);
        let mut tc = TrainConfig::new(7);
        tc.epochs = 200;
        tc.batch_size = 4;
        tc.learning_rate = 0.02;
        tc.patience = 200;
        let trained = train_model(model, &seqs, &labels, &seqs, &labels, &tc).unwrap();
        let correct = seqs
            .iter()
            .zip(&labels)
            .filter(|(s, &l)| predict(&trained, s).unwrap().class == l)
            .count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn cnn_memorizes_toy_corpus() {
        let cfg = tiny_cnn();
        let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        let (seqs, labels) = toy_data(cfg.seq_len, 4);
        let mut tc = TrainConfig::new(7);
        tc.epochs = 150;
        tc.batch_size = 4;
        tc.learning_rate = 0.02;
        tc.patience = 150;
        let trained = train_model(model, &seqs, &labels, &seqs, &labels, &tc).unwrap();
        let correct = seqs
            .iter()
            .zip(&labels)
            .filter(|(s, &l)| predict(&trained, s).unwrap().class == l)
            .count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny_cnn();
        let (seqs, labels) = toy_data(cfg.seq_len, 2);
        let mut tc = TrainConfig::new(3);
        tc.epochs = 10;
        tc.batch_size = 2;
        let run = || {
            let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
            train_model(model, &seqs, &labels, &seqs, &labels, &tc).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.history, b.history);
        for (name, pa, _) in a.params.iter() {
            assert_eq!(pa.data(), b.params.get(name).data(), "{name}");
        }
    }

    #[test]
    fn patience_zero_stops_one_epoch_past_the_best() {
        let cfg = tiny_cnn();
        let (seqs, labels) = toy_data(cfg.seq_len, 2);
        // Validation labels shifted by one class: training progress worsens
        // validation loss almost immediately.
        let bad_val: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
        let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        let mut tc = TrainConfig::new(3);
        tc.epochs = 50;
        tc.batch_size = 2;
        tc.learning_rate = 0.05;
        tc.patience = 0;
        let trained = train_model(model, &seqs, &labels, &seqs, &bad_val, &tc).unwrap();
        assert!(trained.history.len() < 50, "ran {} epochs", trained.history.len());
        // The stopping epoch is exactly one past the last improvement.
        let best = trained
            .history
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.val_loss.partial_cmp(&b.1.val_loss).unwrap())
            .unwrap()
            .0;
        assert_eq!(trained.history.len(), best + 2);
    }

    #[test]
    fn label_out_of_arity_rejected() {
        let cfg = tiny_cnn();
        let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        let seqs = vec![TokenSequence {
            indices: vec![2; cfg.seq_len],
            original_length: cfg.seq_len,
        }];
        let tc = TrainConfig::new(1);
        assert!(matches!(
            train_model(model, &seqs, &[3], &seqs, &[0], &tc),
            Err(DlError::LabelArity { label: 3, arity: 3 })
        ));
    }

    #[test]
    fn empty_training_set_rejected() {
        let cfg = tiny_cnn();
        let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        let tc = TrainConfig::new(1);
        assert!(matches!(
            train_model(model, &[], &[], &[], &[], &tc),
            Err(DlError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn train_loss_non_increasing_after_warmup_on_memorizable_set() {
        let cfg = tiny_cnn();
        let (seqs, labels) = toy_data(cfg.seq_len, 4);
        let model = build_model::<f64>(super::super::ArchitectureConfig::Cnn(cfg)).unwrap();
        let mut tc = TrainConfig::new(7);
        tc.epochs = 60;
        tc.batch_size = 12;
        tc.learning_rate = 0.01;
        tc.patience = 60;
        let trained = train_model(model, &seqs, &labels, &seqs, &labels, &tc).unwrap();
        for pair in trained.history[5..].windows(2) {
            assert!(
                pair[1].train_loss <= pair[0].train_loss + 1e-3,
                "loss rose from {} to {}",
                pair[0].train_loss,
                pair[1].train_loss
            );
        }
    }
}
