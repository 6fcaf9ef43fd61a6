//! The two deep architectures: a two-layer BiLSTM classifier and a two-layer
//! 1-D CNN classifier over learned embeddings, with training loop, inference
//! and a versioned binary model container.

mod fragment;
mod io;
mod net;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NoteType;
use crate::numkit::{glorot_uniform, softmax, uniform_init, NumError, ParamSet, Tensor, GATE_NAMES};
use crate::preprocess::TokenSequence;
use crate::scalar::Scalar;

pub use fragment::ModelFragment;
pub use io::{load_model, save_model, vocabulary_hash};
pub use train::{train_model, EpochStats, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum DlError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sequence/label length mismatch: {sequences} sequences, {labels} labels")]
    LengthMismatch { sequences: usize, labels: usize },
    #[error("label {label} does not fit a {arity}-way head")]
    LabelArity { label: usize, arity: usize },
    #[error("sequence length {got} does not match the configured {expected}")]
    SequenceLength { expected: usize, got: usize },
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a model file: bad magic bytes")]
    BadMagic,
    #[error("unsupported model format version {got}, expected {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
    #[error("model file truncated or malformed: {0}")]
    Malformed(String),
    #[error("vocabulary mismatch: model was built against vocabulary {expected}, got {got}")]
    VocabularyMismatch { expected: String, got: String },
}

/// Classification head: 3-way softmax for radiology, single sigmoid unit for
/// the binary telephone task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    Softmax { classes: usize },
    Sigmoid,
}

impl HeadKind {
    pub fn for_note_type(note_type: NoteType) -> HeadKind {
        match note_type {
            NoteType::Radiology => HeadKind::Softmax { classes: 3 },
            NoteType::Telephone => HeadKind::Sigmoid,
        }
    }

    /// Output units of the final dense layer.
    pub fn units(&self) -> usize {
        match self {
            HeadKind::Softmax { classes } => *classes,
            HeadKind::Sigmoid => 1,
        }
    }

    /// Distinct class labels the head can express.
    pub fn class_count(&self) -> usize {
        match self {
            HeadKind::Softmax { classes } => *classes,
            HeadKind::Sigmoid => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmModelConfig {
    pub embedding_dim: usize,
    /// Maximum vocabulary words; the embedding table adds two rows for
    /// padding and out-of-vocabulary.
    pub vocab_max: usize,
    pub seq_len: usize,
    pub bilstm1_hidden: usize,
    pub bilstm2_hidden: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub dense_hidden: usize,
    pub head: HeadKind,
    pub seed: u64,
}

impl LstmModelConfig {
    /// Paper-scale hyperparameters; dense width differs by task.
    pub fn paper(note_type: NoteType, seed: u64) -> Self {
        LstmModelConfig {
            embedding_dim: 1000,
            vocab_max: 3000,
            seq_len: 256,
            bilstm1_hidden: 64,
            bilstm2_hidden: 64,
            dropout: 0.2,
            recurrent_dropout: 0.4,
            dense_hidden: match note_type {
                NoteType::Radiology => 64,
                NoteType::Telephone => 128,
            },
            head: HeadKind::for_note_type(note_type),
            seed,
        }
    }

    /// Reduced dimensions for desk-scale runs and tests.
    pub fn desk(note_type: NoteType, seed: u64) -> Self {
        LstmModelConfig {
            embedding_dim: 32,
            vocab_max: 3000,
            seq_len: 64,
            bilstm1_hidden: 16,
            bilstm2_hidden: 16,
            dropout: 0.2,
            recurrent_dropout: 0.4,
            dense_hidden: 16,
            head: HeadKind::for_note_type(note_type),
            seed,
        }
    }

    fn validate(&self) -> Result<(), DlError> {
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("vocab_max", self.vocab_max),
            ("seq_len", self.seq_len),
            ("bilstm1_hidden", self.bilstm1_hidden),
            ("bilstm2_hidden", self.bilstm2_hidden),
            ("dense_hidden", self.dense_hidden),
            ("head units", self.head.units()),
        ] {
            if v == 0 {
                return Err(DlError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, r) in [("dropout", self.dropout), ("recurrent_dropout", self.recurrent_dropout)]
        {
            if !(0.0..1.0).contains(&r) {
                return Err(DlError::InvalidConfig(format!("{name} {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub filters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnModelConfig {
    pub embedding_dim: usize,
    pub vocab_max: usize,
    pub seq_len: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub dense_hidden: usize,
    pub head: HeadKind,
    pub seed: u64,
}

impl CnnModelConfig {
    pub fn paper(note_type: NoteType, seed: u64) -> Self {
        CnnModelConfig {
            embedding_dim: 1000,
            vocab_max: 3000,
            seq_len: 256,
            conv1: ConvSpec { kernel: 3, stride: 1, filters: 128 },
            conv2: ConvSpec { kernel: 5, stride: 1, filters: 128 },
            dense_hidden: 64,
            head: HeadKind::for_note_type(note_type),
            seed,
        }
    }

    pub fn desk(note_type: NoteType, seed: u64) -> Self {
        CnnModelConfig {
            embedding_dim: 32,
            vocab_max: 3000,
            seq_len: 64,
            conv1: ConvSpec { kernel: 3, stride: 1, filters: 16 },
            conv2: ConvSpec { kernel: 5, stride: 1, filters: 16 },
            dense_hidden: 16,
            head: HeadKind::for_note_type(note_type),
            seed,
        }
    }

    fn validate(&self) -> Result<(), DlError> {
        for (name, v) in [
            ("embedding_dim", self.embedding_dim),
            ("vocab_max", self.vocab_max),
            ("seq_len", self.seq_len),
            ("conv1 kernel", self.conv1.kernel),
            ("conv1 stride", self.conv1.stride),
            ("conv1 filters", self.conv1.filters),
            ("conv2 kernel", self.conv2.kernel),
            ("conv2 stride", self.conv2.stride),
            ("conv2 filters", self.conv2.filters),
            ("dense_hidden", self.dense_hidden),
            ("head units", self.head.units()),
        ] {
            if v == 0 {
                return Err(DlError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.seq_len < self.conv1.kernel + self.conv2.kernel - 1 {
            return Err(DlError::InvalidConfig(format!(
                "seq_len {} too short for kernels {} and {}",
                self.seq_len, self.conv1.kernel, self.conv2.kernel
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArchitectureConfig {
    Lstm(LstmModelConfig),
    Cnn(CnnModelConfig),
}

impl ArchitectureConfig {
    pub fn head(&self) -> HeadKind {
        match self {
            ArchitectureConfig::Lstm(c) => c.head,
            ArchitectureConfig::Cnn(c) => c.head,
        }
    }

    pub fn seq_len(&self) -> usize {
        match self {
            ArchitectureConfig::Lstm(c) => c.seq_len,
            ArchitectureConfig::Cnn(c) => c.seq_len,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ArchitectureConfig::Lstm(_) => "lstm",
            ArchitectureConfig::Cnn(_) => "cnn",
        }
    }
}

/// A deep model: architecture config, parameters, the hash of the vocabulary
/// it was trained against, and per-epoch loss history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel<S> {
    pub arch: ArchitectureConfig,
    pub params: ParamSet<S>,
    pub vocab_hash: String,
    pub history: Vec<EpochStats>,
}

/// Per-class probabilities plus the argmax label. For the sigmoid head the
/// probabilities are (1 − p, p) over (no dislocation, dislocation) and a
/// probability of exactly 0.5 resolves to no dislocation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepPrediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

fn insert_gate_block<S: Scalar>(
    params: &mut ParamSet<S>,
    layer: usize,
    dir: &str,
    input_dim: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) {
    for gate in GATE_NAMES {
        params.insert(
            &format!("bilstm{layer}.{dir}.w.{gate}"),
            glorot_uniform(&[input_dim + hidden, hidden], rng),
        );
    }
    for gate in GATE_NAMES {
        params.insert(&format!("bilstm{layer}.{dir}.b.{gate}"), Tensor::zeros(&[hidden]));
    }
}

/// Builds an untrained model: embedding from seeded uniform(−0.05, 0.05),
/// Glorot-uniform weights, zero biases. Identical configs (including seed)
/// yield bit-identical parameters.
pub fn build_model<S: Scalar>(arch: ArchitectureConfig) -> Result<TrainedModel<S>, DlError> {
    let mut params = ParamSet::new();
    match &arch {
        ArchitectureConfig::Lstm(cfg) => {
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            params.insert(
                "embedding",
                uniform_init(&[cfg.vocab_max + 2, cfg.embedding_dim], -0.05, 0.05, &mut rng),
            );
            insert_gate_block(&mut params, 1, "fwd", cfg.embedding_dim, cfg.bilstm1_hidden, &mut rng);
            insert_gate_block(&mut params, 1, "bwd", cfg.embedding_dim, cfg.bilstm1_hidden, &mut rng);
            let l2_input = 2 * cfg.bilstm1_hidden;
            insert_gate_block(&mut params, 2, "fwd", l2_input, cfg.bilstm2_hidden, &mut rng);
            insert_gate_block(&mut params, 2, "bwd", l2_input, cfg.bilstm2_hidden, &mut rng);
            params.insert(
                "dense.w",
                glorot_uniform(&[2 * cfg.bilstm2_hidden, cfg.dense_hidden], &mut rng),
            );
            params.insert("dense.b", Tensor::zeros(&[cfg.dense_hidden]));
            params.insert(
                "head.w",
                glorot_uniform(&[cfg.dense_hidden, cfg.head.units()], &mut rng),
            );
            params.insert("head.b", Tensor::zeros(&[cfg.head.units()]));
        }
        ArchitectureConfig::Cnn(cfg) => {
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            params.insert(
                "embedding",
                uniform_init(&[cfg.vocab_max + 2, cfg.embedding_dim], -0.05, 0.05, &mut rng),
            );
            params.insert(
                "conv1.w",
                glorot_uniform(
                    &[cfg.conv1.kernel, cfg.embedding_dim, cfg.conv1.filters],
                    &mut rng,
                ),
            );
            params.insert("conv1.b", Tensor::zeros(&[cfg.conv1.filters]));
            params.insert(
                "conv2.w",
                glorot_uniform(&[cfg.conv2.kernel, cfg.conv1.filters, cfg.conv2.filters], &mut rng),
            );
            params.insert("conv2.b", Tensor::zeros(&[cfg.conv2.filters]));
            params.insert(
                "dense.w",
                glorot_uniform(&[cfg.conv2.filters, cfg.dense_hidden], &mut rng),
            );
            params.insert("dense.b", Tensor::zeros(&[cfg.dense_hidden]));
            params.insert(
                "head.w",
                glorot_uniform(&[cfg.dense_hidden, cfg.head.units()], &mut rng),
            );
            params.insert("head.b", Tensor::zeros(&[cfg.head.units()]));
        }
    }
    Ok(TrainedModel {
        arch,
        params,
        vocab_hash: String::new(),
        history: Vec::new(),
    })
}

impl<S: Scalar> TrainedModel<S> {
    /// Per-class probabilities from one batch of logits, as f64.
    fn probabilities(&self, logits: &Tensor<S>, row: usize) -> Vec<f64> {
        match self.arch.head() {
            HeadKind::Softmax { classes } => {
                let probs = softmax(logits);
                (0..classes)
                    .map(|c| probs.at2(row, c).to_f64().unwrap_or(f64::NAN))
                    .collect()
            }
            HeadKind::Sigmoid => {
                let p = crate::numkit::sigmoid(logits.at2(row, 0))
                    .to_f64()
                    .unwrap_or(f64::NAN);
                vec![1.0 - p, p]
            }
        }
    }
}

/// Dropout-free inference on one encoded sequence.
pub fn predict<S: Scalar>(
    model: &TrainedModel<S>,
    sequence: &TokenSequence,
) -> Result<DeepPrediction, DlError> {
    let batch = predict_batch(model, std::slice::from_ref(sequence))?;
    Ok(batch.into_iter().next().expect("one input, one prediction"))
}

/// Dropout-free inference on a batch of encoded sequences.
pub fn predict_batch<S: Scalar>(
    model: &TrainedModel<S>,
    sequences: &[TokenSequence],
) -> Result<Vec<DeepPrediction>, DlError> {
    let seq_len = model.arch.seq_len();
    let mut indices = Vec::with_capacity(sequences.len() * seq_len);
    for s in sequences {
        if s.indices.len() != seq_len {
            return Err(DlError::SequenceLength {
                expected: seq_len,
                got: s.indices.len(),
            });
        }
        indices.extend_from_slice(&s.indices);
    }
    let logits = net::logits(&model.arch, &model.params, &indices, sequences.len(), None)?.0;
    Ok((0..sequences.len())
        .map(|row| {
            let probabilities = model.probabilities(&logits, row);
            let class = match model.arch.head() {
                HeadKind::Softmax { .. } => {
                    let mut best = 0;
                    for (c, &p) in probabilities.iter().enumerate() {
                        if p > probabilities[best] {
                            best = c;
                        }
                    }
                    best
                }
                // Strict threshold: p = 0.5 resolves to no dislocation.
                HeadKind::Sigmoid => usize::from(probabilities[1] > 0.5),
            };
            DeepPrediction {
                class,
                probabilities,
            }
        })
        .collect())
}
