//! End-to-end experiment orchestration: corpus → prefilter → split →
//! preprocess → train roster → evaluate → combined report + manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{
    predict_classical, train_classical, ClassicalConfig, ClassicalModel, ClassicalModelKind,
};
use crate::corpus::{
    attach_code_fixture, default_keywords, generate_synthetic_corpus, load_codes_jsonl,
    load_notes_jsonl, prefilter_notes, split_dataset, class_names, CodePlan, Corpus, NoteType,
    SplitRatios, SyntheticSpec,
};
use crate::dlmodels::{
    build_model, predict_batch, save_model, train_model, vocabulary_hash, ArchitectureConfig,
    CnnModelConfig, LstmModelConfig, TrainConfig, TrainedModel,
};
use crate::eval::{
    code_capture_accuracy, cohen_kappa, confusion_matrix, per_class_metrics, render_report,
    CodeCaptureResult, MetricsReport, ReportFormat,
};
use crate::preprocess::{
    encode_sequence, preprocess_text, vectorize_bow, FeatureVector, NgramConfig, NgramVocabulary,
    TokenSequence, Vocabulary,
};

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {message}")]
pub struct ExperimentError {
    pub stage: &'static str,
    pub message: String,
}

fn stage<T, E: Display>(name: &'static str, result: Result<T, E>) -> Result<T, ExperimentError> {
    result.map_err(|e| ExperimentError {
        stage: name,
        message: e.to_string(),
    })
}

/// Where the notes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Files {
        notes: PathBuf,
        codes: Option<PathBuf>,
    },
    Synthetic {
        spec: SyntheticSpec,
        code_plan: Option<CodePlan>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelProfile {
    Paper,
    Desk,
}

impl ModelProfile {
    pub fn name(&self) -> &'static str {
        match self {
            ModelProfile::Paper => "paper",
            ModelProfile::Desk => "desk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeepArch {
    Lstm,
    Cnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: CorpusSource,
    pub note_type: NoteType,
    /// `None` uses the default keyword screen; an empty list disables
    /// prefiltering.
    pub prefilter_keywords: Option<Vec<String>>,
    pub classical_kinds: Vec<ClassicalModelKind>,
    pub ngram_orders: Vec<usize>,
    pub deep_architectures: Vec<DeepArch>,
    pub profile: ModelProfile,
    pub split: SplitRatios,
    pub stratified: bool,
    pub train: TrainConfig,
    pub format: ReportFormat,
    pub output_dir: PathBuf,
    pub overwrite: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Full roster over a synthetic corpus, desk profile.
    pub fn synthetic_default(
        spec: SyntheticSpec,
        note_type: NoteType,
        output_dir: PathBuf,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            source: CorpusSource::Synthetic {
                spec,
                code_plan: None,
            },
            note_type,
            prefilter_keywords: None,
            classical_kinds: ClassicalModelKind::ALL.to_vec(),
            ngram_orders: vec![1, 2, 3],
            deep_architectures: vec![DeepArch::Lstm, DeepArch::Cnn],
            profile: ModelProfile::Desk,
            split: SplitRatios::EIGHTY_TEN_TEN,
            stratified: true,
            train: TrainConfig::new(seed),
            format: ReportFormat::Markdown,
            output_dir,
            overwrite: false,
            seed,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.classical_kinds.is_empty() && self.deep_architectures.is_empty() {
            return Err(ExperimentError {
                stage: "config",
                message: "model roster is empty".into(),
            });
        }
        if self.classical_kinds.is_empty() || self.ngram_orders.iter().all(|&n| (1..=3).contains(&n))
        {
            Ok(())
        } else {
            Err(ExperimentError {
                stage: "config",
                message: "ngram orders must lie in 1..=3".into(),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub model: String,
    pub variant: String,
    pub wall_ms: u128,
}

/// Everything needed to reproduce the run: the full config, its hash, and
/// per-model wall times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub completed: bool,
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub reports: Vec<MetricsReport>,
    pub report_text: String,
    pub code_capture: Option<CodeCaptureResult>,
}

fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

enum RosterEntry {
    Classical {
        kind: ClassicalModelKind,
        order: usize,
    },
    Deep(DeepArch),
}

enum ModelArtifact {
    Classical(Box<ClassicalModel>),
    Deep(Box<TrainedModel<f64>>),
}

struct RosterResult {
    report: MetricsReport,
    wall_ms: u128,
    artifact: ModelArtifact,
    file_stem: String,
}

fn order_label(order: usize) -> String {
    match order {
        1 => "Unigram".to_string(),
        n => format!("{n}-gram"),
    }
}

struct PreparedData {
    note_type: NoteType,
    class_names: Vec<String>,
    train_labels: Vec<usize>,
    val_labels: Vec<usize>,
    test_labels: Vec<usize>,
    // Per n-gram order: vocabulary plus train/test feature vectors.
    bow: BTreeMap<usize, (NgramVocabulary, Vec<FeatureVector>, Vec<FeatureVector>)>,
    vocab_hash: String,
    // Per sequence length: encoded train/val/test sequences.
    sequences: BTreeMap<usize, (Vec<TokenSequence>, Vec<TokenSequence>, Vec<TokenSequence>)>,
}

fn threads_cap() -> usize {
    match std::env::var("AEDETECT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => 1,
            Ok(n) => n,
        },
        Err(_) => 1,
    }
}

fn deep_arch_config(
    arch: DeepArch,
    profile: ModelProfile,
    note_type: NoteType,
    seed: u64,
) -> ArchitectureConfig {
    match (arch, profile) {
        (DeepArch::Lstm, ModelProfile::Paper) => {
            ArchitectureConfig::Lstm(LstmModelConfig::paper(note_type, seed))
        }
        (DeepArch::Lstm, ModelProfile::Desk) => {
            ArchitectureConfig::Lstm(LstmModelConfig::desk(note_type, seed))
        }
        (DeepArch::Cnn, ModelProfile::Paper) => {
            ArchitectureConfig::Cnn(CnnModelConfig::paper(note_type, seed))
        }
        (DeepArch::Cnn, ModelProfile::Desk) => {
            ArchitectureConfig::Cnn(CnnModelConfig::desk(note_type, seed))
        }
    }
}

fn run_entry(
    entry: &RosterEntry,
    entry_index: usize,
    config: &ExperimentConfig,
    data: &PreparedData,
) -> Result<RosterResult, ExperimentError> {
    let start = Instant::now();
    let names: Vec<&str> = data.class_names.iter().map(|s| s.as_str()).collect();
    match entry {
        RosterEntry::Classical { kind, order } => {
            let (_, train_fv, test_fv) = &data.bow[order];
            let mut cc = ClassicalConfig::new(*kind, *order, config.seed + entry_index as u64);
            cc.l2 = 0.01;
            let model = stage("train-classical", train_classical(train_fv, &data.train_labels, &cc))?;
            let predictions: Vec<usize> = test_fv
                .iter()
                .map(|fv| predict_classical(&model, fv).map(|p| p.class))
                .collect::<Result<_, _>>()
                .map_err(|e| ExperimentError {
                    stage: "predict-classical",
                    message: e.to_string(),
                })?;
            let matrix = stage(
                "evaluate",
                confusion_matrix(&data.test_labels, &predictions, &names),
            )?;
            let report = MetricsReport {
                model: kind.display_name().to_string(),
                variant: order_label(*order),
                note_type: data.note_type,
                class_names: data.class_names.clone(),
                per_class: stage("evaluate", per_class_metrics(&matrix))?,
                kappa: stage("evaluate", cohen_kappa(&matrix))?,
            };
            Ok(RosterResult {
                report,
                wall_ms: start.elapsed().as_millis(),
                artifact: ModelArtifact::Classical(Box::new(model)),
                file_stem: format!("{}_{}", kind.display_name().to_lowercase().replace(' ', "_"), order),
            })
        }
        RosterEntry::Deep(arch) => {
            let arch_config = deep_arch_config(*arch, config.profile, data.note_type, config.seed);
            let seq_len = arch_config.seq_len();
            let (train_seq, val_seq, test_seq) = &data.sequences[&seq_len];
            let mut model = stage("build-model", build_model::<f64>(arch_config))?;
            model.vocab_hash = data.vocab_hash.clone();
            let trained = stage(
                "train-deep",
                train_model(
                    model,
                    train_seq,
                    &data.train_labels,
                    val_seq,
                    &data.val_labels,
                    &config.train,
                ),
            )?;
            let predictions: Vec<usize> = stage("predict-deep", predict_batch(&trained, test_seq))?
                .into_iter()
                .map(|p| p.class)
                .collect();
            let matrix = stage(
                "evaluate",
                confusion_matrix(&data.test_labels, &predictions, &names),
            )?;
            let model_name = match arch {
                DeepArch::Lstm => "Long Short-Term Memory Network",
                DeepArch::Cnn => "Convolutional Neural Network",
            };
            let report = MetricsReport {
                model: model_name.to_string(),
                variant: config.profile.name().to_string(),
                note_type: data.note_type,
                class_names: data.class_names.clone(),
                per_class: stage("evaluate", per_class_metrics(&matrix))?,
                kappa: stage("evaluate", cohen_kappa(&matrix))?,
            };
            Ok(RosterResult {
                report,
                wall_ms: start.elapsed().as_millis(),
                artifact: ModelArtifact::Deep(Box::new(trained)),
                file_stem: match arch {
                    DeepArch::Lstm => "lstm".to_string(),
                    DeepArch::Cnn => "cnn".to_string(),
                },
            })
        }
    }
}

fn load_corpus(config: &ExperimentConfig) -> Result<Corpus, ExperimentError> {
    match &config.source {
        CorpusSource::Files { notes, codes } => {
            let notes = stage("load-corpus", load_notes_jsonl(notes))?;
            let codes = match codes {
                Some(path) => stage("load-corpus", load_codes_jsonl(path))?,
                None => Vec::new(),
            };
            stage("load-corpus", Corpus::new(notes, codes))
        }
        CorpusSource::Synthetic { spec, code_plan } => {
            let corpus = stage("gen-corpus", generate_synthetic_corpus(spec))?;
            match code_plan {
                Some(plan) => stage("attach-codes", attach_code_fixture(corpus, *plan)),
                None => Ok(corpus),
            }
        }
    }
}

fn write_file(stage_name: &'static str, path: &Path, content: &[u8]) -> Result<(), ExperimentError> {
    stage(stage_name, fs::write(path, content))
}

/// Runs the whole experiment and writes reports, models and a manifest into
/// the output directory. Reruns with an identical config produce
/// byte-identical report files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config.validate()?;
    let out = &config.output_dir;
    if out.exists() && !config.overwrite {
        let occupied = stage("output-dir", fs::read_dir(out))?.next().is_some();
        if occupied {
            return Err(ExperimentError {
                stage: "output-dir",
                message: format!("{} exists and is not empty (use overwrite)", out.display()),
            });
        }
    }
    stage("output-dir", fs::create_dir_all(out.join("models")))?;

    let manifest_path = out.join("manifest.json");
    let mut manifest = Manifest {
        config: config.clone(),
        config_hash: config_hash(config),
        completed: false,
        rows: Vec::new(),
    };
    write_file(
        "manifest",
        &manifest_path,
        &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;

    // Corpus, prefilter, split.
    let corpus = load_corpus(config)?;
    let keywords = config
        .prefilter_keywords
        .clone()
        .unwrap_or_else(default_keywords);
    let filtered = if keywords.is_empty() {
        corpus.clone()
    } else {
        prefilter_notes(&corpus, &keywords)
    };
    let split = stage(
        "split",
        split_dataset(&filtered, config.split, config.seed, config.stratified),
    )?;

    // Preprocess: stem/tokenize once, then derive features per representation.
    let tokens: Vec<Vec<String>> = filtered.notes.iter().map(|n| preprocess_text(&n.text)).collect();
    let labels: Vec<usize> = filtered.notes.iter().map(|n| n.label.class_index()).collect();
    let in_subset = |ids: &std::collections::BTreeSet<String>| -> Vec<usize> {
        filtered
            .notes
            .iter()
            .enumerate()
            .filter(|(_, n)| ids.contains(&n.id))
            .map(|(i, _)| i)
            .collect()
    };
    let train_idx = in_subset(&split.train);
    let val_idx = in_subset(&split.validation);
    let test_idx = in_subset(&split.test);
    let pick =
        |idx: &[usize], items: &[Vec<String>]| -> Vec<Vec<String>> { idx.iter().map(|&i| items[i].clone()).collect() };
    let train_tokens = pick(&train_idx, &tokens);

    let mut bow = BTreeMap::new();
    for &order in &config.ngram_orders {
        if bow.contains_key(&order) || config.classical_kinds.is_empty() {
            continue;
        }
        let ngram_config = stage("preprocess", NgramConfig::new(order))?;
        let vocab = stage("preprocess", NgramVocabulary::build(&train_tokens, ngram_config))?;
        let featurize = |idx: &[usize]| -> Vec<FeatureVector> {
            idx.iter().map(|&i| vectorize_bow(&tokens[i], &vocab)).collect()
        };
        let train_fv = featurize(&train_idx);
        let test_fv = featurize(&test_idx);
        bow.insert(order, (vocab, train_fv, test_fv));
    }

    let vocab_max = 3000;
    let vocab = stage("preprocess", Vocabulary::build(&train_tokens, vocab_max))?;
    let vocab_hash = vocabulary_hash(&vocab);
    if !config.deep_architectures.is_empty() {
        write_file(
            "preprocess",
            &out.join("vocabulary.json"),
            &serde_json::to_vec(&vocab).expect("vocabulary serializes"),
        )?;
    }
    let mut sequences = BTreeMap::new();
    for &arch in &config.deep_architectures {
        let seq_len = deep_arch_config(arch, config.profile, config.note_type, config.seed).seq_len();
        sequences.entry(seq_len).or_insert_with(|| {
            let encode = |idx: &[usize]| -> Vec<TokenSequence> {
                idx.iter()
                    .map(|&i| encode_sequence(&tokens[i], &vocab, seq_len))
                    .collect()
            };
            (encode(&train_idx), encode(&val_idx), encode(&test_idx))
        });
    }

    let data = PreparedData {
        note_type: config.note_type,
        class_names: class_names(config.note_type)
            .iter()
            .map(|s| s.to_string())
            .collect(),
        train_labels: train_idx.iter().map(|&i| labels[i]).collect(),
        val_labels: val_idx.iter().map(|&i| labels[i]).collect(),
        test_labels: test_idx.iter().map(|&i| labels[i]).collect(),
        bow,

        vocab_hash,
        sequences,
    };

    // Roster: classical kinds × n-gram orders, then deep architectures.
    let mut roster = Vec::new();
    for &kind in &config.classical_kinds {
        for &order in &config.ngram_orders {
            roster.push(RosterEntry::Classical { kind, order });
        }
    }
    for &arch in &config.deep_architectures {
        roster.push(RosterEntry::Deep(arch));
    }

    // Independent entries may train in parallel; results are collated by
    // roster position, so parallel and serial runs report identically.
    let threads = threads_cap().min(roster.len().max(1));
    let results: Vec<Option<Result<RosterResult, ExperimentError>>> = {
        let slots: Mutex<Vec<Option<Result<RosterResult, ExperimentError>>>> =
            Mutex::new((0..roster.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= roster.len() {
                        break;
                    }
                    let result = run_entry(&roster[i], i, config, &data);
                    slots.lock().expect("no poisoned slots").as_mut_slice()[i] = Some(result);
                });
            }
        });
        slots.into_inner().expect("threads joined")
    };

    let mut reports = Vec::new();
    for slot in results {
        let result = slot.expect("every roster entry ran")?;
        match &result.artifact {
            ModelArtifact::Classical(model) => {
                write_file(
                    "save-model",
                    &out.join("models").join(format!("{}.json", result.file_stem)),
                    &serde_json::to_vec(model.as_ref()).expect("model serializes"),
                )?;
            }
            ModelArtifact::Deep(model) => {
                stage(
                    "save-model",
                    save_model(
                        &out.join("models").join(format!("{}.aedm", result.file_stem)),
                        model.as_ref(),
                    ),
                )?;
            }
        }
        manifest.rows.push(ManifestRow {
            model: result.report.model.clone(),
            variant: result.report.variant.clone(),
            wall_ms: result.wall_ms,
        });
        reports.push(result.report);
    }

    let report_text = stage("render-report", render_report(&reports, config.format))?;
    let report_path = out.join(match config.format {
        ReportFormat::Markdown => "report.md",
        ReportFormat::Csv => "report.csv",
    });
    write_file("render-report", &report_path, report_text.as_bytes())?;

    let code_capture = if corpus.codes.is_empty() {
        None
    } else {
        let result = stage("compare-codes", code_capture_accuracy(&corpus, &corpus.codes))?;
        write_file(
            "compare-codes",
            &out.join("code_capture.json"),
            &serde_json::to_vec_pretty(&result).expect("capture serializes"),
        )?;
        Some(result)
    };

    manifest.completed = true;
    write_file(
        "manifest",
        &manifest_path,
        &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;

    Ok(ExperimentOutcome {
        report_path,
        manifest_path,
        reports,
        report_text,
        code_capture,
    })
}
