//! Command-line front end: wires corpus generation, prefiltering, splitting,
//! training, evaluation and code comparison into seeded, reproducible runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use aedetect_core::classical::{
    predict_classical, train_classical, ClassicalConfig, ClassicalModel, ClassicalModelKind,
};
use aedetect_core::corpus::{
    class_names, default_keywords, generate_synthetic_corpus, load_codes_jsonl, load_notes_jsonl,
    prefilter_notes, save_codes_jsonl, save_notes_jsonl, split_dataset, attach_code_fixture,
    CodePlan, Corpus, DatasetSplit, Note, NoteType, SplitRatios, SyntheticSpec,
};
use aedetect_core::dlmodels::{
    build_model, load_model, predict_batch, save_model, train_model, vocabulary_hash,
    ArchitectureConfig, CnnModelConfig, HeadKind, LstmModelConfig, ModelFragment, TrainConfig,
};
use aedetect_core::eval::{
    code_capture_accuracy, cohen_kappa, confusion_matrix, per_class_metrics, render_report,
    MetricsReport, ReportFormat,
};
use aedetect_core::experiment::{run_experiment, DeepArch, ExperimentConfig, ModelProfile};
use aedetect_core::numkit::finite_difference_check;
use aedetect_core::preprocess::{
    encode_sequence, preprocess_text, vectorize_bow, NgramConfig, NgramVocabulary, TokenSequence,
    Vocabulary,
};

#[derive(Parser)]
#[command(name = "aedetect", version, about = "Adverse-event detection from clinical narratives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Desk,
}

impl From<ProfileArg> for ModelProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Paper => ModelProfile::Paper,
            ProfileArg::Desk => ModelProfile::Desk,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Md,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Md => ReportFormat::Markdown,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus (notes.jsonl, optionally codes.jsonl).
    GenCorpus {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Keep only notes matching the keyword screen.
    Prefilter {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Write a seeded 80:10:10 train/validation/test split of note ids.
    Split {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train one model described by a JSON config into an artifact directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Evaluate a trained artifact on labelled notes and print a report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        notes: PathBuf,
        /// Restrict to the test subset of this split file.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a single note text file; prints one JSON line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        note: PathBuf,
    },
    /// Report code-capture accuracy of structured codes against gold labels.
    CompareCodes {
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        codes: PathBuf,
    },
    /// Verify analytic gradients against finite differences.
    GradCheck {
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// Run a full experiment from a JSON config.
    RunExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        overwrite: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct GenConfig {
    spec: SyntheticSpec,
    #[serde(default)]
    code_plan: Option<CodePlan>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelSpec {
    Classical {
        kind: ClassicalModelKind,
        ngram_order: usize,
    },
    Deep {
        arch: DeepArch,
    },
}

#[derive(Serialize, Deserialize)]
struct TrainSpec {
    notes: PathBuf,
    note_type: NoteType,
    model: ModelSpec,
    profile: ModelProfile,
    /// Split file from `aedetect split`; trains on everything when absent.
    #[serde(default)]
    split: Option<PathBuf>,
    seed: u64,
    train: TrainConfig,
    #[serde(default)]
    prefilter: bool,
}

/// Self-contained trained-artifact metadata, written next to the model file.
#[derive(Serialize, Deserialize)]
struct ArtifactMeta {
    note_type: NoteType,
    model: ModelSpec,
    profile: ModelProfile,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ClassicalArtifact {
    model: ClassicalModel,
    vocab: NgramVocabulary,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite && fs::read_dir(path)?.next().is_some() {
        bail!("{} exists and is not empty (use --overwrite)", path.display());
    }
    fs::create_dir_all(path)?;
    Ok(())
}

fn load_labelled(path: &Path, prefilter: bool) -> Result<Corpus> {
    let notes = load_notes_jsonl(path)?;
    let corpus = Corpus::new(notes, Vec::new())?;
    Ok(if prefilter {
        prefilter_notes(&corpus, &default_keywords())
    } else {
        corpus
    })
}

fn deep_arch(arch: DeepArch, profile: ModelProfile, note_type: NoteType, seed: u64) -> ArchitectureConfig {
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

fn gen_corpus(config: &Path, out: &Path, seed: Option<u64>, overwrite: bool) -> Result<()> {
    let mut gen: GenConfig = read_json(config)?;
    if let Some(seed) = seed {
        gen.spec.seed = seed;
    }
    ensure_dir(out, overwrite)?;
    let mut corpus = generate_synthetic_corpus(&gen.spec)?;
    if let Some(plan) = gen.code_plan {
        corpus = attach_code_fixture(corpus, plan)?;
    }
    save_notes_jsonl(&out.join("notes.jsonl"), &corpus.notes)?;
    if !corpus.codes.is_empty() {
        save_codes_jsonl(&out.join("codes.jsonl"), &corpus.codes)?;
    }
    eprintln!(
        "wrote {} notes ({} coded patients) to {}",
        corpus.notes.len(),
        corpus.codes.len(),
        out.display()
    );
    Ok(())
}

fn prefilter(notes: &Path, out: &Path, overwrite: bool) -> Result<()> {
    if out.exists() && !overwrite {
        bail!("{} exists (use --overwrite)", out.display());
    }
    let corpus = load_labelled(notes, false)?;
    let kept = prefilter_notes(&corpus, &default_keywords());
    save_notes_jsonl(out, &kept.notes)?;
    eprintln!("kept {} of {} notes", kept.notes.len(), corpus.notes.len());
    Ok(())
}

fn split(notes: &Path, out: &Path, seed: u64) -> Result<()> {
    let corpus = load_labelled(notes, false)?;
    let split = split_dataset(&corpus, SplitRatios::EIGHTY_TEN_TEN, seed, true)?;
    write_json(out, &split)?;
    eprintln!(
        "train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}

fn subset<'a>(notes: &'a [Note], ids: &std::collections::BTreeSet<String>) -> Vec<&'a Note> {
    notes.iter().filter(|n| ids.contains(&n.id)).collect()
}

fn train(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    profile: Option<ProfileArg>,
    overwrite: bool,
) -> Result<()> {
    let mut spec: TrainSpec = read_json(config)?;
    if let Some(seed) = seed {
        spec.seed = seed;
        spec.train.seed = seed;
    }
    if let Some(profile) = profile {
        spec.profile = profile.into();
    }
    ensure_dir(out, overwrite)?;
    let corpus = load_labelled(&spec.notes, spec.prefilter)?;
    let split: Option<DatasetSplit> = spec.split.as_deref().map(read_json).transpose()?;
    let (train_notes, val_notes) = match &split {
        Some(s) => (subset(&corpus.notes, &s.train), subset(&corpus.notes, &s.validation)),
        None => (corpus.notes.iter().collect(), Vec::new()),
    };
    let tokens = |notes: &[&Note]| -> Vec<Vec<String>> {
        notes.iter().map(|n| preprocess_text(&n.text)).collect()
    };
    let labels = |notes: &[&Note]| -> Vec<usize> {
        notes.iter().map(|n| n.label.class_index()).collect()
    };
    let train_tokens = tokens(&train_notes);
    let train_labels = labels(&train_notes);

    match &spec.model {
        ModelSpec::Classical { kind, ngram_order } => {
            let vocab = NgramVocabulary::build(&train_tokens, NgramConfig::new(*ngram_order)?)?;
            let features: Vec<_> = train_tokens.iter().map(|t| vectorize_bow(t, &vocab)).collect();
            let mut cc = ClassicalConfig::new(*kind, *ngram_order, spec.seed);
            cc.l2 = 0.01;
            let model = train_classical(&features, &train_labels, &cc)?;
            write_json(&out.join("classical.json"), &ClassicalArtifact { model, vocab })?;
        }
        ModelSpec::Deep { arch } => {
            let vocab = Vocabulary::build(&train_tokens, 3000)?;
            let arch_config = deep_arch(*arch, spec.profile, spec.note_type, spec.seed);
            let seq_len = arch_config.seq_len();
            let encode = |token_lists: &[Vec<String>]| -> Vec<TokenSequence> {
                token_lists.iter().map(|t| encode_sequence(t, &vocab, seq_len)).collect()
            };
            let mut model = build_model::<f64>(arch_config)?;
            model.vocab_hash = vocabulary_hash(&vocab);
            let trained = train_model(
                model,
                &encode(&train_tokens),
                &train_labels,
                &encode(&tokens(&val_notes)),
                &labels(&val_notes),
                &spec.train,
            )?;
            save_model(&out.join("model.aedm"), &trained)?;
            write_json(&out.join("vocabulary.json"), &vocab)?;
        }
    }
    write_json(
        &out.join("meta.json"),
        &ArtifactMeta {
            note_type: spec.note_type,
            model: spec.model,
            profile: spec.profile,
            seed: spec.seed,
        },
    )?;
    eprintln!("trained artifact written to {}", out.display());
    Ok(())
}

fn predict_texts(model_dir: &Path, texts: &[&str]) -> Result<(NoteType, Vec<usize>, Vec<Vec<f64>>)> {
    let meta: ArtifactMeta = read_json(&model_dir.join("meta.json"))?;
    let token_lists: Vec<Vec<String>> = texts.iter().map(|t| preprocess_text(t)).collect();
    let mut classes = Vec::with_capacity(texts.len());
    let mut probabilities = Vec::with_capacity(texts.len());
    match &meta.model {
        ModelSpec::Classical { .. } => {
            let artifact: ClassicalArtifact = read_json(&model_dir.join("classical.json"))?;
            for tokens in &token_lists {
                let p = predict_classical(&artifact.model, &vectorize_bow(tokens, &artifact.vocab))?;
                classes.push(p.class);
                probabilities.push(p.scores);
            }
        }
        ModelSpec::Deep { .. } => {
            let vocab: Vocabulary = read_json(&model_dir.join("vocabulary.json"))?;
            let model =
                load_model::<f64>(&model_dir.join("model.aedm"), Some(&vocabulary_hash(&vocab)))?;
            let seq_len = model.arch.seq_len();
            let sequences: Vec<TokenSequence> = token_lists
                .iter()
                .map(|t| encode_sequence(t, &vocab, seq_len))
                .collect();
            for p in predict_batch(&model, &sequences)? {
                classes.push(p.class);
                probabilities.push(p.probabilities);
            }
        }
    }
    Ok((meta.note_type, classes, probabilities))
}

fn eval(
    model_dir: &Path,
    notes: &Path,
    split: Option<&Path>,
    format: FormatArg,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = load_labelled(notes, false)?;
    let split: Option<DatasetSplit> = split.map(read_json).transpose()?;
    let selected = match &split {
        Some(s) => subset(&corpus.notes, &s.test),
        None => corpus.notes.iter().collect(),
    };
    if selected.is_empty() {
        bail!("no notes selected for evaluation");
    }
    let texts: Vec<&str> = selected.iter().map(|n| n.text.as_str()).collect();
    let (note_type, predictions, _) = predict_texts(model_dir, &texts)?;
    let gold: Vec<usize> = selected.iter().map(|n| n.label.class_index()).collect();
    let names = class_names(note_type);
    let matrix = confusion_matrix(&gold, &predictions, names)?;
    let meta: ArtifactMeta = read_json(&model_dir.join("meta.json"))?;
    let (model_name, variant) = match &meta.model {
        ModelSpec::Classical { kind, ngram_order } => {
            (kind.display_name().to_string(), format!("{ngram_order}-gram"))
        }
        ModelSpec::Deep { arch } => (
            match arch {
                DeepArch::Lstm => "Long Short-Term Memory Network".to_string(),
                DeepArch::Cnn => "Convolutional Neural Network".to_string(),
            },
            meta.profile.name().to_string(),
        ),
    };
    let report = MetricsReport {
        model: model_name,
        variant,
        note_type,
        class_names: names.iter().map(|s| s.to_string()).collect(),
        per_class: per_class_metrics(&matrix)?,
        kappa: cohen_kappa(&matrix)?,
    };
    let rendered = render_report(std::slice::from_ref(&report), format.into())?;
    match out {
        Some(path) => fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn predict_one(model_dir: &Path, note: &Path) -> Result<()> {
    let text = fs::read_to_string(note).with_context(|| format!("reading {}", note.display()))?;
    let (note_type, classes, probabilities) = predict_texts(model_dir, &[text.as_str()])?;
    let label = class_names(note_type)[classes[0]];
    let line = serde_json::json!({
        "label": label,
        "class": classes[0],
        "probabilities": probabilities[0],
    });
    println!("{line}");
    Ok(())
}

fn compare_codes(notes: &Path, codes: &Path) -> Result<()> {
    let notes = load_notes_jsonl(notes)?;
    let codes = load_codes_jsonl(codes)?;
    let corpus = Corpus::new(notes, codes)?;
    let result = code_capture_accuracy(&corpus, &corpus.codes)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn small_cnn(head: HeadKind, seed: u64) -> CnnModelConfig {
    CnnModelConfig {
        embedding_dim: 8,
        vocab_max: 10,
        seq_len: 12,
        conv1: aedetect_core::dlmodels::ConvSpec { kernel: 3, stride: 1, filters: 4 },
        conv2: aedetect_core::dlmodels::ConvSpec { kernel: 5, stride: 1, filters: 4 },
        dense_hidden: 5,
        head,
        seed,
    }
}

fn grad_check(seed: u64) -> Result<()> {
    let sequences = |seq_len: usize, n: usize| -> Vec<TokenSequence> {
        (0..n)
            .map(|i| TokenSequence {
                indices: (0..seq_len).map(|t| (i * 3 + t) % 10).collect(),
                original_length: seq_len,
            })
            .collect()
    };
    let checks: Vec<(&str, ArchitectureConfig, usize, Vec<usize>)> = vec![
        (
            "bilstm-softmax",
            ArchitectureConfig::Lstm(LstmModelConfig {
                embedding_dim: 8,
                vocab_max: 10,
                seq_len: 6,
                bilstm1_hidden: 4,
                bilstm2_hidden: 4,
                dropout: 0.2,
                recurrent_dropout: 0.4,
                dense_hidden: 5,
                head: HeadKind::Softmax { classes: 3 },
                seed,
            }),
            6,
            vec![0, 1, 2],
        ),
        (
            "cnn-softmax",
            ArchitectureConfig::Cnn(small_cnn(HeadKind::Softmax { classes: 3 }, seed)),
            12,
            vec![0, 1, 2],
        ),
        (
            "cnn-sigmoid",
            ArchitectureConfig::Cnn(small_cnn(HeadKind::Sigmoid, seed)),
            12,
            vec![0, 1, 1],
        ),
    ];
    let mut failed = false;
    for (name, arch, seq_len, labels) in checks {
        let model = build_model::<f64>(arch)?;
        let seqs = sequences(seq_len, labels.len());
        let mut fragment = ModelFragment::new(model, &seqs, &labels)?;
        let report = finite_difference_check(&mut fragment, 1e-5)?;
        let ok = report.max_relative_error < 1e-4;
        failed |= !ok;
        println!(
            "{name}: max relative error {:.3e} at {}[{}] {}",
            report.max_relative_error,
            report.worst_param,
            report.worst_coordinate,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed {
        bail!("gradient check failed");
    }
    Ok(())
}

fn run_experiment_cmd(
    config: &Path,
    seed: Option<u64>,
    profile: Option<ProfileArg>,
    format: Option<FormatArg>,
    out: Option<PathBuf>,
    overwrite: bool,
) -> Result<()> {
    let mut experiment: ExperimentConfig = read_json(config)?;
    if let Some(seed) = seed {
        experiment.seed = seed;
        experiment.train.seed = seed;
    }
    if let Some(profile) = profile {
        experiment.profile = profile.into();
    }
    if let Some(format) = format {
        experiment.format = format.into();
    }
    if let Some(out) = out {
        experiment.output_dir = out;
    }
    if overwrite {
        experiment.overwrite = true;
    }
    let outcome = run_experiment(&experiment)?;
    eprintln!("report: {}", outcome.report_path.display());
    if let Some(capture) = &outcome.code_capture {
        eprintln!(
            "code capture: {:.2}% of {} AE patients",
            capture.capture_pct, capture.total_ae_patients
        );
    }
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::GenCorpus { config, out, seed, overwrite } => {
            gen_corpus(&config, &out, seed, overwrite)
        }
        Command::Prefilter { notes, out, overwrite } => prefilter(&notes, &out, overwrite),
        Command::Split { notes, out, seed } => split(&notes, &out, seed),
        Command::Train { config, out, seed, profile, overwrite } => {
            train(&config, &out, seed, profile, overwrite)
        }
        Command::Eval { model, notes, split, format, out } => {
            eval(&model, &notes, split.as_deref(), format, out.as_deref())
        }
        Command::Predict { model, note } => predict_one(&model, &note),
        Command::CompareCodes { notes, codes } => compare_codes(&notes, &codes),
        Command::GradCheck { seed } => grad_check(seed),
        Command::RunExperiment { config, seed, profile, format, out, overwrite } => {
            run_experiment_cmd(&config, seed, profile, format, out, overwrite)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
