//! Confusion matrices, per-class recall/precision, Cohen's Kappa, report
//! rendering and the structured-code capture analysis.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{patient_ae_profiles, CodeRecord, Corpus, NoteType};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("label lists differ in length: {gold} gold, {predicted} predicted")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("label {label} outside the {classes}-class order")]
    UnknownLabel { label: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("adverse-event patient set is empty")]
    EmptyAeSet,
    #[error("report list is empty")]
    EmptyReportList,
}

/// Square count matrix: rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_total(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_total(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

/// Cell (i, j) counts notes with gold class i predicted as class j.
pub fn confusion_matrix(
    gold: &[usize],
    predicted: &[usize],
    class_names: &[&str],
) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let classes = class_names.len();
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&g, &p) in gold.iter().zip(predicted) {
        for label in [g, p] {
            if label >= classes {
                return Err(EvalError::UnknownLabel { label, classes });
            }
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: class_names.iter().map(|s| s.to_string()).collect(),
    })
}

/// One class's recall and precision in percent. A zero denominator yields a
/// defined 0.0 with the corresponding flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall_pct: f64,
    pub precision_pct: f64,
    /// True when the class never occurs in the gold labels.
    pub no_gold_examples: bool,
    /// True when the class is never predicted.
    pub never_predicted: bool,
}

pub fn per_class_metrics(m: &ConfusionMatrix) -> Result<Vec<ClassMetrics>, EvalError> {
    if m.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok((0..m.size())
        .map(|c| {
            let hit = m.counts[c][c] as f64;
            let row = m.row_total(c);
            let col = m.col_total(c);
            ClassMetrics {
                recall_pct: if row == 0 { 0.0 } else { 100.0 * hit / row as f64 },
                precision_pct: if col == 0 { 0.0 } else { 100.0 * hit / col as f64 },
                no_gold_examples: row == 0,
                never_predicted: col == 0,
            }
        })
        .collect())
}

/// Unweighted Cohen's Kappa. When expected agreement is 1 (all mass in one
/// agreed cell) the value is defined as 1.0 for perfect observed agreement
/// and 0.0 otherwise.
pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = m.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let total = total as f64;
    let p_o = m.trace() as f64 / total;
    let p_e = (0..m.size())
        .map(|c| m.row_total(c) as f64 * m.col_total(c) as f64)
        .sum::<f64>()
        / (total * total);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if (1.0 - p_o).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Table-shaped metrics for one trained model on one note type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    /// N-gram order label ("Unigram", "2-gram", "3-gram") or a deep-model
    /// variant tag; empty when not applicable.
    pub variant: String,
    pub note_type: NoteType,
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub kappa: f64,
}

/// Outcome of the structured-code capture analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeCaptureResult {
    pub total_ae_patients: usize,
    pub coded_ae_patients: usize,
    pub capture_pct: f64,
    pub uncoded_telephone_only: usize,
    pub uncoded_radiology_only: usize,
    pub uncoded_both: usize,
}

/// A patient is captured if any relevant code exists for them; uncoded
/// patients are attributed by which note source(s) evidence their AE.
pub fn code_capture_accuracy(
    corpus: &Corpus,
    codes: &[CodeRecord],
) -> Result<CodeCaptureResult, EvalError> {
    let profiles = patient_ae_profiles(corpus);
    if profiles.is_empty() {
        return Err(EvalError::EmptyAeSet);
    }
    let coded: BTreeSet<&str> = codes
        .iter()
        .filter(|c| c.is_dislocation_relevant())
        .map(|c| c.patient_id.as_str())
        .collect();
    let mut result = CodeCaptureResult {
        total_ae_patients: profiles.len(),
        coded_ae_patients: 0,
        capture_pct: 0.0,
        uncoded_telephone_only: 0,
        uncoded_radiology_only: 0,
        uncoded_both: 0,
    };
    for (patient, sources) in &profiles {
        if coded.contains(patient.as_str()) {
            result.coded_ae_patients += 1;
        } else if sources.telephone_only() {
            result.uncoded_telephone_only += 1;
        } else if sources.radiology_only() {
            result.uncoded_radiology_only += 1;
        } else {
            result.uncoded_both += 1;
        }
    }
    result.capture_pct = 100.0 * result.coded_ae_patients as f64 / result.total_ae_patients as f64;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.1}")
}

fn fmt_kappa(v: f64) -> String {
    format!("{v:.2}")
}

/// One row per (model, variant): per-class recall and precision columns plus
/// Kappa. Recall/precision render to one decimal, Kappa to two.
pub fn render_report(reports: &[MetricsReport], format: ReportFormat) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyReportList);
    }
    let class_names = &reports[0].class_names;
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let mut header = String::from("| Model | Variant |");
            let mut rule = String::from("| --- | --- |");
            for name in class_names {
                header.push_str(&format!(" {name} recall [%] | {name} precision [%] |"));
                rule.push_str(" --- | --- |");
            }
            header.push_str(" Kappa |");
            rule.push_str(" --- |");
            out.push_str(&header);
            out.push('\n');
            out.push_str(&rule);
            out.push('\n');
            for r in reports {
                out.push_str(&format!("| {} | {} |", r.model, r.variant));
                for m in &r.per_class {
                    out.push_str(&format!(
                        " {} | {} |",
                        fmt_pct(m.recall_pct),
                        fmt_pct(m.precision_pct)
                    ));
                }
                out.push_str(&format!(" {} |\n", fmt_kappa(r.kappa)));
            }
        }
        ReportFormat::Csv => {
            out.push_str("model,variant,class,recall_pct,precision_pct,kappa\n");
            for r in reports {
                for (name, m) in r.class_names.iter().zip(&r.per_class) {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.model,
                        r.variant,
                        name,
                        fmt_pct(m.recall_pct),
                        fmt_pct(m.precision_pct),
                        fmt_kappa(r.kappa)
                    ));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const RADIOLOGY_CLASSES: [&str; 3] = [
        "no_dislocation",
        "current_dislocation",
        "evidence_previous_dislocation",
    ];

    fn matrix(counts: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix {
            counts: counts.iter().map(|r| r.to_vec()).collect(),
            class_names: (0..counts.len()).map(|i| format!("c{i}")).collect(),
        }
    }

    // CNN radiology confusion matrix reconstructed from the published
    // per-class results with class sizes 263/25/13.
    fn cnn_matrix() -> ConfusionMatrix {
        matrix(&[&[263, 0, 0], &[1, 24, 0], &[0, 1, 12]])
    }

    #[test]
    fn confusion_matrix_hand_count() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], &["a", "b"]).unwrap();
        assert_eq!(m.counts, vec![vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn confusion_matrix_perfect_predictions_diagonal() {
        let m = confusion_matrix(&[0, 1, 2, 1], &[0, 1, 2, 1], &RADIOLOGY_CLASSES).unwrap();
        assert_eq!(m.trace(), m.total());
    }

    #[test]
    fn confusion_matrix_rejects_unknown_label() {
        assert!(matches!(
            confusion_matrix(&[0, 3], &[0, 0], &RADIOLOGY_CLASSES),
            Err(EvalError::UnknownLabel { label: 3, .. })
        ));
    }

    #[test]
    fn empty_input_gives_zero_matrix_and_metrics_error() {
        let m = confusion_matrix(&[], &[], &RADIOLOGY_CLASSES).unwrap();
        assert_eq!(m.total(), 0);
        assert!(per_class_metrics(&m).is_err());
        assert!(cohen_kappa(&m).is_err());
    }

    #[test]
    fn cnn_row_metrics_match_published_values() {
        let metrics = per_class_metrics(&cnn_matrix()).unwrap();
        let recalls: Vec<String> = metrics.iter().map(|m| fmt_pct(m.recall_pct)).collect();
        let precisions: Vec<String> = metrics.iter().map(|m| fmt_pct(m.precision_pct)).collect();
        assert_eq!(recalls, vec!["100.0", "96.0", "92.3"]);
        assert_eq!(precisions, vec!["99.6", "96.0", "100.0"]);
    }

    #[test]
    fn cnn_matrix_kappa_is_0_97() {
        let kappa = cohen_kappa(&cnn_matrix()).unwrap();
        assert!((kappa - 0.9705).abs() < 5e-5, "kappa {kappa}");
        assert_eq!(fmt_kappa(kappa), "0.97");
    }

    #[test]
    fn degenerate_majority_classifier_row() {
        let m = matrix(&[&[263, 0, 0], &[25, 0, 0], &[13, 0, 0]]);
        let metrics = per_class_metrics(&m).unwrap();
        assert_eq!(fmt_pct(metrics[0].recall_pct), "100.0");
        assert_eq!(fmt_pct(metrics[0].precision_pct), "87.4");
        assert_eq!(fmt_pct(metrics[1].recall_pct), "0.0");
        assert!(metrics[1].never_predicted);
        assert!(metrics[2].never_predicted);
        assert_eq!(fmt_kappa(cohen_kappa(&m).unwrap()), "0.00");
    }

    #[test]
    fn two_class_kappa_hand_value() {
        let m = matrix(&[&[45, 5], &[10, 40]]);
        assert!((cohen_kappa(&m).unwrap() - 0.70).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix_kappa_is_exactly_one() {
        let m = matrix(&[&[12, 0], &[0, 30]]);
        assert_eq!(cohen_kappa(&m).unwrap(), 1.0);
        let metrics = per_class_metrics(&m).unwrap();
        assert!(metrics
            .iter()
            .all(|c| c.recall_pct == 100.0 && c.precision_pct == 100.0));
    }

    #[test]
    fn single_agreed_cell_kappa_edge() {
        let m = matrix(&[&[7, 0], &[0, 0]]);
        assert_eq!(cohen_kappa(&m).unwrap(), 1.0);
        let disagreeing = matrix(&[&[0, 7], &[0, 0]]);
        // All predicted mass in one class, all gold in another: p_e < 1.
        assert!(cohen_kappa(&disagreeing).unwrap() < 0.0 || cohen_kappa(&disagreeing).unwrap() == 0.0);
    }

    #[test]
    fn kappa_invariant_under_class_permutation() {
        let m = matrix(&[&[50, 3, 2], &[4, 30, 1], &[2, 2, 20]]);
        // Swap classes 0 and 2 in both axes.
        let permuted = matrix(&[&[20, 2, 2], &[1, 30, 4], &[2, 3, 50]]);
        assert!((cohen_kappa(&m).unwrap() - cohen_kappa(&permuted).unwrap()).abs() < 1e-12);
    }

    // Brute force over explicit marginal products, written independently of
    // the production formula.
    fn kappa_brute(m: &ConfusionMatrix) -> f64 {
        let n: u64 = m.counts.iter().flatten().sum();
        let mut agree = 0u64;
        let mut expected = 0.0;
        for c in 0..m.size() {
            agree += m.counts[c][c];
            let row: u64 = m.counts[c].iter().sum();
            let col: u64 = m.counts.iter().map(|r| r[c]).sum();
            expected += (row as f64 / n as f64) * (col as f64 / n as f64);
        }
        let observed = agree as f64 / n as f64;
        if (1.0 - expected).abs() < 1e-15 {
            return if (1.0 - observed).abs() < 1e-15 { 1.0 } else { 0.0 };
        }
        (observed - expected) / (1.0 - expected)
    }

    #[test]
    fn kappa_matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..1000 {
            let size = rng.gen_range(2..=5);
            let counts: Vec<Vec<u64>> = (0..size)
                .map(|_| (0..size).map(|_| rng.gen_range(0..40)).collect())
                .collect();
            if counts.iter().flatten().sum::<u64>() == 0 {
                continue;
            }
            let m = ConfusionMatrix {
                counts,
                class_names: (0..size).map(|i| format!("c{i}")).collect(),
            };
            assert!((cohen_kappa(&m).unwrap() - kappa_brute(&m)).abs() < 1e-12);
        }
    }

    #[test]
    fn rendering_formats_match_published_rounding() {
        assert_eq!(fmt_kappa(0.9705), "0.97");
        assert_eq!(fmt_pct(92.30769), "92.3");
    }

    #[test]
    fn markdown_report_has_one_row_per_model() {
        let report = MetricsReport {
            model: "Convolutional Neural Network".into(),
            variant: String::new(),
            note_type: NoteType::Radiology,
            class_names: RADIOLOGY_CLASSES.iter().map(|s| s.to_string()).collect(),
            per_class: per_class_metrics(&cnn_matrix()).unwrap(),
            kappa: cohen_kappa(&cnn_matrix()).unwrap(),
        };
        let md = render_report(std::slice::from_ref(&report), ReportFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains("92.3"));
        assert!(lines[2].contains("0.97"));
        // 6 metric columns + Kappa for radiology.
        assert_eq!(lines[0].matches('%').count(), 6);

        let csv = render_report(std::slice::from_ref(&report), ReportFormat::Csv).unwrap();
        let csv_lines: Vec<&str> = csv.lines().collect();
        assert_eq!(csv_lines[0], "model,variant,class,recall_pct,precision_pct,kappa");
        assert_eq!(csv_lines.len(), 4);
    }

    #[test]
    fn empty_report_list_rejected() {
        assert!(render_report(&[], ReportFormat::Csv).is_err());
    }

    mod capture {
        use super::*;
        use crate::corpus::{
            attach_code_fixture, CodePlan, Note, NoteLabel, RadiologyLabel, TelephoneLabel,
        };

        fn fixture() -> Corpus {
            let mut notes = Vec::new();
            let mut serial = 0;
            let mut push = |patient: String, note_type: NoteType, label: NoteLabel| {
                serial += 1;
                notes.push(
                    Note::new(
                        format!("n{serial:04}"),
                        patient,
                        note_type,
                        "hip dislocation reduced",
                        label,
                    )
                    .unwrap(),
                );
            };
            for i in 0..40 {
                push(
                    format!("tel{i:03}"),
                    NoteType::Telephone,
                    NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation),
                );
            }
            for i in 0..50 {
                push(
                    format!("rad{i:03}"),
                    NoteType::Radiology,
                    NoteLabel::Radiology(RadiologyLabel::CurrentDislocation),
                );
            }
            for i in 0..15 {
                push(
                    format!("mix{i:03}"),
                    NoteType::Radiology,
                    NoteLabel::Radiology(RadiologyLabel::EvidencePreviousDislocation),
                );
                push(
                    format!("mix{i:03}"),
                    NoteType::Telephone,
                    NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation),
                );
            }
            Corpus::new(notes, vec![]).unwrap()
        }

        #[test]
        fn paper_plan_reproduces_75_24_percent_and_attribution() {
            let plan = CodePlan {
                uncoded_telephone_only: 16,
                uncoded_radiology_only: 7,
                uncoded_both: 3,
            };
            let corpus = attach_code_fixture(fixture(), plan).unwrap();
            let result = code_capture_accuracy(&corpus, &corpus.codes).unwrap();
            assert_eq!(result.total_ae_patients, 105);
            assert_eq!(result.coded_ae_patients, 79);
            assert!((result.capture_pct - 75.24).abs() < 0.01);
            assert_eq!(
                (
                    result.uncoded_telephone_only,
                    result.uncoded_radiology_only,
                    result.uncoded_both
                ),
                (16, 7, 3)
            );
        }

        #[test]
        fn fully_coded_fixture_captures_100_percent() {
            let corpus = attach_code_fixture(fixture(), CodePlan::default()).unwrap();
            let result = code_capture_accuracy(&corpus, &corpus.codes).unwrap();
            assert_eq!(result.capture_pct, 100.0);
            assert_eq!(
                (
                    result.uncoded_telephone_only,
                    result.uncoded_radiology_only,
                    result.uncoded_both
                ),
                (0, 0, 0)
            );
        }

        #[test]
        fn empty_ae_set_rejected() {
            let notes = vec![Note::new(
                "n1",
                "p1",
                NoteType::Radiology,
                "no dislocation",
                NoteLabel::Radiology(RadiologyLabel::NoDislocation),
            )
            .unwrap()];
            let corpus = Corpus::new(notes, vec![]).unwrap();
            assert!(matches!(
                code_capture_accuracy(&corpus, &[]),
                Err(EvalError::EmptyAeSet)
            ));
        }
    }
}
