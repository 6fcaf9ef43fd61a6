//! Data model, JSON-Lines persistence, keyword prefiltering, seeded
//! synthetic-note generation and split validation.

mod codes;
mod io;
mod split;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use codes::{attach_code_fixture, patient_ae_profiles, AeSources, CodePlan};
pub use io::{load_codes_jsonl, load_notes_jsonl, save_codes_jsonl, save_notes_jsonl};
pub use split::{split_dataset, DatasetSplit, SplitRatios};
pub use synthetic::{generate_synthetic_corpus, SyntheticSpec};

/// Keyword screen from the cohort-selection procedure.
pub const DEFAULT_PREFILTER_KEYWORDS: [&str; 5] = ["disloc", "sublux", "reduc", "reloc", "displace"];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    MalformedLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: telephone notes cannot carry the current_dislocation label (note {id})")]
    LabelTypeMismatch { line: usize, id: String },
    #[error("note {id}: text is empty")]
    EmptyText { id: String },
    #[error("duplicate note id {id}")]
    DuplicateNoteId { id: String },
    #[error("unknown {field} value {value:?}")]
    UnknownEnumValue { field: &'static str, value: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("synthetic spec invalid: {0}")]
    InvalidSpec(String),
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("stratified split requires every class present; missing {class} for {note_type:?}")]
    MissingClass { class: String, note_type: NoteType },
    #[error("code plan needs {needed} {profile} patients but corpus has {available}")]
    PlanExceedsPatients {
        profile: &'static str,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteType {
    Radiology,
    Telephone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiologyLabel {
    NoDislocation,
    CurrentDislocation,
    EvidencePreviousDislocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TelephoneLabel {
    NoDislocation,
    EvidencePreviousDislocation,
}

/// Gold label, tagged by note type: radiology notes carry a 3-way label,
/// telephone notes a 2-way label (telephone follow-ups never see a current
/// dislocation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NoteLabel {
    Radiology(RadiologyLabel),
    Telephone(TelephoneLabel),
}

impl NoteLabel {
    pub fn note_type(&self) -> NoteType {
        match self {
            NoteLabel::Radiology(_) => NoteType::Radiology,
            NoteLabel::Telephone(_) => NoteType::Telephone,
        }
    }

    /// Dense class index in the fixed class order
    /// (no_dislocation, current_dislocation, evidence_previous_dislocation)
    /// for radiology, (no_dislocation, evidence_previous_dislocation) for
    /// telephone.
    pub fn class_index(&self) -> usize {
        match self {
            NoteLabel::Radiology(RadiologyLabel::NoDislocation) => 0,
            NoteLabel::Radiology(RadiologyLabel::CurrentDislocation) => 1,
            NoteLabel::Radiology(RadiologyLabel::EvidencePreviousDislocation) => 2,
            NoteLabel::Telephone(TelephoneLabel::NoDislocation) => 0,
            NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation) => 1,
        }
    }

    pub fn from_class_index(note_type: NoteType, index: usize) -> Option<NoteLabel> {
        match (note_type, index) {
            (NoteType::Radiology, 0) => Some(NoteLabel::Radiology(RadiologyLabel::NoDislocation)),
            (NoteType::Radiology, 1) => {
                Some(NoteLabel::Radiology(RadiologyLabel::CurrentDislocation))
            }
            (NoteType::Radiology, 2) => Some(NoteLabel::Radiology(
                RadiologyLabel::EvidencePreviousDislocation,
            )),
            (NoteType::Telephone, 0) => Some(NoteLabel::Telephone(TelephoneLabel::NoDislocation)),
            (NoteType::Telephone, 1) => Some(NoteLabel::Telephone(
                TelephoneLabel::EvidencePreviousDislocation,
            )),
            _ => None,
        }
    }

    /// True for any dislocation-positive label.
    pub fn indicates_dislocation(&self) -> bool {
        self.class_index() != 0
    }

    pub fn as_wire_str(&self) -> &'static str {
        match self {
            NoteLabel::Radiology(RadiologyLabel::NoDislocation)
            | NoteLabel::Telephone(TelephoneLabel::NoDislocation) => "no_dislocation",
            NoteLabel::Radiology(RadiologyLabel::CurrentDislocation) => "current_dislocation",
            NoteLabel::Radiology(RadiologyLabel::EvidencePreviousDislocation)
            | NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation) => {
                "evidence_previous_dislocation"
            }
        }
    }
}

/// Display names per note type, in class-index order.
pub fn class_names(note_type: NoteType) -> &'static [&'static str] {
    match note_type {
        NoteType::Radiology => &[
            "no_dislocation",
            "current_dislocation",
            "evidence_previous_dislocation",
        ],
        NoteType::Telephone => &["no_dislocation", "evidence_previous_dislocation"],
    }
}

/// One free-text medical narrative with its gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub id: String,
    pub patient_id: String,
    pub note_type: NoteType,
    pub text: String,
    pub label: NoteLabel,
}

impl Note {
    pub fn new(
        id: impl Into<String>,
        patient_id: impl Into<String>,
        note_type: NoteType,
        text: impl Into<String>,
        label: NoteLabel,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = text.into();
        if text.is_empty() {
            return Err(CorpusError::EmptyText { id });
        }
        if label.note_type() != note_type {
            return Err(CorpusError::LabelTypeMismatch { line: 0, id });
        }
        Ok(Note {
            id,
            patient_id: patient_id.into(),
            note_type,
            text,
            label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeSystem {
    #[serde(rename = "CPT")]
    Cpt,
    #[serde(rename = "ICD10")]
    Icd10,
}

/// Patient-level structured code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub patient_id: String,
    pub code_system: CodeSystem,
    pub code: String,
}

/// The 8 codes indicating a post-arthroplasty hip dislocation.
pub const RELEVANT_CODES: [(CodeSystem, &str); 8] = [
    (CodeSystem::Cpt, "27265"),
    (CodeSystem::Cpt, "27266"),
    (CodeSystem::Icd10, "T84.020A"),
    (CodeSystem::Icd10, "T84.020D"),
    (CodeSystem::Icd10, "T84.020S"),
    (CodeSystem::Icd10, "T84.021A"),
    (CodeSystem::Icd10, "T84.021D"),
    (CodeSystem::Icd10, "T84.021S"),
];

impl CodeRecord {
    /// True exactly for the 8 dislocation codes.
    pub fn is_dislocation_relevant(&self) -> bool {
        RELEVANT_CODES
            .iter()
            .any(|(sys, code)| *sys == self.code_system && *code == self.code)
    }
}

/// Ordered note collection with patient-level codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub notes: Vec<Note>,
    pub codes: Vec<CodeRecord>,
}

impl Corpus {
    pub fn new(notes: Vec<Note>, codes: Vec<CodeRecord>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for note in &notes {
            if !seen.insert(note.id.as_str()) {
                return Err(CorpusError::DuplicateNoteId {
                    id: note.id.clone(),
                });
            }
        }
        Ok(Corpus { notes, codes })
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn note_ids(&self) -> Vec<&str> {
        self.notes.iter().map(|n| n.id.as_str()).collect()
    }

    /// Notes in corpus order whose id is in `ids`.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Corpus {
        Corpus {
            notes: self
                .notes
                .iter()
                .filter(|n| ids.contains(&n.id))
                .cloned()
                .collect(),
            codes: self.codes.clone(),
        }
    }

    /// Per-class note counts in class-index order, keyed by note type.
    pub fn class_counts(&self) -> BTreeMap<NoteType, Vec<usize>> {
        let mut out = BTreeMap::new();
        for note in &self.notes {
            let counts = out
                .entry(note.note_type)
                .or_insert_with(|| vec![0usize; class_names(note.note_type).len()]);
            counts[note.label.class_index()] += 1;
        }
        out
    }
}

/// Retains only notes whose case-folded text contains at least one keyword
/// as a substring; order preserved. Idempotent by construction.
pub fn prefilter_notes(corpus: &Corpus, keywords: &[String]) -> Corpus {
    let lowered: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    Corpus {
        notes: corpus
            .notes
            .iter()
            .filter(|note| {
                let text = note.text.to_lowercase();
                lowered.iter().any(|k| text.contains(k))
            })
            .cloned()
            .collect(),
        codes: corpus.codes.clone(),
    }
}

/// The default keyword list as owned strings.
pub fn default_keywords() -> Vec<String> {
    DEFAULT_PREFILTER_KEYWORDS
        .iter()
        .map(|k| k.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radiology_note(id: &str, text: &str, label: RadiologyLabel) -> Note {
        Note::new(id, format!("P{id}"), NoteType::Radiology, text, NoteLabel::Radiology(label))
            .unwrap()
    }

    #[test]
    fn telephone_current_dislocation_rejected() {
        let err = Note::new(
            "t1",
            "p1",
            NoteType::Telephone,
            "some text",
            NoteLabel::Radiology(RadiologyLabel::CurrentDislocation),
        );
        assert!(err.is_err());
    }

    #[test]
    fn prefilter_keeps_keyword_notes_and_drops_others() {
        let corpus = Corpus::new(
            vec![
                radiology_note(
                    "r1",
                    "the radiograph shows a dislocated hip arthroplasty",
                    RadiologyLabel::CurrentDislocation,
                ),
                radiology_note("r2", "no acute fracture seen", RadiologyLabel::NoDislocation),
                radiology_note(
                    "r3",
                    "possible subluxation noted on imaging",
                    RadiologyLabel::NoDislocation,
                ),
            ],
            vec![],
        )
        .unwrap();
        let filtered = prefilter_notes(&corpus, &default_keywords());
        assert_eq!(filtered.note_ids(), vec!["r1", "r3"]);
    }

    #[test]
    fn prefilter_is_idempotent() {
        let corpus = Corpus::new(
            vec![radiology_note(
                "r1",
                "Reduction of a DISLOCATED hip",
                RadiologyLabel::EvidencePreviousDislocation,
            )],
            vec![],
        )
        .unwrap();
        let once = prefilter_notes(&corpus, &default_keywords());
        let twice = prefilter_notes(&once, &default_keywords());
        assert_eq!(once, twice);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = radiology_note("r1", "text one", RadiologyLabel::NoDislocation);
        let b = radiology_note("r1", "text two", RadiologyLabel::NoDislocation);
        assert!(Corpus::new(vec![a, b], vec![]).is_err());
    }

    #[test]
    fn relevant_code_predicate_matches_exactly_eight_codes() {
        for (sys, code) in RELEVANT_CODES {
            let rec = CodeRecord {
                patient_id: "p".into(),
                code_system: sys,
                code: code.into(),
            };
            assert!(rec.is_dislocation_relevant());
        }
        let other = CodeRecord {
            patient_id: "p".into(),
            code_system: CodeSystem::Icd10,
            code: "M25.551".into(),
        };
        assert!(!other.is_dislocation_relevant());
    }
}
