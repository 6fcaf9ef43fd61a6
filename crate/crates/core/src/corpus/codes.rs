//! Structured-code fixtures for the code-capture analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CodeRecord, Corpus, CorpusError, NoteType, RELEVANT_CODES};

/// Which note sources evidence a patient's adverse event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeSources {
    pub radiology: bool,
    pub telephone: bool,
}

impl AeSources {
    pub fn telephone_only(&self) -> bool {
        self.telephone && !self.radiology
    }

    pub fn radiology_only(&self) -> bool {
        self.radiology && !self.telephone
    }

    pub fn both(&self) -> bool {
        self.radiology && self.telephone
    }
}

/// How many adverse-event patients, per evidence-source profile, should be
/// left without any relevant structured code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePlan {
    pub uncoded_telephone_only: usize,
    pub uncoded_radiology_only: usize,
    pub uncoded_both: usize,
}

impl CodePlan {
    pub fn total_uncoded(&self) -> usize {
        self.uncoded_telephone_only + self.uncoded_radiology_only + self.uncoded_both
    }
}

/// Per-patient adverse-event evidence sources, derived from note labels.
/// A patient is an AE patient if any of their notes carries a
/// dislocation-positive label.
pub fn patient_ae_profiles(corpus: &Corpus) -> BTreeMap<String, AeSources> {
    let mut profiles: BTreeMap<String, AeSources> = BTreeMap::new();
    for note in &corpus.notes {
        if !note.label.indicates_dislocation() {
            continue;
        }
        let sources = profiles.entry(note.patient_id.clone()).or_default();
        match note.note_type {
            NoteType::Radiology => sources.radiology = true,
            NoteType::Telephone => sources.telephone = true,
        }
    }
    profiles
}

/// Replaces the corpus codes with a deterministic fixture: every AE patient
/// receives one relevant code except those selected by the plan. Selection
/// takes the lexicographically first patient ids within each source profile,
/// and codes cycle through the relevant-code table in patient-id order.
pub fn attach_code_fixture(corpus: Corpus, plan: CodePlan) -> Result<Corpus, CorpusError> {
    let profiles = patient_ae_profiles(&corpus);

    let mut telephone_only = Vec::new();
    let mut radiology_only = Vec::new();
    let mut both = Vec::new();
    for (patient, sources) in &profiles {
        if sources.telephone_only() {
            telephone_only.push(patient.as_str());
        } else if sources.radiology_only() {
            radiology_only.push(patient.as_str());
        } else {
            both.push(patient.as_str());
        }
    }

    for (profile, pool, needed) in [
        ("telephone-only", &telephone_only, plan.uncoded_telephone_only),
        ("radiology-only", &radiology_only, plan.uncoded_radiology_only),
        ("both-source", &both, plan.uncoded_both),
    ] {
        if needed > pool.len() {
            return Err(CorpusError::PlanExceedsPatients {
                profile,
                needed,
                available: pool.len(),
            });
        }
    }

    let mut uncoded: Vec<&str> = Vec::with_capacity(plan.total_uncoded());
    uncoded.extend(&telephone_only[..plan.uncoded_telephone_only]);
    uncoded.extend(&radiology_only[..plan.uncoded_radiology_only]);
    uncoded.extend(&both[..plan.uncoded_both]);

    let mut codes = Vec::new();
    for (i, patient) in profiles.keys().enumerate() {
        if uncoded.contains(&patient.as_str()) {
            continue;
        }
        let (system, code) = RELEVANT_CODES[i % RELEVANT_CODES.len()];
        codes.push(CodeRecord {
            patient_id: patient.clone(),
            code_system: system,
            code: code.to_string(),
        });
    }

    Ok(Corpus {
        notes: corpus.notes,
        codes,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Note, NoteLabel, RadiologyLabel, TelephoneLabel};
    use super::*;
    use std::collections::BTreeSet;

    // 105 AE patients: 40 telephone-only, 50 radiology-only, 15 both,
    // plus dislocation-free patients that must never receive codes.
    fn fixture_corpus() -> Corpus {
        let mut notes = Vec::new();
        let mut serial = 0usize;
        let mut push = |patient: &str, note_type: NoteType, label: NoteLabel| {
            serial += 1;
            notes.push(
                Note::new(
                    format!("n{serial:04}"),
                    patient,
                    note_type,
                    "dislocation of the hip prosthesis, later reduced",
                    label,
                )
                .unwrap(),
            );
        };
        for i in 0..40 {
            push(
                &format!("tel{i:03}"),
                NoteType::Telephone,
                NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation),
            );
        }
        for i in 0..50 {
            push(
                &format!("rad{i:03}"),
                NoteType::Radiology,
                NoteLabel::Radiology(RadiologyLabel::CurrentDislocation),
            );
        }
        for i in 0..15 {
            let patient = format!("mix{i:03}");
            push(
                &patient,
                NoteType::Radiology,
                NoteLabel::Radiology(RadiologyLabel::EvidencePreviousDislocation),
            );
            push(
                &patient,
                NoteType::Telephone,
                NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation),
            );
        }
        for i in 0..20 {
            push(
                &format!("neg{i:03}"),
                NoteType::Radiology,
                NoteLabel::Radiology(RadiologyLabel::NoDislocation),
            );
        }
        Corpus::new(notes, vec![]).unwrap()
    }

    fn paper_plan() -> CodePlan {
        CodePlan {
            uncoded_telephone_only: 16,
            uncoded_radiology_only: 7,
            uncoded_both: 3,
        }
    }

    #[test]
    fn profiles_cover_ae_patients_only() {
        let profiles = patient_ae_profiles(&fixture_corpus());
        assert_eq!(profiles.len(), 105);
        assert_eq!(profiles.values().filter(|s| s.telephone_only()).count(), 40);
        assert_eq!(profiles.values().filter(|s| s.radiology_only()).count(), 50);
        assert_eq!(profiles.values().filter(|s| s.both()).count(), 15);
        assert!(!profiles.contains_key("neg000"));
    }

    #[test]
    fn paper_plan_leaves_79_coded_patients() {
        let corpus = attach_code_fixture(fixture_corpus(), paper_plan()).unwrap();
        let coded: BTreeSet<&str> = corpus
            .codes
            .iter()
            .filter(|c| c.is_dislocation_relevant())
            .map(|c| c.patient_id.as_str())
            .collect();
        assert_eq!(coded.len(), 79);
    }

    #[test]
    fn zero_uncoded_codes_every_ae_patient() {
        let corpus = attach_code_fixture(fixture_corpus(), CodePlan::default()).unwrap();
        let coded: BTreeSet<&str> =
            corpus.codes.iter().map(|c| c.patient_id.as_str()).collect();
        assert_eq!(coded.len(), 105);
        assert!(corpus.codes.iter().all(|c| c.is_dislocation_relevant()));
    }

    #[test]
    fn uncoded_set_partitions_by_source_profile() {
        let corpus = attach_code_fixture(fixture_corpus(), paper_plan()).unwrap();
        let profiles = patient_ae_profiles(&corpus);
        let coded: BTreeSet<&str> =
            corpus.codes.iter().map(|c| c.patient_id.as_str()).collect();
        let uncoded: Vec<&AeSources> = profiles
            .iter()
            .filter(|(p, _)| !coded.contains(p.as_str()))
            .map(|(_, s)| s)
            .collect();
        assert_eq!(uncoded.iter().filter(|s| s.telephone_only()).count(), 16);
        assert_eq!(uncoded.iter().filter(|s| s.radiology_only()).count(), 7);
        assert_eq!(uncoded.iter().filter(|s| s.both()).count(), 3);
    }

    #[test]
    fn fixture_is_deterministic() {
        let a = attach_code_fixture(fixture_corpus(), paper_plan()).unwrap();
        let b = attach_code_fixture(fixture_corpus(), paper_plan()).unwrap();
        assert_eq!(a.codes, b.codes);
    }

    #[test]
    fn oversized_plan_rejected() {
        let plan = CodePlan {
            uncoded_telephone_only: 41,
            uncoded_radiology_only: 0,
            uncoded_both: 0,
        };
        assert!(matches!(
            attach_code_fixture(fixture_corpus(), plan),
            Err(CorpusError::PlanExceedsPatients { .. })
        ));
    }
}
