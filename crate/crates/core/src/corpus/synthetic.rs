//! Seeded synthetic-note generation.
//!
//! Templates stand in for the PHI-locked hospital narratives: radiology
//! impressions are terse and uniform, telephone notes conversational. The
//! no-dislocation pool includes long-range negation cases and the outlier
//! pools inject atypical dislocation terms and multi-site distractors so the
//! known classical-model failure modes are exercisable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Note, NoteLabel, NoteType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub note_type: NoteType,
    /// Target count per class, in class-index order.
    #[serde(default)]
    pub no_dislocation: usize,
    #[serde(default)]
    pub current_dislocation: usize,
    #[serde(default)]
    pub evidence_previous_dislocation: usize,
    /// Fraction of no-dislocation notes drawn from long-range negation
    /// templates.
    pub negation_fraction: f64,
    /// Fraction of notes drawn from atypical/multi-site outlier templates.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn total(&self) -> usize {
        self.no_dislocation + self.current_dislocation + self.evidence_previous_dislocation
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.total() == 0 {
            return Err(CorpusError::InvalidSpec("total note count is zero".into()));
        }
        for (name, f) in [
            ("negation_fraction", self.negation_fraction),
            ("outlier_fraction", self.outlier_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(CorpusError::InvalidSpec(format!("{name} {f} outside [0,1]")));
            }
        }
        if self.note_type == NoteType::Telephone && self.current_dislocation > 0 {
            return Err(CorpusError::InvalidSpec(
                "telephone notes cannot carry current_dislocation".into(),
            ));
        }
        Ok(())
    }
}

const SIDES: [&str; 2] = ["left", "right"];

const RADIOLOGY_PREFIXES: [&str; 4] = [
    "Impression:",
    "Findings:",
    "Comparison with prior study.",
    "Single view of the pelvis.",
];

const RADIOLOGY_NO_TYPICAL: [&str; 6] = [
    "The radiograph shows a {side} total hip arthroplasty without signs of fracture or dislocation.",
    "{side} total hip prosthesis in anatomic alignment. Components appear well seated.",
    "Stable appearance of the {side} hip arthroplasty. Hardware intact, alignment maintained.",
    "The {side} femoral and acetabular components are in satisfactory position without subluxation.",
    "Unchanged {side} total hip replacement. No periprosthetic lucency, components well aligned.",
    "The {side} hip arthroplasty is located and congruent. Soft tissues unremarkable.",
];

const RADIOLOGY_NO_NEGATION: [&str; 5] = [
    "No fracture or dislocation of the {side} total hip prosthesis is seen.",
    "There is no evidence of hardware failure, periprosthetic fracture, or dislocation.",
    "No acute fracture, subluxation, or dislocation is identified about the {side} hip arthroplasty.",
    "The {side} hip was previously questioned for instability. No dislocation or fracture is seen now.",
    "No displaced fracture and no dislocation. The {side} prosthesis remains anatomically seated.",
];

const RADIOLOGY_NO_OUTLIER: [&str; 3] = [
    "Dislocated fracture fragments are noted at the {side} rib. The hip prosthesis remains well seated without dislocation.",
    "The knee shows no dislocation and no displaced fragment. {side} hip arthroplasty components remain located.",
    "Displaced comminuted fragments about the shoulder. The {side} total hip prosthesis is congruent, not dislocated.",
];

const RADIOLOGY_CURRENT_TYPICAL: [&str; 5] = [
    "The radiograph shows a dislocated {side} hip arthroplasty.",
    "Dislocation of the {side} total hip prosthesis. The femoral head lies outside the acetabular cup.",
    "Acute dislocation of the {side} hip arthroplasty is present. Orthopaedic consultation advised.",
    "The {side} femoral component is dislocated superiorly relative to the acetabular component.",
    "New dislocation of the {side} total hip replacement compared with the prior study.",
];

const RADIOLOGY_CURRENT_OUTLIER: [&str; 3] = [
    "Dislocated {side} hemiprosthesis is identified on the current study.",
    "Posterosuperior dislocation of the {side} hip prosthesis. The knee is not dislocated and there is no displaced rib fracture.",
    "The {side} hip is dislocated. Multiple sites were imaged; the knee alignment is preserved and ribs are intact.",
];

const RADIOLOGY_EVIDENCE_TYPICAL: [&str; 5] = [
    "Radiograph shows a successful reduction of previous dislocated {side} hip arthroplasty.",
    "Reduction of previous dislocation of the {side} total hip prosthesis. No dislocation or fracture is seen now.",
    "Status post closed reduction of {side} hip arthroplasty dislocation. Alignment has been restored.",
    "Interval reduction of the previously dislocated {side} hip prosthesis with satisfactory position.",
    "The previously noted dislocation of the {side} hip replacement has been reduced.",
];

const RADIOLOGY_EVIDENCE_OUTLIER: [&str; 3] = [
    "Previously dislocated {side} hemiprosthesis now reduced, components congruent.",
    "Prior posterosuperior dislocation of the {side} hip has been reduced. Knee and ribs unremarkable.",
    "Interval reduction of the {side} hip arthroplasty dislocation; distractor finding of old rib deformity noted.",
];

const TELEPHONE_PREFIXES: [&str; 3] = [
    "Follow up call.",
    "Telephone encounter.",
    "Routine post operative phone check.",
];

const TELEPHONE_NO_TYPICAL: [&str; 5] = [
    "Pt called about the {side} hip. She is moving around OK today and was reassured that if she is moving comfortably she is not dislocated.",
    "Patient reports the concern was a possible hip dislocation. Pt would like to report this was not the case, she had suffered a very badly pulled muscle.",
    "Pt wasn't sure what actually popped while reaching into the fridge but is moving around OK. Will check with the home therapist.",
    "Patient doing well after the {side} hip replacement. No falls, no episodes of the hip coming out. Walking with a cane.",
    "Spoke with patient about soreness in the {side} hip. No instability events reported, exercises continue as planned.",
];

const TELEPHONE_NO_NEGATION: [&str; 3] = [
    "Pt anxious about a clicking feeling but there has been no dislocation and no fracture since surgery on the {side} hip.",
    "Patient was seen at an outside ER; imaging there showed no fracture or dislocation of the {side} hip prosthesis.",
    "Discussed symptoms at length. Nothing suggests the {side} hip has dislocated, no reduction has ever been needed.",
];

const TELEPHONE_NO_OUTLIER: [&str; 2] = [
    "Pt called about her knee giving way; the knee was checked and is not dislocated. The {side} hip replacement is doing fine.",
    "Patient bruised her ribs in a minor fall. No displaced rib fracture per urgent care, and the {side} hip has had no problems.",
];

const TELEPHONE_EVIDENCE_TYPICAL: [&str; 5] = [
    "Patient was seen in the ED with {side} hip dislocation. He underwent a {side} hip closed reduction under anesthesia and was discharged.",
    "Pt reports she heard a crack with increased pain, an x ray at the ER showed a dislocation, they gave her sedation and were able to reduce the dislocation.",
    "Patient called to report the {side} hip popped out last week. It was put back in place at an outside hospital.",
    "Family reports the patient's {side} hip dislocated while transferring; closed reduction was performed the same evening.",
    "Pt seen at an outside facility for the {side} hip coming out of socket; it was reduced and she was sent home the next morning.",
];

const TELEPHONE_EVIDENCE_OUTLIER: [&str; 2] = [
    "Patient reports the {side} hemiprosthesis dislocated during therapy and was reduced in the ED.",
    "Pt describes a posterosuperior dislocation of the {side} hip treated with sedation and reduction; her knee was also checked and was fine.",
];

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn render<R: Rng>(rng: &mut R, prefix_pool: &[&str], template: &str) -> String {
    let side = SIDES[rng.gen_range(0..SIDES.len())];
    let body = template.replace("{side}", side);
    format!("{} {}", pick(rng, prefix_pool), body)
}

fn class_label(note_type: NoteType, class: usize) -> NoteLabel {
    NoteLabel::from_class_index(note_type, class).expect("valid class for note type")
}

/// Generates exactly the requested number of notes per class; identical
/// seeds yield byte-identical corpora.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut notes = Vec::with_capacity(spec.total());
    // Class indices are dense per note type: the telephone evidence class
    // sits at index 1 because telephone notes never carry a current
    // dislocation.
    let counts: Vec<usize> = match spec.note_type {
        NoteType::Radiology => vec![
            spec.no_dislocation,
            spec.current_dislocation,
            spec.evidence_previous_dislocation,
        ],
        NoteType::Telephone => vec![spec.no_dislocation, spec.evidence_previous_dislocation],
    };
    let id_prefix = match spec.note_type {
        NoteType::Radiology => "R",
        NoteType::Telephone => "T",
    };
    let mut serial = 0usize;
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let outlier = rng.gen::<f64>() < spec.outlier_fraction;
            let negation = rng.gen::<f64>() < spec.negation_fraction;
            let (prefixes, pool): (&[&str], &[&str]) = match (spec.note_type, class) {
                (NoteType::Radiology, 0) => (
                    &RADIOLOGY_PREFIXES,
                    if outlier {
                        &RADIOLOGY_NO_OUTLIER
                    } else if negation {
                        &RADIOLOGY_NO_NEGATION
                    } else {
                        &RADIOLOGY_NO_TYPICAL
                    },
                ),
                (NoteType::Radiology, 1) => (
                    &RADIOLOGY_PREFIXES,
                    if outlier {
                        &RADIOLOGY_CURRENT_OUTLIER
                    } else {
                        &RADIOLOGY_CURRENT_TYPICAL
                    },
                ),
                (NoteType::Radiology, 2) => (
                    &RADIOLOGY_PREFIXES,
                    if outlier {
                        &RADIOLOGY_EVIDENCE_OUTLIER
                    } else {
                        &RADIOLOGY_EVIDENCE_TYPICAL
                    },
                ),
                (NoteType::Telephone, 0) => (
                    &TELEPHONE_PREFIXES,
                    if outlier {
                        &TELEPHONE_NO_OUTLIER
                    } else if negation {
                        &TELEPHONE_NO_NEGATION
                    } else {
                        &TELEPHONE_NO_TYPICAL
                    },
                ),
                (NoteType::Telephone, 1) => (
                    &TELEPHONE_PREFIXES,
                    if outlier {
                        &TELEPHONE_EVIDENCE_OUTLIER
                    } else {
                        &TELEPHONE_EVIDENCE_TYPICAL
                    },
                ),
                _ => unreachable!("telephone class > 1 rejected by validate"),
            };
            let template = pick(&mut rng, pool);
            let text = render(&mut rng, prefixes, template);
            serial += 1;
            notes.push(Note {
                id: format!("{id_prefix}{serial:06}"),
                patient_id: format!("P{id_prefix}{serial:06}"),
                note_type: spec.note_type,
                text,
                label: class_label(spec.note_type, class),
            });
        }
    }
    Corpus::new(notes, vec![])
}
