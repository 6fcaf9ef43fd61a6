//! JSON-Lines persistence for notes and codes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodeRecord, CorpusError, Note, NoteLabel, NoteType, RadiologyLabel, TelephoneLabel};

/// Wire format for one note line: flat fields, label as a plain string.
#[derive(Serialize, Deserialize)]
struct NoteRecord {
    id: String,
    patient_id: String,
    note_type: NoteType,
    text: String,
    label: String,
}

impl From<&Note> for NoteRecord {
    fn from(note: &Note) -> Self {
        NoteRecord {
            id: note.id.clone(),
            patient_id: note.patient_id.clone(),
            note_type: note.note_type,
            text: note.text.clone(),
            label: note.label.as_wire_str().to_string(),
        }
    }
}

fn note_from_record(rec: NoteRecord, line: usize) -> Result<Note, CorpusError> {
    let label = match (rec.note_type, rec.label.as_str()) {
        (NoteType::Radiology, "no_dislocation") => {
            NoteLabel::Radiology(RadiologyLabel::NoDislocation)
        }
        (NoteType::Radiology, "current_dislocation") => {
            NoteLabel::Radiology(RadiologyLabel::CurrentDislocation)
        }
        (NoteType::Radiology, "evidence_previous_dislocation") => {
            NoteLabel::Radiology(RadiologyLabel::EvidencePreviousDislocation)
        }
        (NoteType::Telephone, "no_dislocation") => {
            NoteLabel::Telephone(TelephoneLabel::NoDislocation)
        }
        (NoteType::Telephone, "evidence_previous_dislocation") => {
            NoteLabel::Telephone(TelephoneLabel::EvidencePreviousDislocation)
        }
        (NoteType::Telephone, "current_dislocation") => {
            return Err(CorpusError::LabelTypeMismatch { line, id: rec.id })
        }
        (_, other) => {
            return Err(CorpusError::UnknownEnumValue {
                field: "label",
                value: other.to_string(),
            })
        }
    };
    if rec.text.is_empty() {
        return Err(CorpusError::EmptyText { id: rec.id });
    }
    Ok(Note {
        id: rec.id,
        patient_id: rec.patient_id,
        note_type: rec.note_type,
        text: rec.text,
        label,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_notes_jsonl(path: &Path, notes: &[Note]) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for note in notes {
        serde_json::to_writer(&mut out, &NoteRecord::from(note)).expect("note serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&out).map_err(|e| io_err(path, e))
}

pub fn load_notes_jsonl(path: &Path) -> Result<Vec<Note>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut notes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NoteRecord = serde_json::from_str(&line)
            .map_err(|source| CorpusError::MalformedLine { line: i + 1, source })?;
        notes.push(note_from_record(rec, i + 1)?);
    }
    Ok(notes)
}

pub fn save_codes_jsonl(path: &Path, codes: &[CodeRecord]) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for code in codes {
        serde_json::to_writer(&mut out, code).expect("code serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&out).map_err(|e| io_err(path, e))
}

pub fn load_codes_jsonl(path: &Path) -> Result<Vec<CodeRecord>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut codes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        codes.push(
            serde_json::from_str(&line)
                .map_err(|source| CorpusError::MalformedLine { line: i + 1, source })?,
        );
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::super::Corpus;
    use super::*;

    #[test]
    fn empty_corpus_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        save_notes_jsonl(&path, &[]).unwrap();
        assert!(load_notes_jsonl(&path).unwrap().is_empty());
    }

    #[test]
    fn single_note_round_trips_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        let note = Note::new(
            "r1",
            "p1",
            NoteType::Radiology,
            "the radiograph shows a dislocated hip arthroplasty",
            NoteLabel::Radiology(RadiologyLabel::CurrentDislocation),
        )
        .unwrap();
        save_notes_jsonl(&path, std::slice::from_ref(&note)).unwrap();
        let loaded = load_notes_jsonl(&path).unwrap();
        assert_eq!(loaded, vec![note]);
    }

    #[test]
    fn order_preserved_on_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        let notes: Vec<Note> = (0..20)
            .map(|i| {
                Note::new(
                    format!("r{i}"),
                    format!("p{i}"),
                    NoteType::Radiology,
                    format!("note number {i} mentions dislocation"),
                    NoteLabel::Radiology(RadiologyLabel::NoDislocation),
                )
                .unwrap()
            })
            .collect();
        save_notes_jsonl(&path, &notes).unwrap();
        let corpus = Corpus::new(load_notes_jsonl(&path).unwrap(), vec![]).unwrap();
        assert_eq!(corpus.notes, notes);
    }

    #[test]
    fn telephone_current_dislocation_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"t1","patient_id":"p1","note_type":"telephone","text":"x","label":"current_dislocation"}"#,
        )
        .unwrap();
        match load_notes_jsonl(&path) {
            Err(CorpusError::LabelTypeMismatch { line: 1, .. }) => {}
            other => panic!("expected label mismatch, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"r1\",\"patient_id\":\"p\",\"note_type\":\"radiology\",\"text\":\"t\",\"label\":\"no_dislocation\"}\nnot json\n",
        )
        .unwrap();
        match load_notes_jsonl(&path) {
            Err(CorpusError::MalformedLine { line: 2, .. }) => {}
            other => panic!("expected malformed line 2, got {other:?}"),
        }
    }

    #[test]
    fn codes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.jsonl");
        let codes = vec![CodeRecord {
            patient_id: "p1".into(),
            code_system: super::super::CodeSystem::Cpt,
            code: "27265".into(),
        }];
        save_codes_jsonl(&path, &codes).unwrap();
        assert_eq!(load_codes_jsonl(&path).unwrap(), codes);
    }
}
