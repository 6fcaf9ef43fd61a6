//! Seeded split validation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use super::{class_names, Corpus, CorpusError, NoteType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const EIGHTY_TEN_TEN: SplitRatios = SplitRatios {
        train: 0.8,
        validation: 0.1,
        test: 0.1,
    };

    fn validate(&self) -> Result<(), CorpusError> {
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios([
                self.train,
                self.validation,
                self.test,
            ]));
        }
        Ok(())
    }
}

/// Disjoint train/validation/test note-id sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// Partition policy: validation = ⌊r_val·N⌋, test = ⌊r_test·N⌋, remainder
/// to train, assigned over a seeded shuffle. Stratified mode applies the
/// same policy within each (note type, class) stratum, which keeps
/// per-class proportions within ±1 note per subset.
pub fn split_dataset(
    corpus: &Corpus,
    ratios: SplitRatios,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit, CorpusError> {
    ratios.validate()?;
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    let mut split = DatasetSplit {
        train: BTreeSet::new(),
        validation: BTreeSet::new(),
        test: BTreeSet::new(),
        seed,
        ratios,
    };

    if stratified {
        let counts = corpus.class_counts();
        for (&note_type, per_class) in &counts {
            for (class, &count) in per_class.iter().enumerate() {
                if count == 0 {
                    return Err(CorpusError::MissingClass {
                        class: class_names(note_type)[class].to_string(),
                        note_type,
                    });
                }
            }
        }
        for (note_type, per_class) in counts {
            for class in 0..per_class.len() {
                let ids: Vec<&str> = corpus
                    .notes
                    .iter()
                    .filter(|n| n.note_type == note_type && n.label.class_index() == class)
                    .map(|n| n.id.as_str())
                    .collect();
                // Stratum-specific stream so strata stay independent.
                let stratum_seed = seed
                    .wrapping_mul(31)
                    .wrapping_add(match note_type {
                        NoteType::Radiology => 0,
                        NoteType::Telephone => 1,
                    })
                    .wrapping_mul(31)
                    .wrapping_add(class as u64);
                assign(&ids, ratios, stratum_seed, &mut split);
            }
        }
    } else {
        let ids: Vec<&str> = corpus.note_ids();
        assign(&ids, ratios, seed, &mut split);
    }
    Ok(split)
}

fn assign(ids: &[&str], ratios: SplitRatios, seed: u64, split: &mut DatasetSplit) {
    let mut shuffled: Vec<&str> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_val = (ratios.validation * n as f64).floor() as usize;
    let n_test = (ratios.test * n as f64).floor() as usize;
    for (i, id) in shuffled.into_iter().enumerate() {
        let target = if i < n_val {
            &mut split.validation
        } else if i < n_val + n_test {
            &mut split.test
        } else {
            &mut split.train
        };
        target.insert(id.to_string());
    }
}
