//! Datasets: labeled AU signal sets, optional deep feature streams, and
//! subject-disjoint fold assignment.

mod csv_io;
mod synth;

pub use csv_io::{
    load_au_csv, load_dataset_dir, load_deep_csv, read_feature_cache, write_au_csv,
    write_deep_csv, write_feature_cache, CsvSchema, FeatureRecord,
};
pub use synth::{synth_generate, SynthConfig};

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::series::TimeSeries;
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Posed,
    Spontaneous,
    Unlabeled,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Posed => "posed",
            Label::Spontaneous => "spontaneous",
            Label::Unlabeled => "unlabeled",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "posed" => Ok(Label::Posed),
            "spontaneous" => Ok(Label::Spontaneous),
            "unlabeled" | "" => Ok(Label::Unlabeled),
            other => Err(Error::InvalidArgument(format!("unknown label '{other}'"))),
        }
    }

    /// Training target: spontaneous = 1, posed = 0.
    pub fn target(&self) -> Option<f64> {
        match self {
            Label::Posed => Some(0.0),
            Label::Spontaneous => Some(1.0),
            Label::Unlabeled => None,
        }
    }
}

/// All signals of one smile sequence: the AU intensity tracks plus the smile
/// intensity track, sharing one time base.
#[derive(Debug, Clone)]
pub struct AUSignalSet {
    id: String,
    subject: Option<String>,
    label: Label,
    signals: Vec<(String, TimeSeries)>,
}

impl AUSignalSet {
    pub fn new(
        id: String,
        subject: Option<String>,
        label: Label,
        signals: Vec<(String, TimeSeries)>,
    ) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "sequence '{id}' has no signals"
            )));
        }
        let mut seen = HashSet::new();
        for (name, _) in &signals {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "sequence '{id}' has duplicate signal '{name}'"
                )));
            }
        }
        let (first_name, first) = &signals[0];
        for (name, series) in &signals[1..] {
            if series.len() != first.len() {
                return Err(Error::InvalidArgument(format!(
                    "sequence '{id}': signal '{name}' has {} frames but '{first_name}' has {}",
                    series.len(),
                    first.len()
                )));
            }
            if series.fps() != first.fps() {
                return Err(Error::InvalidArgument(format!(
                    "sequence '{id}': signal '{name}' has fps {} but '{first_name}' has {}",
                    series.fps(),
                    first.fps()
                )));
            }
            if series.timestamps() != first.timestamps() {
                return Err(Error::InvalidArgument(format!(
                    "sequence '{id}': signal '{name}' has a different time base than '{first_name}'"
                )));
            }
        }
        Ok(AUSignalSet {
            id,
            subject,
            label,
            signals,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subject(&self) -> Option<&str> {
        self.subject.as_deref()
    }

    /// Fold-assignment key: the subject when known, otherwise the sequence id.
    pub fn subject_key(&self) -> &str {
        self.subject.as_deref().unwrap_or(&self.id)
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn signal(&self, name: &str) -> Option<&TimeSeries> {
        self.signals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.signals.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TimeSeries)> {
        self.signals.iter().map(|(n, s)| (n.as_str(), s))
    }

    pub fn signal_count(&self) -> usize {
        self.signals.len()
    }

    pub fn frames(&self) -> usize {
        self.signals[0].1.len()
    }

    pub fn fps(&self) -> f64 {
        self.signals[0].1.fps()
    }
}

/// One sequence plus its optional externally supplied deep feature stream.
#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub signals: AUSignalSet,
    pub deep: Option<FeatureMatrix>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub sequences: Vec<SequenceRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// (posed, spontaneous, unlabeled) counts.
    pub fn class_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.sequences {
            match s.signals.label() {
                Label::Posed => c.0 += 1,
                Label::Spontaneous => c.1 += 1,
                Label::Unlabeled => c.2 += 1,
            }
        }
        c
    }

    /// Unique subject keys, sorted.
    pub fn subjects(&self) -> Vec<String> {
        let mut subjects: Vec<String> = self
            .sequences
            .iter()
            .map(|s| s.signals.subject_key().to_string())
            .collect();
        subjects.sort();
        subjects.dedup();
        subjects
    }

    pub fn has_deep(&self) -> bool {
        self.sequences.iter().all(|s| s.deep.is_some())
    }

    /// Assign every sequence to one of `k` folds so that no subject spans
    /// two folds.
    pub fn assign_folds(&self, k: usize, seed: u64) -> Result<FoldAssignment> {
        let pairs: Vec<(String, String)> = self
            .sequences
            .iter()
            .map(|s| {
                (
                    s.signals.id().to_string(),
                    s.signals.subject_key().to_string(),
                )
            })
            .collect();
        assign_subject_folds(&pairs, k, seed)
    }
}

/// Subject-disjoint fold assignment over (sequence id, subject key) pairs.
/// Subjects are shuffled deterministically from the seed and dealt
/// round-robin to folds 1..=k.
pub fn assign_subject_folds(
    pairs: &[(String, String)],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let mut ids = HashSet::new();
    for (id, _) in pairs {
        if !ids.insert(id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate sequence id '{id}'"
            )));
        }
    }
    let mut subjects: Vec<&str> = pairs.iter().map(|(_, s)| s.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} subjects cannot fill {k} subject-disjoint folds",
            subjects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "fold-assignment", 0));
    subjects.shuffle(&mut rng);
    let subject_fold: HashMap<&str, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i % k + 1))
        .collect();
    let map = pairs
        .iter()
        .map(|(id, subject)| (id.clone(), subject_fold[subject.as_str()]))
        .collect();
    Ok(FoldAssignment { k, map })
}

/// Sequence id -> fold index (1..=k), subject-disjoint by construction.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    k: usize,
    map: HashMap<String, usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.map.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.map.iter().map(|(id, f)| (id.as_str(), *f))
    }
}
