//! Train/validation splitting by speaker (patient) or by recording, and
//! speaker-grouped k-fold cross-validation.
//!
//! Splits are returned as index lists into the input record slice, each in
//! the input order, so callers can keep features aligned with records.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{Label, UtteranceRecord};
use crate::rng;

const SPLIT_STREAM: u64 = 0x5917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Speaker,
    General,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speaker" => Ok(SplitMode::Speaker),
            "general" => Ok(SplitMode::General),
            other => Err(Error::InvalidArgument(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub val_ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn speaker(seed: u64) -> Self {
        Self {
            mode: SplitMode::Speaker,
            val_ratio: 0.2,
            seed,
        }
    }

    pub fn general(seed: u64) -> Self {
        Self {
            mode: SplitMode::General,
            val_ratio: 0.2,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::Split(format!(
                "val_ratio must be in (0, 1), got {}",
                self.val_ratio
            )));
        }
        Ok(())
    }
}

/// Record indices on each side of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    pub fn select<'a, T>(items: &'a [T], idx: &[usize]) -> Vec<&'a T> {
        idx.iter().map(|&i| &items[i]).collect()
    }
}

/// `round(ratio * n)` clamped to `[1, n - 1]`.
fn val_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n - 1)
}

struct Patients {
    /// Patient ids in order of first appearance.
    ids: Vec<String>,
    /// Majority label per patient (ties to the first recording's label).
    labels: Vec<Label>,
}

fn patients(records: &[UtteranceRecord]) -> Patients {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut ids = Vec::new();
    let mut votes: Vec<(Label, i64)> = Vec::new();
    for r in records {
        let i = *index.entry(r.patient_id.as_str()).or_insert_with(|| {
            ids.push(r.patient_id.clone());
            votes.push((r.label, 0));
            ids.len() - 1
        });
        votes[i].1 += if r.label == Label::Mci { 1 } else { -1 };
    }
    let labels = votes
        .into_iter()
        .map(|(first, v)| match v.cmp(&0) {
            std::cmp::Ordering::Greater => Label::Mci,
            std::cmp::Ordering::Less => Label::Nc,
            std::cmp::Ordering::Equal => first,
        })
        .collect();
    Patients { ids, labels }
}

/// Shuffled patient indices per label stratum (NC first, then MCI).
fn shuffled_strata(p: &Patients, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::stream(seed, &[SPLIT_STREAM]);
    [Label::Nc, Label::Mci]
        .into_iter()
        .map(|label| {
            let mut s: Vec<usize> = (0..p.ids.len()).filter(|&i| p.labels[i] == label).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect()
}

/// Splits `total` slots across strata proportionally to their sizes
/// (largest remainder, ties to the earlier stratum).
fn apportion(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let quotas: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - alloc.iter().sum::<usize>();
    for &i in order.iter().cycle().take(sizes.len() * 2) {
        if left == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Label-stratified validation patients, plus the shuffled remainder of
/// each stratum.
fn pick_val_patients(p: &Patients, ratio: f64, seed: u64) -> (Vec<usize>, Vec<Vec<usize>>) {
    let strata = shuffled_strata(p, seed);
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = apportion(&sizes, val_count(p.ids.len(), ratio));
    let mut val = Vec::new();
    let mut rest = Vec::new();
    for (s, n) in strata.into_iter().zip(alloc) {
        val.extend_from_slice(&s[..n]);
        rest.push(s[n..].to_vec());
    }
    (val, rest)
}

fn split_by_patient(records: &[UtteranceRecord], val_patients: &[&str]) -> Split {
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
    };
    for (i, r) in records.iter().enumerate() {
        if val_patients.contains(&r.patient_id.as_str()) {
            split.val.push(i);
        } else {
            split.train.push(i);
        }
    }
    split
}

/// Patient-disjoint split: every recording of a patient lands on one side.
pub fn speaker_split(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let p = patients(records);
    if p.ids.len() < 2 {
        return Err(Error::Split(format!(
            "speaker split needs at least 2 patients, found {}",
            p.ids.len()
        )));
    }
    let (val, _) = pick_val_patients(&p, spec.val_ratio, spec.seed);
    let ids: Vec<&str> = val.iter().map(|&i| p.ids[i].as_str()).collect();
    Ok(split_by_patient(records, &ids))
}

/// Recording-level split that ignores patient identity.
pub fn general_split(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = records.len();
    if n < 2 {
        return Err(Error::Split(format!(
            "general split needs at least 2 records, found {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(spec.seed, &[SPLIT_STREAM, 1]));
    let mut is_val = vec![false; n];
    for &i in &order[..val_count(n, spec.val_ratio)] {
        is_val[i] = true;
    }
    Ok(Split {
        train: (0..n).filter(|&i| !is_val[i]).collect(),
        val: (0..n).filter(|&i| is_val[i]).collect(),
    })
}

pub fn split(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<Split> {
    match spec.mode {
        SplitMode::Speaker => speaker_split(records, spec),
        SplitMode::General => general_split(records, spec),
    }
}

/// Patient to fold (0-based) mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Speaker-grouped fold assignment. Fold 0 holds exactly the validation
/// patients of [`speaker_split`] with ratio `1/k` and the same seed; the
/// remaining patients are dealt round-robin over the other folds, stratum
/// by stratum.
pub fn fold_assignment(records: &[UtteranceRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Split(format!("k must be >= 2, got {k}")));
    }
    let p = patients(records);
    if k > p.ids.len() {
        return Err(Error::Split(format!(
            "k = {k} exceeds the number of patients ({})",
            p.ids.len()
        )));
    }
    let (first, rest) = pick_val_patients(&p, 1.0 / k as f64, seed);
    let mut folds = BTreeMap::new();
    for i in first {
        folds.insert(p.ids[i].clone(), 0);
    }
    for (n, i) in rest.into_iter().flatten().enumerate() {
        folds.insert(p.ids[i].clone(), 1 + n % (k - 1));
    }
    Ok(FoldAssignment { k, folds })
}

/// One `(train, val)` split per fold.
pub fn kfold(records: &[UtteranceRecord], k: usize, seed: u64) -> Result<Vec<Split>> {
    let assignment = fold_assignment(records, k, seed)?;
    Ok((0..k)
        .map(|fold| {
            let mut split = Split {
                train: Vec::new(),
                val: Vec::new(),
            };
            for (i, r) in records.iter().enumerate() {
                if assignment.folds[&r.patient_id] == fold {
                    split.val.push(i);
                } else {
                    split.train.push(i);
                }
            }
            split
        })
        .collect())
}
