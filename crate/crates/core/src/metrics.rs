//! Binary classification metrics with MCI as the positive class.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature_store::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, gold: Label) {
        match (predicted, gold) {
            (Label::Mci, Label::Mci) => self.tp += 1,
            (Label::Mci, Label::Nc) => self.fp += 1,
            (Label::Nc, Label::Nc) => self.tn += 1,
            (Label::Nc, Label::Mci) => self.fn_ += 1,
        }
    }

    /// Counts from aligned `(predicted, gold)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Self::default();
        for (p, g) in pairs {
            c.record(p, g);
        }
        c
    }
}

/// Counts predictions against gold labels keyed by id. Both sides must
/// cover exactly the same ids, each once.
pub fn confusion<'a>(
    predictions: impl IntoIterator<Item = (&'a str, Label)>,
    gold: impl IntoIterator<Item = (&'a str, Label)>,
) -> Result<ConfusionCounts> {
    let mut gold_map = HashMap::new();
    for (id, label) in gold {
        if gold_map.insert(id, label).is_some() {
            return Err(Error::IdMismatch(format!("duplicate gold id {id:?}")));
        }
    }
    let mut seen = HashSet::new();
    let mut counts = ConfusionCounts::default();
    for (id, predicted) in predictions {
        if !seen.insert(id) {
            return Err(Error::IdMismatch(format!("duplicate prediction id {id:?}")));
        }
        let Some(&g) = gold_map.get(id) else {
            return Err(Error::IdMismatch(format!("prediction {id:?} has no gold label")));
        };
        counts.record(predicted, g);
    }
    if seen.len() != gold_map.len() {
        let missing = gold_map.keys().find(|k| !seen.contains(*k)).unwrap();
        return Err(Error::IdMismatch(format!("gold id {missing:?} has no prediction")));
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when some metric hit a 0/0 and was reported as 0.
    #[serde(skip)]
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn compute_metrics(counts: &ConfusionCounts) -> Result<MetricsReport> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::Empty("no scored recordings"));
    }
    let mut degenerate = false;
    let acc = (counts.tp + counts.tn) as f64 / total as f64;
    let precision = ratio(counts.tp, counts.tp + counts.fp, &mut degenerate);
    let recall = ratio(counts.tp, counts.tp + counts.fn_, &mut degenerate);
    if precision + recall == 0.0 {
        degenerate = true;
    }
    Ok(MetricsReport {
        acc,
        precision,
        recall,
        f1: f1_score(precision, recall),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_mci_predictions() {
        let ids = ["a", "b", "c", "d", "e"];
        let c = confusion(
            ids.iter().map(|&i| (i, Label::Mci)),
            ids.iter().map(|&i| (i, Label::Mci)),
        )
        .unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 5,
                ..Default::default()
            }
        );
    }

    #[test]
    fn total_miss_counts_false_negatives() {
        let ids = ["a", "b", "c", "d", "e"];
        let c = confusion(
            ids.iter().map(|&i| (i, Label::Nc)),
            ids.iter().map(|&i| (i, Label::Mci)),
        )
        .unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                fn_: 5,
                ..Default::default()
            }
        );
        let m = compute_metrics(&c).unwrap();
        assert_eq!((m.acc, m.precision, m.recall, m.f1), (0.0, 0.0, 0.0, 0.0));
        assert!(m.degenerate);
    }

    #[test]
    fn id_mismatches_are_rejected() {
        let gold = [("a", Label::Mci), ("b", Label::Nc)];
        assert!(confusion([("a", Label::Mci)], gold).is_err());
        assert!(confusion([("a", Label::Mci), ("c", Label::Nc)], gold).is_err());
        assert!(confusion([("a", Label::Mci), ("a", Label::Nc)], gold).is_err());
        assert!(confusion([("a", Label::Mci)], [("a", Label::Mci), ("a", Label::Nc)]).is_err());
    }

    #[test]
    fn direct_arithmetic_example() {
        let m = compute_metrics(&ConfusionCounts {
            tp: 7,
            fp: 3,
            fn_: 2,
            tn: 8,
        })
        .unwrap();
        assert!((m.acc - 0.75).abs() < 1e-12);
        assert!((m.precision - 0.7).abs() < 1e-12);
        assert!((m.recall - 7.0 / 9.0).abs() < 1e-12);
        assert!((m.f1 - 14.0 / 19.0).abs() < 1e-12);
        assert!(!m.degenerate);
    }

    #[test]
    fn empty_counts_are_an_error() {
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn f1_from_published_precision_recall() {
        assert!((f1_score(0.6125, 0.7778) - 0.6853).abs() < 5e-4);
        assert!((f1_score(0.6167, 0.5873) - 0.6016).abs() < 5e-4);
    }

    fn arb_labels() -> impl Strategy<Value = Vec<(bool, bool)>> {
        proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)
    }

    fn lab(b: bool) -> Label {
        if b {
            Label::Mci
        } else {
            Label::Nc
        }
    }

    proptest! {
        #[test]
        fn order_does_not_matter(pairs in arb_labels(), rot in 0usize..60) {
            let ids: Vec<String> = (0..pairs.len()).map(|i| format!("r{i}")).collect();
            let preds: Vec<(&str, Label)> = ids.iter().zip(&pairs).map(|(i, p)| (i.as_str(), lab(p.0))).collect();
            let gold: Vec<(&str, Label)> = ids.iter().zip(&pairs).map(|(i, p)| (i.as_str(), lab(p.1))).collect();
            let mut shuffled = preds.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(confusion(preds, gold.clone()).unwrap(), confusion(shuffled, gold).unwrap());
        }

        #[test]
        fn fixing_a_false_negative_never_hurts(tp in 0usize..20, fp in 0usize..20, tn in 0usize..20, fn_ in 1usize..20) {
            let before = compute_metrics(&ConfusionCounts { tp, fp, tn, fn_ }).unwrap();
            let after = compute_metrics(&ConfusionCounts { tp: tp + 1, fp, tn, fn_: fn_ - 1 }).unwrap();
            prop_assert!(after.acc >= before.acc);
            prop_assert!(after.precision >= before.precision);
            prop_assert!(after.recall >= before.recall);
            prop_assert!(after.f1 >= before.f1);
        }

        #[test]
        fn f1_is_harmonic_mean(tp in 0usize..30, fp in 0usize..30, tn in 0usize..30, fn_ in 0usize..30) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let m = compute_metrics(&ConfusionCounts { tp, fp, tn, fn_ }).unwrap();
            for v in [m.acc, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision + m.recall > 0.0 {
                prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
            }
        }
    }
}
