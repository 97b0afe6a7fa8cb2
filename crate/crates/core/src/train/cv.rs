//! Speaker-grouped k-fold cross-validation.

use std::fmt::Write as _;

use serde::Serialize;

use super::{evaluate, train, Example, TrainConfig, WeightTrace};
use crate::error::{Error, Result};
use crate::feature_store::UtteranceRecord;
use crate::inference::Logic;
use crate::metrics::MetricsReport;
use crate::model::{FusionConfig, ModelConfig};
use crate::splits::kfold;

#[derive(Debug, Clone, Serialize)]
pub struct FoldResult {
    /// 1-based fold number.
    pub fold: usize,
    /// Held-out fold metrics of the best-validation checkpoint.
    pub report: MetricsReport,
    pub best_epoch: usize,
    pub trace: WeightTrace,
}

/// Trains one model per fold, each validated on its held-out fold.
/// `examples[i]` must belong to `records[i]`.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    config: &TrainConfig,
    model: &ModelConfig,
    fusion: &FusionConfig,
    records: &[UtteranceRecord],
    examples: &[Example<'_>],
    k: usize,
    logic: Logic,
) -> Result<Vec<FoldResult>> {
    if records.len() != examples.len() {
        return Err(Error::DimensionMismatch {
            expected: records.len(),
            found: examples.len(),
            context: "examples per record",
        });
    }
    kfold(records, k, config.seed)?
        .into_iter()
        .enumerate()
        .map(|(i, split)| {
            let train_set: Vec<Example<'_>> = split.train.iter().map(|&j| examples[j]).collect();
            let val_set: Vec<Example<'_>> = split.val.iter().map(|&j| examples[j]).collect();
            let outcome = train(config, model, fusion, &train_set, &val_set)?;
            let (report, _) = evaluate(&outcome.best, &val_set, config.window_seconds, logic)?;
            Ok(FoldResult {
                fold: i + 1,
                report,
                best_epoch: outcome.best_epoch,
                trace: outcome.trace,
            })
        })
        .collect()
}

/// Per-fold CSV `Fold,ACC,Precision,Recall,F1` followed by a `Mean` row.
pub fn cv_csv(results: &[FoldResult]) -> String {
    let mut out = String::from("Fold,ACC,Precision,Recall,F1\n");
    let mut sum = [0.0f64; 4];
    for r in results {
        let m = &r.report;
        let v = [m.acc, m.precision, m.recall, m.f1];
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        writeln!(out, "{},{:.4},{:.4},{:.4},{:.4}", r.fold, v[0], v[1], v[2], v[3]).unwrap();
    }
    if !results.is_empty() {
        let n = results.len() as f64;
        writeln!(
            out,
            "Mean,{:.4},{:.4},{:.4},{:.4}",
            sum[0] / n,
            sum[1] / n,
            sum[2] / n,
            sum[3] / n
        )
        .unwrap();
    }
    out
}
