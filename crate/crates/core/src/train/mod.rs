//! Segment-batched training with per-epoch layer-weight tracing and
//! best-validation checkpoint selection.

mod cv;
mod layer_scan;
mod trace;

use std::fmt::Write as _;
use std::ops::Range;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, cv_csv, FoldResult};
pub use layer_scan::{layer_scan, LayerScan, LayerScanRow};
pub use trace::{read_trace, trace_export, trace_export_final, write_trace, WeightTrace};

use crate::error::{Error, Result};
use crate::feature_store::{segment_ranges, FeatureSequence, Label, SegmentView};
use crate::inference::{aggregate, predict_segments, Logic};
use crate::metrics::{compute_metrics, ConfusionCounts, MetricsReport};
use crate::model::{FusionConfig, ModelConfig, ModelParams};
use crate::optim::{adamw_step, AdamWConfig, AdamWState};
use crate::rng;

/// Learning rates searched on validation accuracy.
pub const LEARNING_RATE_GRID: [f64; 3] = [3e-5, 5e-5, 1e-4];
/// Major-layer prior weights searched on validation accuracy.
pub const MAJOR_WEIGHT_GRID: [f64; 4] = [0.0, 1.0, 5.0, 8.0];

const SHUFFLE_STREAM: u64 = 0x5a0f;
const DROPOUT_STREAM: u64 = 0xd209;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub epochs: usize,
    pub seed: u64,
    pub window_seconds: f64,
    /// Recording-level logic used for validation accuracy.
    pub selection_logic: Logic,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            optimizer: AdamWConfig::default(),
            epochs: 15,
            seed: 0,
            window_seconds: 30.0,
            selection_logic: Logic::Or,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("batch size and epochs must be >= 1".into()));
        }
        if !(self.window_seconds.is_finite() && self.window_seconds > 0.0) {
            return Err(Error::InvalidArgument("window_seconds must be positive".into()));
        }
        Ok(())
    }
}

/// One labelled recording with its features.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub id: &'a str,
    pub label: Label,
    pub features: &'a FeatureSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: Phase,
    pub report: MetricsReport,
    /// Mean training loss over segments (train rows only).
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Val,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Val => "val",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy
    /// (earliest epoch on ties).
    pub best: ModelParams<f32>,
    pub best_epoch: usize,
    /// Parameters after the last epoch.
    pub last: ModelParams<f32>,
    pub trace: WeightTrace,
    pub metrics: Vec<EpochMetrics>,
}

impl TrainOutcome {
    /// Metrics log as CSV: `epoch,split,acc,precision,recall,f1`.
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }

    pub fn val_accuracy(&self, epoch: usize) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.epoch == epoch && m.split == Phase::Val)
            .map(|m| m.report.acc)
    }
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,split,acc,precision,recall,f1\n");
    for m in rows {
        let r = &m.report;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            m.epoch,
            m.split.as_str(),
            r.acc,
            r.precision,
            r.recall,
            r.f1
        )
        .unwrap();
    }
    out
}

/// Recording-level metrics of `params` on `examples` under `logic`.
pub fn evaluate(
    params: &ModelParams<f32>,
    examples: &[Example<'_>],
    window_seconds: f64,
    logic: Logic,
) -> Result<(MetricsReport, ConfusionCounts)> {
    let labels: Vec<Label> = examples
        .par_iter()
        .map(|ex| {
            let preds = predict_segments(params, ex.id, ex.features, window_seconds)?;
            Ok(aggregate(&preds, logic)?.label)
        })
        .collect::<Result<_>>()?;
    let counts = ConfusionCounts::from_pairs(labels.into_iter().zip(examples.iter().map(|e| e.label)));
    Ok((compute_metrics(&counts)?, counts))
}

struct SegmentRef {
    example: usize,
    range: Range<usize>,
}

fn segment_index(examples: &[Example<'_>], window_seconds: f64) -> Vec<SegmentRef> {
    examples
        .iter()
        .enumerate()
        .flat_map(|(example, ex)| {
            let window = ex.features.window_frames(window_seconds);
            segment_ranges(ex.features.frame_count(), window, 1)
                .into_iter()
                .map(move |range| SegmentRef { example, range })
        })
        .collect()
}

/// Trains a freshly initialized model. The test set is deliberately not part
/// of this interface.
pub fn train(
    config: &TrainConfig,
    model_config: &ModelConfig,
    fusion: &FusionConfig,
    train_set: &[Example<'_>],
    val_set: &[Example<'_>],
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut params = ModelParams::<f32>::init(*model_config, fusion, config.seed)?;
    let mut state = AdamWState::new(&params);
    let segments = segment_index(train_set, config.window_seconds);

    let initial = params.fusion_weights().map(to_f64).unwrap_or_default();
    let mut trace = WeightTrace::new(initial);
    let mut metrics = Vec::with_capacity(2 * config.epochs);
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;

    let mut order: Vec<usize> = (0..segments.len()).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, &[SHUFFLE_STREAM, epoch as u64]));

        let mut loss_sum = 0.0f64;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<(f32, ModelParams<f32>)>> = batch
                .par_iter()
                .enumerate()
                .map(|(j, &si)| {
                    let seg = &segments[si];
                    let ex = &train_set[seg.example];
                    let view = SegmentView::new(ex.features, seg.range.clone())?;
                    let mut drop_rng = rng::stream(config.seed, &[DROPOUT_STREAM, epoch as u64, b as u64, j as u64]);
                    let cache = params.forward(&view, true, &mut drop_rng)?;
                    params.backward(&cache, ex.label)
                })
                .collect();
            // fixed-order accumulation keeps the update independent of scheduling
            let mut total = params.zeros_like();
            let scale = 1.0 / batch.len() as f32;
            for r in results {
                let (loss, g) = r?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += loss as f64;
                total.add_scaled(&g, scale);
            }
            match adamw_step(&mut params, &total, &mut state, &config.optimizer) {
                Err(Error::NonFiniteGradient { .. }) => return Err(Error::Diverged { epoch }),
                other => other?,
            }
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        if let Some(w) = params.fusion_weights() {
            trace.push(to_f64(w));
        }
        let (train_report, _) = evaluate(&params, train_set, config.window_seconds, config.selection_logic)?;
        let (val_report, _) = evaluate(&params, val_set, config.window_seconds, config.selection_logic)?;
        metrics.push(EpochMetrics {
            epoch,
            split: Phase::Train,
            report: train_report,
            loss: Some(loss_sum / segments.len() as f64),
        });
        metrics.push(EpochMetrics {
            epoch,
            split: Phase::Val,
            report: val_report,
            loss: None,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_report.acc > *acc) {
            best = Some((val_report.acc, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("epochs >= 1");
    Ok(TrainOutcome {
        best: best_params,
        best_epoch,
        last: params,
        trace,
        metrics,
    })
}

fn to_f64(v: Vec<f32>) -> Vec<f64> {
    v.into_iter().map(f64::from).collect()
}
