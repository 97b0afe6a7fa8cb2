//! Per-layer classifier sweep: one independent model per feature layer,
//! fusion bypassed.

use std::fmt::Write as _;

use serde::Serialize;

use super::{evaluate, train, Example, TrainConfig};
use crate::error::{Error, Result};
use crate::inference::Logic;
use crate::model::{FusionConfig, InputMode, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerScanRow {
    /// 1-based layer index.
    pub layer: usize,
    /// Recording-level accuracy on the validation set, per logic.
    pub val_or: f64,
    pub val_ensemble: f64,
    pub test_or: Option<f64>,
    pub test_ensemble: Option<f64>,
}

impl LayerScanRow {
    pub fn val(&self, logic: Logic) -> f64 {
        match logic {
            Logic::Or => self.val_or,
            Logic::Ensemble => self.val_ensemble,
        }
    }

    pub fn test(&self, logic: Logic) -> Option<f64> {
        match logic {
            Logic::Or => self.test_or,
            Logic::Ensemble => self.test_ensemble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerScan {
    pub rows: Vec<LayerScanRow>,
}

impl LayerScan {
    /// `(layer, accuracy)` of the best validation accuracy under `logic`,
    /// lowest layer on ties.
    pub fn peak(&self, logic: Logic) -> (usize, f64) {
        self.peak_by(|r| Some(r.val(logic))).expect("scan has rows")
    }

    pub fn test_peak(&self, logic: Logic) -> Option<(usize, f64)> {
        self.peak_by(|r| r.test(logic))
    }

    fn peak_by(&self, key: impl Fn(&LayerScanRow) -> Option<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for r in &self.rows {
            let acc = key(r)?;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((r.layer, acc));
            }
        }
        best
    }

    /// CSV `layer,split,logic,acc,peak` where `peak` flags the best layer of
    /// each (split, logic) column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,split,logic,acc,peak\n");
        let val = |r: &LayerScanRow, l| Some(r.val(l));
        let test = |r: &LayerScanRow, l| r.test(l);
        for r in &self.rows {
            self.write_cells(&mut out, r, "val", val);
            self.write_cells(&mut out, r, "test", test);
        }
        out
    }

    fn write_cells(
        &self,
        out: &mut String,
        r: &LayerScanRow,
        split: &str,
        get: impl Fn(&LayerScanRow, Logic) -> Option<f64>,
    ) {
        for logic in [Logic::Or, Logic::Ensemble] {
            let Some(acc) = get(r, logic) else { continue };
            let peak = self.peak_by(|x| get(x, logic)).map(|p| p.0) == Some(r.layer);
            writeln!(out, "{},{},{},{:.6},{}", r.layer, split, logic, acc, u8::from(peak)).unwrap();
        }
    }
}

/// Trains one single-layer classifier per layer of `base` and reports
/// recording-level accuracies. Each classifier is scored after its final
/// epoch: scoring the best-validation checkpoint on the same validation set
/// would bias every reported accuracy upward.
pub fn layer_scan(
    config: &TrainConfig,
    base: &ModelConfig,
    train_set: &[Example<'_>],
    val_set: &[Example<'_>],
    test_set: Option<&[Example<'_>]>,
) -> Result<LayerScan> {
    if base.layers == 0 {
        return Err(Error::InvalidArgument("layer scan needs at least one layer".into()));
    }
    let mut rows = Vec::with_capacity(base.layers);
    for layer in 1..=base.layers {
        let model = ModelConfig {
            input: InputMode::Layer { index: layer },
            ..*base
        };
        let outcome = train(config, &model, &FusionConfig::uniform(), train_set, val_set)?;
        let acc = |set: &[Example<'_>], logic| -> Result<f64> {
            Ok(evaluate(&outcome.last, set, config.window_seconds, logic)?.0.acc)
        };
        rows.push(LayerScanRow {
            layer,
            val_or: acc(val_set, Logic::Or)?,
            val_ensemble: acc(val_set, Logic::Ensemble)?,
            test_or: test_set.map(|t| acc(t, Logic::Or)).transpose()?,
            test_ensemble: test_set.map(|t| acc(t, Logic::Ensemble)).transpose()?,
        });
    }
    Ok(LayerScan { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(layer: usize, v: f64, t: Option<f64>) -> LayerScanRow {
        LayerScanRow {
            layer,
            val_or: v,
            val_ensemble: v / 2.0,
            test_or: t,
            test_ensemble: t,
        }
    }

    #[test]
    fn peak_takes_lowest_layer_on_ties() {
        let scan = LayerScan {
            rows: vec![row(1, 0.5, Some(0.9)), row(2, 0.8, Some(0.1)), row(3, 0.8, Some(0.2))],
        };
        assert_eq!(scan.peak(Logic::Or), (2, 0.8));
        assert_eq!(scan.test_peak(Logic::Or), Some((1, 0.9)));
    }

    #[test]
    fn csv_flags_one_peak_per_column() {
        let scan = LayerScan {
            rows: vec![row(1, 0.5, None), row(2, 0.75, None)],
        };
        let csv = scan.to_csv();
        assert_eq!(
            csv,
            "layer,split,logic,acc,peak\n\
             1,val,or,0.500000,0\n1,val,ensemble,0.250000,0\n\
             2,val,or,0.750000,1\n2,val,ensemble,0.375000,1\n"
        );
        assert_eq!(scan.test_peak(Logic::Or), None);
    }
}
