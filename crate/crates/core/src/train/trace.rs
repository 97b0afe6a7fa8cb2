//! Per-epoch record of the normalized layer weights softmax(p).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized fusion weights: the pre-update snapshot plus one row per
/// completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTrace {
    initial: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl WeightTrace {
    pub fn new(initial: Vec<f64>) -> Self {
        Self {
            initial,
            rows: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    /// Weights before the first update (epoch 0).
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// One row per epoch; `rows()[e - 1]` is the state after epoch `e`.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.rows.last().map(Vec::as_slice)
    }

    /// 1-based argmax layer of the final epoch.
    pub fn final_argmax(&self) -> Option<usize> {
        self.last().map(argmax_1based)
    }

    /// Weight of 1-based `layer` for every epoch.
    pub fn layer_series(&self, layer: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[layer - 1]).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Empty("weight trace has no epochs"));
        }
        let mut out = String::from("epoch,layer,weight\n");
        for (e, row) in self.rows.iter().enumerate() {
            write_rows(&mut out, e + 1, row);
        }
        Ok(out)
    }

    /// Only the last epoch, for comparing folds.
    pub fn final_csv(&self) -> Result<String> {
        let row = self.last().ok_or(Error::Empty("weight trace has no epochs"))?;
        let mut out = String::from("epoch,layer,weight\n");
        write_rows(&mut out, self.rows.len(), row);
        Ok(out)
    }
}

pub(crate) fn argmax_1based(w: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in w.iter().enumerate() {
        if v > w[best] {
            best = i;
        }
    }
    best + 1
}

fn write_rows(out: &mut String, epoch: usize, row: &[f64]) {
    for (l, w) in row.iter().enumerate() {
        // 17 significant digits round-trip f64 exactly
        writeln!(out, "{},{},{:.17e}", epoch, l + 1, w).unwrap();
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the full trace as CSV `epoch,layer,weight`.
pub fn trace_export(trace: &WeightTrace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &trace.to_csv()?)
}

/// Writes only the final epoch's weights.
pub fn trace_export_final(trace: &WeightTrace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &trace.final_csv()?)
}

/// Stores the trace as JSON (the form kept next to checkpoints).
pub fn write_trace(trace: &WeightTrace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &serde_json::to_string(trace)?)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<WeightTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
