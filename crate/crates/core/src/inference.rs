//! Segment-level prediction and recording-level aggregation.
//!
//! Two aggregation logics are provided. Ensemble sums per-segment class
//! probabilities and takes the larger total. OR labels a recording MCI as
//! soon as any single segment is predicted MCI. Both break ties toward MCI,
//! which makes every Ensemble-MCI verdict also an OR-MCI verdict.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{segment, FeatureSequence, Label};
use crate::model::{ModelParams, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPrediction {
    pub recording_id: String,
    /// `(p_NC, p_MCI)`.
    pub probs: (f64, f64),
}

impl SegmentPrediction {
    pub fn new(recording_id: impl Into<String>, p_nc: f64, p_mci: f64) -> Self {
        Self {
            recording_id: recording_id.into(),
            probs: (p_nc, p_mci),
        }
    }

    /// Argmax label, ties to MCI.
    pub fn label(&self) -> Label {
        if self.probs.1 >= self.probs.0 {
            Label::Mci
        } else {
            Label::Nc
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logic {
    Ensemble,
    Or,
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Logic::Ensemble => "ensemble",
            Logic::Or => "or",
        })
    }
}

impl FromStr for Logic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ensemble" => Ok(Logic::Ensemble),
            "or" => Ok(Logic::Or),
            other => Err(Error::InvalidArgument(format!("unknown logic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    /// Summed `(p_NC, p_MCI)` over segments.
    Cumulative(f64, f64),
    /// Index of the first segment predicted MCI, if any.
    Trigger(Option<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationVerdict {
    pub recording_id: String,
    pub logic: Logic,
    pub label: Label,
    pub evidence: Evidence,
    /// Summed `(p_NC, p_MCI)`, reported for both logics.
    pub sums: (f64, f64),
}

fn sums(preds: &[SegmentPrediction]) -> (f64, f64) {
    preds
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.probs.0, b + p.probs.1))
}

fn recording_id(preds: &[SegmentPrediction]) -> Result<String> {
    preds
        .first()
        .map(|p| p.recording_id.clone())
        .ok_or(Error::Empty("no segment predictions"))
}

pub fn aggregate_ensemble(preds: &[SegmentPrediction]) -> Result<AggregationVerdict> {
    let recording_id = recording_id(preds)?;
    let (nc, mci) = sums(preds);
    // Decide on the summed per-segment margins: a float sum of strictly
    // negative terms stays negative, so ties cannot appear by rounding.
    // Summing in sorted order makes the result independent of segment order.
    let mut margins: Vec<f64> = preds.iter().map(|p| p.probs.1 - p.probs.0).collect();
    margins.sort_by(f64::total_cmp);
    let margin: f64 = margins.iter().sum();
    Ok(AggregationVerdict {
        recording_id,
        logic: Logic::Ensemble,
        label: if margin >= 0.0 { Label::Mci } else { Label::Nc },
        evidence: Evidence::Cumulative(nc, mci),
        sums: (nc, mci),
    })
}

pub fn aggregate_or(preds: &[SegmentPrediction]) -> Result<AggregationVerdict> {
    let recording_id = recording_id(preds)?;
    let trigger = preds.iter().position(|p| p.label() == Label::Mci);
    Ok(AggregationVerdict {
        recording_id,
        logic: Logic::Or,
        label: if trigger.is_some() { Label::Mci } else { Label::Nc },
        evidence: Evidence::Trigger(trigger),
        sums: sums(preds),
    })
}

pub fn aggregate(preds: &[SegmentPrediction], logic: Logic) -> Result<AggregationVerdict> {
    match logic {
        Logic::Ensemble => aggregate_ensemble(preds),
        Logic::Or => aggregate_or(preds),
    }
}

/// One eval-mode prediction per `window_seconds` segment of `features`.
pub fn predict_segments<F: Real>(
    model: &ModelParams<F>,
    recording_id: &str,
    features: &FeatureSequence,
    window_seconds: f64,
) -> Result<Vec<SegmentPrediction>> {
    segment(features, window_seconds)?
        .iter()
        .map(|seg| {
            let [nc, mci] = model.predict_proba(seg)?;
            Ok(SegmentPrediction::new(recording_id, nc.as_f64(), mci.as_f64()))
        })
        .collect()
}
