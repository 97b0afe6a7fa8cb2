//! Layered feature tensors, their on-disk format, the dataset manifest,
//! fixed-duration segmentation and a synthetic dataset generator.

mod lfsf;
mod manifest;
mod synth;

use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

pub use lfsf::{decode as decode_lfsf, encode as encode_lfsf, read_lfsf, write_lfsf, HEADER_LEN};
pub use manifest::{load_manifest, parse_manifest, write_manifest, Label, Language, UtteranceRecord};
pub use synth::{synth_dataset, synth_sequence, SynthConfig, SynthDataset};

use crate::error::{Error, Result};

/// Layer count of the target encoder's conformer stack.
pub const DEFAULT_LAYERS: usize = 24;
/// Frame rate assumed for the target encoder (20 ms stride).
pub const DEFAULT_FPS: f32 = 50.0;
/// Segment duration used for training and inference.
pub const DEFAULT_WINDOW_SECONDS: f64 = 30.0;

/// Per-layer hidden-state sequence of one recording, stored layer-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    layers: usize,
    frames: usize,
    dim: usize,
    fps: f32,
    data: Vec<f32>,
}

impl FeatureSequence {
    pub fn new(layers: usize, frames: usize, dim: usize, fps: f32, data: Vec<f32>) -> Result<Self> {
        let seq = Self::new_unchecked(layers, frames, dim, fps, data);
        seq.validate()?;
        Ok(seq)
    }

    pub(crate) fn new_unchecked(layers: usize, frames: usize, dim: usize, fps: f32, data: Vec<f32>) -> Self {
        Self {
            layers,
            frames,
            dim,
            fps,
            data,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.frames == 0 || self.dim == 0 {
            return Err(Error::Shape(format!(
                "L={}, T={}, D={} must all be >= 1",
                self.layers, self.frames, self.dim
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Shape(format!("fps must be positive, got {}", self.fps)));
        }
        let expected = self.layers * self.frames * self.dim;
        if self.data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} != L*T*D = {expected}",
                self.data.len()
            )));
        }
        if let Some(index) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layers
    }

    pub fn frame_count(&self) -> usize {
        self.frames
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Feature vector of `layer` (0-based) at frame `t`.
    pub fn frame(&self, layer: usize, t: usize) -> &[f32] {
        let at = (layer * self.frames + t) * self.dim;
        &self.data[at..at + self.dim]
    }

    /// Whole-sequence view.
    pub fn view(&self) -> SegmentView<'_> {
        SegmentView {
            seq: self,
            range: 0..self.frames,
        }
    }

    /// Number of frames in a window of `window_seconds`, at least one.
    pub fn window_frames(&self, window_seconds: f64) -> usize {
        ((self.fps as f64 * window_seconds).round() as usize).max(1)
    }
}

/// A contiguous frame range `[start, end)` of a parent sequence.
#[derive(Debug, Clone)]
pub struct SegmentView<'a> {
    seq: &'a FeatureSequence,
    range: Range<usize>,
}

impl<'a> SegmentView<'a> {
    pub fn new(seq: &'a FeatureSequence, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > seq.frame_count() {
            return Err(Error::Shape(format!(
                "segment range {range:?} invalid for T={}",
                seq.frame_count()
            )));
        }
        Ok(Self { seq, range })
    }

    pub fn parent(&self) -> &'a FeatureSequence {
        self.seq
    }

    pub fn frame_range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn layer_count(&self) -> usize {
        self.seq.layer_count()
    }

    pub fn frame_count(&self) -> usize {
        self.range.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.seq.feature_dim()
    }

    /// Feature vector of `layer` (0-based) at segment-relative frame `t`.
    pub fn frame(&self, layer: usize, t: usize) -> &'a [f32] {
        self.seq.frame(layer, self.range.start + t)
    }
}

/// Frame ranges of consecutive non-overlapping windows covering `[0, frames)`.
///
/// Remainders shorter than `min_frames` are dropped; with `min_frames = 1`
/// the ranges always cover the whole sequence.
pub fn segment_ranges(frames: usize, window: usize, min_frames: usize) -> Vec<Range<usize>> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(frames.div_ceil(window));
    let mut start = 0;
    while start < frames {
        let end = (start + window).min(frames);
        if end - start >= min_frames.max(1) {
            out.push(start..end);
        }
        start = end;
    }
    out
}

/// Splits `seq` into windows of `round(fps * window_seconds)` frames,
/// keeping the final remainder.
pub fn segment(seq: &FeatureSequence, window_seconds: f64) -> Result<Vec<SegmentView<'_>>> {
    segment_with_min(seq, window_seconds, 1)
}

pub fn segment_with_min(seq: &FeatureSequence, window_seconds: f64, min_frames: usize) -> Result<Vec<SegmentView<'_>>> {
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window_seconds must be positive, got {window_seconds}"
        )));
    }
    let window = seq.window_frames(window_seconds);
    Ok(segment_ranges(seq.frame_count(), window, min_frames)
        .into_iter()
        .map(|range| SegmentView { seq, range })
        .collect())
}

/// Reads the LFSF file of every record, resolving relative paths against
/// `features_dir`. Output order follows `records`.
pub fn load_features(records: &[UtteranceRecord], features_dir: impl AsRef<Path>) -> Result<Vec<FeatureSequence>> {
    let dir = features_dir.as_ref();
    records.par_iter().map(|r| read_lfsf(r.resolve(dir))).collect()
}
