//! Softmax-normalized learnable layer weighting.

use serde::{Deserialize, Serialize};

use super::real::{softmax, Real};
use crate::error::{Error, Result};
use crate::feature_store::SegmentView;

/// How the fusion logits are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Uniform,
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// 1-based major layer.
    pub major_layer: usize,
    pub major_weight: f64,
    pub init_mode: InitMode,
}

impl FusionConfig {
    pub fn uniform() -> Self {
        Self {
            major_layer: 1,
            major_weight: 0.0,
            init_mode: InitMode::Uniform,
        }
    }

    pub fn prior(major_layer: usize, major_weight: f64) -> Self {
        Self {
            major_layer,
            major_weight,
            init_mode: InitMode::Prior,
        }
    }

    pub fn init<F: Real>(&self, layers: usize) -> Result<LayerWeights<F>> {
        match self.init_mode {
            InitMode::Uniform => Ok(LayerWeights::uniform(layers)),
            InitMode::Prior => prior_init(layers, self.major_layer, self.major_weight),
        }
    }
}

/// Unnormalized layer logits `p`; the effective weights are `softmax(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<F> {
    logits: Vec<F>,
}

impl<F: Real> LayerWeights<F> {
    pub fn from_logits(logits: Vec<F>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::Shape("layer weights need at least one layer".into()));
        }
        Ok(Self { logits })
    }

    pub fn uniform(layers: usize) -> Self {
        Self {
            logits: vec![F::zero(); layers.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[F] {
        &self.logits
    }

    pub(crate) fn logits_mut(&mut self) -> &mut Vec<F> {
        &mut self.logits
    }

    /// Normalized weights `softmax(p)`.
    pub fn weights(&self) -> Vec<F> {
        softmax(&self.logits)
    }

    /// Index (0-based) of the largest normalized weight.
    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }
}

pub(crate) fn argmax<F: PartialOrd + Copy>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `p_i = k` for the 1-based major layer `c`, zero elsewhere.
pub fn prior_init<F: Real>(layers: usize, major_layer: usize, major_weight: f64) -> Result<LayerWeights<F>> {
    if layers == 0 {
        return Err(Error::InvalidArgument("layer count must be >= 1".into()));
    }
    if major_layer == 0 || major_layer > layers {
        return Err(Error::InvalidArgument(format!(
            "major layer {major_layer} outside 1..={layers}"
        )));
    }
    if !(major_weight.is_finite() && major_weight >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "major weight must be finite and >= 0, got {major_weight}"
        )));
    }
    let mut logits = vec![F::zero(); layers];
    logits[major_layer - 1] = F::of(major_weight);
    Ok(LayerWeights { logits })
}

/// A `frames x dim` row-major sequence, the classifier's input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<F> {
    pub frames: usize,
    pub dim: usize,
    pub data: Vec<F>,
}

impl<F: Real> Sequence<F> {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        Self {
            frames,
            dim,
            data: vec![F::zero(); frames * dim],
        }
    }

    pub fn row(&self, t: usize) -> &[F] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [F] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// Weighted sum over layers: `out[t, d] = sum_i softmax(p)_i * h[i, t, d]`.
pub fn fuse<F: Real>(weights: &LayerWeights<F>, h: &SegmentView<'_>) -> Result<Sequence<F>> {
    fuse_with(&weights.weights(), h)
}

pub(crate) fn fuse_with<F: Real>(w: &[F], h: &SegmentView<'_>) -> Result<Sequence<F>> {
    if w.len() != h.layer_count() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: h.layer_count(),
            context: "fusion weights vs feature layers",
        });
    }
    let mut out = Sequence::zeros(h.frame_count(), h.feature_dim());
    for (layer, &wi) in w.iter().enumerate() {
        for t in 0..h.frame_count() {
            for (o, &v) in out.row_mut(t).iter_mut().zip(h.frame(layer, t)) {
                *o = *o + wi * F::of_f32(v);
            }
        }
    }
    Ok(out)
}

/// Copies one 0-based layer of `h`, bypassing fusion.
pub fn select_layer<F: Real>(h: &SegmentView<'_>, layer: usize) -> Result<Sequence<F>> {
    if layer >= h.layer_count() {
        return Err(Error::DimensionMismatch {
            expected: h.layer_count(),
            found: layer + 1,
            context: "selected layer vs feature layers",
        });
    }
    let mut out = Sequence::zeros(h.frame_count(), h.feature_dim());
    for t in 0..h.frame_count() {
        for (o, &v) in out.row_mut(t).iter_mut().zip(h.frame(layer, t)) {
            *o = F::of_f32(v);
        }
    }
    Ok(out)
}

/// Backpropagates `grad_out` (dL/d fused) into the fusion logits through the
/// softmax. The features `h` receive no gradient.
pub(crate) fn fuse_backward<F: Real>(w: &[F], h: &SegmentView<'_>, grad_out: &Sequence<F>, grad_logits: &mut [F]) {
    // dL/dw_i = sum_{t,d} g[t,d] h[i,t,d]
    let dw: Vec<F> = (0..w.len())
        .map(|layer| {
            let mut s = F::zero();
            for t in 0..h.frame_count() {
                for (&g, &v) in grad_out.row(t).iter().zip(h.frame(layer, t)) {
                    s = s + g * F::of_f32(v);
                }
            }
            s
        })
        .collect();
    // dL/dp_j = w_j (dL/dw_j - sum_i w_i dL/dw_i)
    let dot: F = w.iter().zip(&dw).map(|(&a, &b)| a * b).sum();
    for ((g, &wj), &dj) in grad_logits.iter_mut().zip(w).zip(&dw) {
        *g = *g + wj * (dj - dot);
    }
}
