//! Layer fusion -> stacked bidirectional LSTM -> mean pooling -> projection ->
//! two-way linear head, with hand-written reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fusion::{fuse_backward, fuse_with, select_layer, FusionConfig, LayerWeights, Sequence};
use super::loss::cross_entropy_with_grad;
use super::real::{matvec_acc, matvec_t_acc, outer_acc, sigmoid, softmax, Real};
use crate::error::{Error, Result};
use crate::feature_store::{Label, SegmentView};
use crate::rng;

pub const CLASSES: usize = 2;

/// Which feature layers feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMode {
    /// Learnable softmax-weighted sum over all layers.
    Fused,
    /// A single 1-based layer, no fusion parameters.
    Layer { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of feature layers L in the input tensor.
    pub layers: usize,
    /// Feature dimension D.
    pub input_dim: usize,
    /// Hidden units per direction.
    pub hidden: usize,
    pub recurrent_layers: usize,
    pub projection: usize,
    pub dropout: f64,
    pub input: InputMode,
}

impl ModelConfig {
    /// Five bidirectional layers of 256 units, projection to 64, dropout 0.1.
    pub fn standard(layers: usize, input_dim: usize) -> Self {
        Self {
            layers,
            input_dim,
            hidden: 256,
            recurrent_layers: 5,
            projection: 64,
            dropout: 0.1,
            input: InputMode::Fused,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.input_dim == 0 || self.hidden == 0 || self.projection == 0 {
            return Err(Error::InvalidArgument(
                "layers, input_dim, hidden and projection must be >= 1".into(),
            ));
        }
        if self.recurrent_layers == 0 {
            return Err(Error::InvalidArgument("need at least one recurrent layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if let InputMode::Layer { index } = self.input {
            if index == 0 || index > self.layers {
                return Err(Error::InvalidArgument(format!(
                    "input layer {index} outside 1..={}",
                    self.layers
                )));
            }
        }
        Ok(())
    }
}

/// Weight-decay class of a parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Fusion,
}

/// One direction of an LSTM layer. Gate rows are ordered input, forget,
/// cell, output; each block has `hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection<F> {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: Vec<F>,
    pub w_h: Vec<F>,
    pub bias: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer<F> {
    pub forward: LstmDirection<F>,
    pub backward: LstmDirection<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> Linear<F> {
    fn apply(&self, x: &[F]) -> Vec<F> {
        let mut out = self.bias.clone();
        matvec_acc(&self.weight, x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub fusion: Option<LayerWeights<F>>,
    pub recurrent: Vec<BiLstmLayer<F>>,
    pub projection: Linear<F>,
    pub head: Linear<F>,
    generation: u64,
}

/// Gradients share the parameter layout.
pub type Gradients<F> = ModelParams<F>;

fn uniform_vec<F: Real>(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<F> {
    (0..n).map(|_| F::of(rng.random_range(-bound..=bound))).collect()
}

impl<F: Real> LstmDirection<F> {
    fn init(rng: &mut impl Rng, input_dim: usize, hidden: usize) -> Self {
        let bx = 1.0 / (input_dim as f64).sqrt();
        let bh = 1.0 / (hidden as f64).sqrt();
        let w_x = uniform_vec(rng, 4 * hidden * input_dim, bx);
        let w_h = uniform_vec(rng, 4 * hidden * hidden, bh);
        let mut bias: Vec<F> = uniform_vec(rng, 4 * hidden, bh);
        for b in &mut bias[hidden..2 * hidden] {
            *b = F::one();
        }
        Self {
            input_dim,
            hidden,
            w_x,
            w_h,
            bias,
        }
    }
}

impl<F: Real> Linear<F> {
    fn init(rng: &mut impl Rng, input_dim: usize, output_dim: usize) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        Self {
            input_dim,
            output_dim,
            weight: uniform_vec(rng, input_dim * output_dim, bound),
            bias: uniform_vec(rng, output_dim, bound),
        }
    }
}

impl<F: Real> ModelParams<F> {
    /// Deterministic initialization from `seed`.
    pub fn init(config: ModelConfig, fusion: &FusionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let fusion = match config.input {
            InputMode::Fused => Some(fusion.init(config.layers)?),
            InputMode::Layer { .. } => None,
        };
        let mut rng = rng::stream(seed, &[0x1417]);
        let mut recurrent = Vec::with_capacity(config.recurrent_layers);
        let mut in_dim = config.input_dim;
        for _ in 0..config.recurrent_layers {
            recurrent.push(BiLstmLayer {
                forward: LstmDirection::init(&mut rng, in_dim, config.hidden),
                backward: LstmDirection::init(&mut rng, in_dim, config.hidden),
            });
            in_dim = 2 * config.hidden;
        }
        let projection = Linear::init(&mut rng, 2 * config.hidden, config.projection);
        let head = Linear::init(&mut rng, config.projection, CLASSES);
        Ok(Self {
            config,
            fusion,
            recurrent,
            projection,
            head,
            generation: 0,
        })
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ParamKind, &[F])> {
        let mut out: Vec<(String, ParamKind, &[F])> = Vec::new();
        if let Some(f) = &self.fusion {
            out.push(("fusion.p".into(), ParamKind::Fusion, f.logits()));
        }
        for (i, layer) in self.recurrent.iter().enumerate() {
            for (dir, d) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.push((format!("lstm.{i}.{dir}.w_x"), ParamKind::Weight, &d.w_x));
                out.push((format!("lstm.{i}.{dir}.w_h"), ParamKind::Weight, &d.w_h));
                out.push((format!("lstm.{i}.{dir}.bias"), ParamKind::Bias, &d.bias));
            }
        }
        out.push(("projection.weight".into(), ParamKind::Weight, &self.projection.weight));
        out.push(("projection.bias".into(), ParamKind::Bias, &self.projection.bias));
        out.push(("head.weight".into(), ParamKind::Weight, &self.head.weight));
        out.push(("head.bias".into(), ParamKind::Bias, &self.head.bias));
        out
    }

    /// Mutable named tensors, same order as [`Self::tensors`]. Invalidates
    /// outstanding forward caches.
    pub fn tensors_mut(&mut self) -> Vec<(String, ParamKind, &mut [F])> {
        self.generation += 1;
        let mut out: Vec<(String, ParamKind, &mut [F])> = Vec::new();
        if let Some(f) = &mut self.fusion {
            out.push(("fusion.p".into(), ParamKind::Fusion, f.logits_mut()));
        }
        for (i, layer) in self.recurrent.iter_mut().enumerate() {
            for (dir, d) in [("fwd", &mut layer.forward), ("bwd", &mut layer.backward)] {
                out.push((format!("lstm.{i}.{dir}.w_x"), ParamKind::Weight, &mut d.w_x));
                out.push((format!("lstm.{i}.{dir}.w_h"), ParamKind::Weight, &mut d.w_h));
                out.push((format!("lstm.{i}.{dir}.bias"), ParamKind::Bias, &mut d.bias));
            }
        }
        out.push((
            "projection.weight".into(),
            ParamKind::Weight,
            &mut self.projection.weight,
        ));
        out.push(("projection.bias".into(), ParamKind::Bias, &mut self.projection.bias));
        out.push(("head.weight".into(), ParamKind::Weight, &mut self.head.weight));
        out.push(("head.bias".into(), ParamKind::Bias, &mut self.head.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// Same layout with every entry mapped through `f`.
    pub fn map<G: Real>(&self, f: impl Fn(F) -> G) -> ModelParams<G> {
        let v = |x: &[F]| x.iter().map(|&a| f(a)).collect::<Vec<G>>();
        let dir = |d: &LstmDirection<F>| LstmDirection {
            input_dim: d.input_dim,
            hidden: d.hidden,
            w_x: v(&d.w_x),
            w_h: v(&d.w_h),
            bias: v(&d.bias),
        };
        let lin = |l: &Linear<F>| Linear {
            input_dim: l.input_dim,
            output_dim: l.output_dim,
            weight: v(&l.weight),
            bias: v(&l.bias),
        };
        ModelParams {
            config: self.config,
            fusion: self
                .fusion
                .as_ref()
                .map(|w| LayerWeights::from_logits(v(w.logits())).expect("nonempty")),
            recurrent: self
                .recurrent
                .iter()
                .map(|l| BiLstmLayer {
                    forward: dir(&l.forward),
                    backward: dir(&l.backward),
                })
                .collect(),
            projection: lin(&self.projection),
            head: lin(&self.head),
            generation: 0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| F::zero())
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        self.map(|x| G::of(x.as_f64()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        let src = other.tensors();
        for ((_, _, dst), (_, _, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, &x) in dst.iter_mut().zip(s) {
                *d = *d + scale * x;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Current normalized fusion weights, if the model fuses layers.
    pub fn fusion_weights(&self) -> Option<Vec<F>> {
        self.fusion.as_ref().map(|f| f.weights())
    }

    fn check_input(&self, input: &SegmentView<'_>) -> Result<()> {
        if input.layer_count() != self.config.layers {
            return Err(Error::DimensionMismatch {
                expected: self.config.layers,
                found: input.layer_count(),
                context: "feature layers",
            });
        }
        if input.feature_dim() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                found: input.feature_dim(),
                context: "feature dimension",
            });
        }
        Ok(())
    }

    /// Runs the network on one segment. Dropout is active only when
    /// `train_mode` is set; `rng` is not touched otherwise.
    pub fn forward<'a>(
        &self,
        input: &SegmentView<'a>,
        train_mode: bool,
        rng: &mut impl Rng,
    ) -> Result<ForwardCache<'a, F>> {
        self.check_input(input)?;
        let (fusion_weights, fused) = match (&self.fusion, self.config.input) {
            (Some(w), InputMode::Fused) => {
                let w = w.weights();
                let fused = fuse_with(&w, input)?;
                (w, fused)
            }
            (None, InputMode::Layer { index }) => (Vec::new(), select_layer(input, index - 1)?),
            _ => return Err(Error::Shape("fusion parameters inconsistent with input mode".into())),
        };
        self.forward_fused_inner(input.clone(), fusion_weights, fused, train_mode, rng)
    }

    fn forward_fused_inner<'a>(
        &self,
        features: SegmentView<'a>,
        fusion_weights: Vec<F>,
        fused: Sequence<F>,
        train_mode: bool,
        rng: &mut impl Rng,
    ) -> Result<ForwardCache<'a, F>> {
        let keep = F::one() - F::of(self.config.dropout);
        let dropout_on = train_mode && self.config.dropout > 0.0;
        let mut draw_mask = |n: usize| -> Vec<F> {
            let scale = F::one() / keep;
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < self.config.dropout {
                        F::zero()
                    } else {
                        scale
                    }
                })
                .collect()
        };

        let frames = fused.frames;
        let n_layers = self.recurrent.len();
        let mut layers = Vec::with_capacity(n_layers);
        let mut x = fused;
        for (li, layer) in self.recurrent.iter().enumerate() {
            let fwd = run_direction(&layer.forward, &x, false);
            let bwd = run_direction(&layer.backward, &x, true);
            let h = self.config.hidden;
            let mut output = Sequence::zeros(frames, 2 * h);
            for t in 0..frames {
                let row = output.row_mut(t);
                row[..h].copy_from_slice(&fwd.hidden[t * h..(t + 1) * h]);
                row[h..].copy_from_slice(&bwd.hidden[t * h..(t + 1) * h]);
            }
            if output.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteActivation {
                    stage: "recurrent",
                    layer: li + 1,
                });
            }
            let mask = (dropout_on && li + 1 < n_layers).then(|| draw_mask(output.data.len()));
            let mut next = output.clone();
            if let Some(m) = &mask {
                for (v, &k) in next.data.iter_mut().zip(m) {
                    *v = *v * k;
                }
            }
            layers.push(LayerCache {
                input: std::mem::replace(&mut x, next),
                forward: fwd,
                backward: bwd,
                mask,
            });
        }

        let width = 2 * self.config.hidden;
        let inv_t = F::one() / F::of(frames as f64);
        let mut pooled = vec![F::zero(); width];
        for t in 0..frames {
            for (p, &v) in pooled.iter_mut().zip(x.row(t)) {
                *p = *p + v;
            }
        }
        for p in &mut pooled {
            *p = *p * inv_t;
        }

        let projected = self.projection.apply(&pooled);
        let proj_mask = dropout_on.then(|| draw_mask(projected.len()));
        let head_input: Vec<F> = match &proj_mask {
            Some(m) => projected.iter().zip(m).map(|(&v, &k)| v * k).collect(),
            None => projected.clone(),
        };
        let logits = self.head.apply(&head_input);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation {
                stage: "head",
                layer: n_layers + 1,
            });
        }
        Ok(ForwardCache {
            generation: self.generation,
            features,
            fusion_weights,
            layers,
            pooled,
            proj_mask,
            head_input,
            logits,
        })
    }

    /// Eval-mode class probabilities `(p_NC, p_MCI)`.
    pub fn predict_proba(&self, input: &SegmentView<'_>) -> Result<[F; CLASSES]> {
        let mut unused = rng::stream(0, &[]);
        let cache = self.forward(input, false, &mut unused)?;
        let p = softmax(&cache.logits);
        Ok([p[0], p[1]])
    }

    /// Loss and exact gradients for every parameter from a forward cache of
    /// the current parameters.
    pub fn backward(&self, cache: &ForwardCache<'_, F>, label: Label) -> Result<(F, Gradients<F>)> {
        if cache.generation != self.generation {
            return Err(Error::InvalidArgument(
                "stale forward cache: parameters changed since forward".into(),
            ));
        }
        let mut grads = self.zeros_like();
        let (loss, dlogits) = cross_entropy_with_grad(&cache.logits, label);

        // head
        for (g, &d) in grads.head.bias.iter_mut().zip(&dlogits) {
            *g = *g + d;
        }
        outer_acc(&mut grads.head.weight, &dlogits, &cache.head_input);
        let mut d_proj = vec![F::zero(); self.config.projection];
        matvec_t_acc(&self.head.weight, &dlogits, &mut d_proj);
        if let Some(m) = &cache.proj_mask {
            for (d, &k) in d_proj.iter_mut().zip(m) {
                *d = *d * k;
            }
        }

        // projection
        for (g, &d) in grads.projection.bias.iter_mut().zip(&d_proj) {
            *g = *g + d;
        }
        outer_acc(&mut grads.projection.weight, &d_proj, &cache.pooled);
        let width = 2 * self.config.hidden;
        let mut d_pooled = vec![F::zero(); width];
        matvec_t_acc(&self.projection.weight, &d_proj, &mut d_pooled);

        // mean pooling
        let frames = cache.features.frame_count();
        let inv_t = F::one() / F::of(frames as f64);
        let mut d_out = Sequence::zeros(frames, width);
        for t in 0..frames {
            for (d, &g) in d_out.row_mut(t).iter_mut().zip(&d_pooled) {
                *d = g * inv_t;
            }
        }

        // recurrent stack, top to bottom
        let h = self.config.hidden;
        for li in (0..self.recurrent.len()).rev() {
            let layer = &self.recurrent[li];
            let lc = &cache.layers[li];
            let glayer = &mut grads.recurrent[li];
            let mut dx = Sequence::zeros(frames, lc.input.dim);
            backward_direction(
                &layer.forward,
                &mut glayer.forward,
                &lc.input,
                &lc.forward,
                false,
                &d_out,
                0,
                &mut dx,
            );
            backward_direction(
                &layer.backward,
                &mut glayer.backward,
                &lc.input,
                &lc.backward,
                true,
                &d_out,
                h,
                &mut dx,
            );
            if li > 0 {
                if let Some(m) = &cache.layers[li - 1].mask {
                    for (d, &k) in dx.data.iter_mut().zip(m) {
                        *d = *d * k;
                    }
                }
            }
            d_out = dx;
        }

        if let Some(g) = &mut grads.fusion {
            fuse_backward(&cache.fusion_weights, &cache.features, &d_out, g.logits_mut());
        }
        Ok((loss, grads))
    }
}

struct DirCache<F> {
    /// Activated gates per time step, `[i, f, g, o]` blocks of `hidden`.
    gates: Vec<F>,
    cells: Vec<F>,
    cell_tanh: Vec<F>,
    hidden: Vec<F>,
}

struct LayerCache<F> {
    input: Sequence<F>,
    forward: DirCache<F>,
    backward: DirCache<F>,
    /// Dropout mask applied to this layer's output before the next layer.
    mask: Option<Vec<F>>,
}

/// Activations saved by [`ModelParams::forward`] for the backward pass.
pub struct ForwardCache<'a, F> {
    generation: u64,
    features: SegmentView<'a>,
    fusion_weights: Vec<F>,
    layers: Vec<LayerCache<F>>,
    pooled: Vec<F>,
    proj_mask: Option<Vec<F>>,
    head_input: Vec<F>,
    pub logits: Vec<F>,
}

impl<F: Real> ForwardCache<'_, F> {
    pub fn probabilities(&self) -> Vec<F> {
        softmax(&self.logits)
    }
}

fn run_direction<F: Real>(p: &LstmDirection<F>, x: &Sequence<F>, reverse: bool) -> DirCache<F> {
    let h = p.hidden;
    let frames = x.frames;
    let mut cache = DirCache {
        gates: vec![F::zero(); frames * 4 * h],
        cells: vec![F::zero(); frames * h],
        cell_tanh: vec![F::zero(); frames * h],
        hidden: vec![F::zero(); frames * h],
    };
    let mut h_prev = vec![F::zero(); h];
    let mut c_prev = vec![F::zero(); h];
    let mut z = vec![F::zero(); 4 * h];
    for step in 0..frames {
        let t = if reverse { frames - 1 - step } else { step };
        z.copy_from_slice(&p.bias);
        matvec_acc(&p.w_x, x.row(t), &mut z);
        matvec_acc(&p.w_h, &h_prev, &mut z);
        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let g = z[2 * h + j].tanh();
            let o = sigmoid(z[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            let ct = c.tanh();
            gates[j] = i;
            gates[h + j] = f;
            gates[2 * h + j] = g;
            gates[3 * h + j] = o;
            cache.cells[t * h + j] = c;
            cache.cell_tanh[t * h + j] = ct;
            cache.hidden[t * h + j] = o * ct;
            c_prev[j] = c;
        }
        h_prev.copy_from_slice(&cache.hidden[t * h..(t + 1) * h]);
    }
    cache
}

/// Backpropagation through time for one direction. `d_out` holds dL/d output
/// for the whole layer; this direction reads columns `col..col + hidden`.
#[allow(clippy::too_many_arguments)]
fn backward_direction<F: Real>(
    p: &LstmDirection<F>,
    grad: &mut LstmDirection<F>,
    x: &Sequence<F>,
    cache: &DirCache<F>,
    reverse: bool,
    d_out: &Sequence<F>,
    col: usize,
    dx: &mut Sequence<F>,
) {
    let h = p.hidden;
    let frames = x.frames;
    let time = |step: usize| if reverse { frames - 1 - step } else { step };
    let zeros = vec![F::zero(); h];
    let mut dh_next = vec![F::zero(); h];
    let mut dc_next = vec![F::zero(); h];
    let mut dz = vec![F::zero(); 4 * h];
    for step in (0..frames).rev() {
        let t = time(step);
        let (c_prev, h_prev) = if step > 0 {
            let tp = time(step - 1);
            (&cache.cells[tp * h..(tp + 1) * h], &cache.hidden[tp * h..(tp + 1) * h])
        } else {
            (&zeros[..], &zeros[..])
        };
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let d_row = &d_out.row(t)[col..col + h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let ct = cache.cell_tanh[t * h + j];
            let dh = d_row[j] + dh_next[j];
            let d_o = dh * ct;
            let dc = dh * o * (F::one() - ct * ct) + dc_next[j];
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * f;
            dz[j] = d_i * i * (F::one() - i);
            dz[h + j] = d_f * f * (F::one() - f);
            dz[2 * h + j] = d_g * (F::one() - g * g);
            dz[3 * h + j] = d_o * o * (F::one() - o);
        }
        for (b, &d) in grad.bias.iter_mut().zip(&dz) {
            *b = *b + d;
        }
        outer_acc(&mut grad.w_x, &dz, x.row(t));
        outer_acc(&mut grad.w_h, &dz, h_prev);
        matvec_t_acc(&p.w_x, &dz, dx.row_mut(t));
        dh_next.iter_mut().for_each(|v| *v = F::zero());
        matvec_t_acc(&p.w_h, &dz, &mut dh_next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::FeatureSequence;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            layers: 3,
            input_dim: 4,
            hidden: 5,
            recurrent_layers: 2,
            projection: 3,
            dropout: 0.1,
            input: InputMode::Fused,
        }
    }

    fn features(frames: usize) -> FeatureSequence {
        let data = (0..3 * frames * 4)
            .map(|i| ((i * 37 % 11) as f32 - 5.0) * 0.2)
            .collect();
        FeatureSequence::new(3, frames, 4, 50.0, data).unwrap()
    }

    #[test]
    fn forget_gate_bias_starts_at_one() {
        let m = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 1).unwrap();
        let b = &m.recurrent[0].forward.bias;
        assert!(b[5..10].iter().all(|&v| v == 1.0));
        assert!(b[..5].iter().all(|&v| v != 1.0));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 3).unwrap();
        let b = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 3).unwrap();
        let c = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn logits_have_two_finite_entries_even_for_one_frame() {
        let m = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 1).unwrap();
        for frames in [1, 7] {
            let seq = features(frames);
            let cache = m.forward(&seq.view(), false, &mut rng::stream(0, &[])).unwrap();
            assert_eq!(cache.logits.len(), 2);
            assert!(cache.logits.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn eval_mode_is_deterministic_and_ignores_rng() {
        let m = ModelParams::<f32>::init(tiny_config(), &FusionConfig::prior(2, 5.0), 1).unwrap();
        let seq = features(9);
        let a = m.forward(&seq.view(), false, &mut rng::stream(1, &[])).unwrap();
        let b = m.forward(&seq.view(), false, &mut rng::stream(2, &[])).unwrap();
        assert_eq!(a.logits, b.logits);
    }

    #[test]
    fn train_mode_applies_dropout() {
        let m = ModelParams::<f32>::init(
            ModelConfig {
                dropout: 0.5,
                ..tiny_config()
            },
            &FusionConfig::uniform(),
            1,
        )
        .unwrap();
        let seq = features(9);
        let a = m.forward(&seq.view(), true, &mut rng::stream(1, &[])).unwrap();
        let b = m.forward(&seq.view(), true, &mut rng::stream(2, &[])).unwrap();
        let e = m.forward(&seq.view(), false, &mut rng::stream(2, &[])).unwrap();
        assert_ne!(a.logits, b.logits);
        assert_ne!(a.logits, e.logits);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = ModelParams::<f32>::init(tiny_config(), &FusionConfig::uniform(), 1).unwrap();
        let wrong_dim = FeatureSequence::new(3, 2, 5, 50.0, vec![0.0; 30]).unwrap();
        let wrong_layers = FeatureSequence::new(2, 2, 4, 50.0, vec![0.0; 16]).unwrap();
        let mut r = rng::stream(0, &[]);
        assert!(matches!(
            m.forward(&wrong_dim.view(), false, &mut r),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.forward(&wrong_layers.view(), false, &mut r),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn every_tensor_gets_a_gradient_entry() {
        let m = ModelParams::<f64>::init(tiny_config(), &FusionConfig::uniform(), 1).unwrap();
        let seq = features(6);
        let cache = m.forward(&seq.view(), true, &mut rng::stream(0, &[])).unwrap();
        let (_, g) = m.backward(&cache, Label::Mci).unwrap();
        let names: Vec<_> = m.tensors().into_iter().map(|(n, _, t)| (n, t.len())).collect();
        let gnames: Vec<_> = g.tensors().into_iter().map(|(n, _, t)| (n, t.len())).collect();
        assert_eq!(names, gnames);
        assert!(names.iter().any(|(n, _)| n == "fusion.p"));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut m = ModelParams::<f64>::init(tiny_config(), &FusionConfig::uniform(), 1).unwrap();
        let seq = features(4);
        let cache = m.forward(&seq.view(), false, &mut rng::stream(0, &[])).unwrap();
        m.tensors_mut()[0].2[0] += 1.0;
        assert!(m.backward(&cache, Label::Nc).is_err());
    }

    #[test]
    fn single_layer_mode_has_no_fusion_parameters() {
        let cfg = ModelConfig {
            input: InputMode::Layer { index: 2 },
            ..tiny_config()
        };
        let m = ModelParams::<f32>::init(cfg, &FusionConfig::uniform(), 1).unwrap();
        assert!(m.fusion.is_none());
        let bad = ModelConfig {
            input: InputMode::Layer { index: 4 },
            ..tiny_config()
        };
        assert!(ModelParams::<f32>::init(bad, &FusionConfig::uniform(), 1).is_err());
    }
}
