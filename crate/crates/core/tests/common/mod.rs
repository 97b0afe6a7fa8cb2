//! Helpers shared by the integration test targets. Oracles here are
//! independent of the code paths they check.

#![allow(dead_code)]

use layerlens::feature_store::{FeatureSequence, Label};
use layerlens::model::{cross_entropy, ModelParams};
use layerlens::rng;

/// Worst violation found by a finite-difference sweep.
#[derive(Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: Vec<String>,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

fn loss_at(params: &ModelParams<f64>, seq: &FeatureSequence, label: Label, train: bool, seed: u64) -> f64 {
    let cache = params
        .forward(&seq.view(), train, &mut rng::stream(seed, &[]))
        .expect("forward");
    cross_entropy(&cache.logits, label)
}

/// Which coordinates of each tensor a finite-difference sweep visits.
#[derive(Debug, Clone, Copy)]
pub enum Coverage {
    All,
    /// Up to `per_tensor` distinct coordinates per tensor drawn from a seeded
    /// stream, always including the first and last.
    Sample {
        per_tensor: usize,
        seed: u64,
    },
}

fn coordinates(len: usize, coverage: Coverage, tensor: usize) -> Vec<usize> {
    match coverage {
        Coverage::All => (0..len).collect(),
        Coverage::Sample { per_tensor, .. } if per_tensor >= len => (0..len).collect(),
        Coverage::Sample { per_tensor, seed } => {
            use rand::seq::index::sample;
            let mut idx = sample(&mut rng::stream(seed, &[tensor as u64]), len, per_tensor).into_vec();
            idx[0] = 0;
            if per_tensor > 1 {
                idx[1] = len - 1;
            }
            idx.sort_unstable();
            idx.dedup();
            idx
        }
    }
}

/// Compares every analytic gradient coordinate against a central difference
/// with step `step`. A coordinate passes when the absolute error is within
/// `abs_tol` or the relative error within `rel_tol`.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_check(
    params: &ModelParams<f64>,
    seq: &FeatureSequence,
    label: Label,
    train: bool,
    seed: u64,
    step: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> GradCheckReport {
    finite_difference_check_with(params, seq, label, train, seed, step, rel_tol, abs_tol, Coverage::All)
}

#[allow(clippy::too_many_arguments)]
pub fn finite_difference_check_with(
    params: &ModelParams<f64>,
    seq: &FeatureSequence,
    label: Label,
    train: bool,
    seed: u64,
    step: f64,
    rel_tol: f64,
    abs_tol: f64,
    coverage: Coverage,
) -> GradCheckReport {
    let cache = params
        .forward(&seq.view(), train, &mut rng::stream(seed, &[]))
        .expect("forward");
    let (_, grads) = params.backward(&cache, label).expect("backward");
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, _, t)| (n, t.to_vec())).collect();

    let mut work = params.clone();
    let mut report = GradCheckReport::default();
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        for i in coordinates(grad.len(), coverage, ti) {
            let a = grad[i];
            let orig = work.tensors()[ti].2[i];
            work.tensors_mut()[ti].2[i] = orig + step;
            let up = loss_at(&work, seq, label, train, seed);
            work.tensors_mut()[ti].2[i] = orig - step;
            let down = loss_at(&work, seq, label, train, seed);
            work.tensors_mut()[ti].2[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            report.checked += 1;
            if abs > abs_tol {
                report.max_abs_err = report.max_abs_err.max(abs);
                report.max_rel_err = report.max_rel_err.max(rel);
            }
            if abs > abs_tol && rel > rel_tol {
                report
                    .failures
                    .push(format!("{name}[{i}]: analytic {a:.6e} numeric {numeric:.6e}"));
            }
        }
    }
    report
}

pub fn smooth_features(layers: usize, frames: usize, dim: usize, salt: f32) -> FeatureSequence {
    let data = (0..layers * frames * dim)
        .map(|i| ((i as f32 * 0.731 + salt).sin() + (i as f32 * 0.117).cos()) * 0.8)
        .collect();
    FeatureSequence::new(layers, frames, dim, 50.0, data).unwrap()
}

/// Two-sided binomial 95% band for an accuracy measured on `n` trials
/// around chance level 0.5 (normal approximation).
pub fn chance_band(n: usize) -> (f64, f64) {
    let half = 1.96 * (0.25 / n as f64).sqrt();
    (0.5 - half, 0.5 + half)
}

/// `|X[k]|` for `k = 0..=n/2` by direct summation.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Frequency of the largest Hann-windowed DFT magnitude between `lo_hz`
/// and `hi_hz`, evaluated on a 1 Hz grid.
pub fn spectral_peak_hz(x: &[f32], sample_rate: u32, lo_hz: f64, hi_hz: f64) -> f64 {
    let n = x.len();
    let w: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v as f64 * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let mut best = (f64::NEG_INFINITY, lo_hz);
    let mut f = lo_hz;
    while f <= hi_hz {
        let (mut re, mut im) = (0.0, 0.0);
        let step = 2.0 * std::f64::consts::PI * f / sample_rate as f64;
        for (t, &v) in w.iter().enumerate() {
            let ang = step * t as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        let m = re.hypot(im);
        if m > best.0 {
            best = (m, f);
        }
        f += 1.0;
    }
    best.1
}
