//! Formant shifting by warping the cepstrally smoothed spectral envelope.
//!
//! Each short-time spectrum `X(f)` is split into a smooth envelope `E(f)`
//! (low-quefrency cepstral lifter) and the residual fine structure. The
//! envelope is moved along the frequency axis, `E'(f) = E(f / ratio)`, and
//! the frame is resynthesized as `X(f) * E'(f) / E(f)`, which leaves the
//! harmonics (and so the pitch) in place.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::AudioClip;
use crate::error::{Error, Result};

/// Analysis frame length target; the FFT size is the next power of two.
pub const FRAME_SECONDS: f64 = 0.04;

/// Number of cepstral coefficients kept for the envelope:
/// `sample_rate / 1000 * 1.25`.
pub fn cepstral_cutoff(sample_rate: u32) -> usize {
    ((sample_rate as f64 / 1000.0 * 1.25).round() as usize).max(1)
}

pub fn fft_size(sample_rate: u32) -> usize {
    ((FRAME_SECONDS * sample_rate as f64).ceil() as usize)
        .next_power_of_two()
        .max(16)
}

/// Reusable forward/inverse transforms of one size.
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Cepstrally smoothed magnitude envelope of a full complex spectrum,
    /// keeping quefrencies `|q| < cutoff`.
    pub fn envelope(&self, spectrum: &[Complex64], cutoff: usize) -> Vec<f64> {
        let n = self.n;
        let mut c: Vec<Complex64> = spectrum
            .iter()
            .map(|z| Complex64::new((z.norm() + 1e-12).ln(), 0.0))
            .collect();
        self.inverse.process(&mut c);
        let cutoff = cutoff.min(n / 2);
        for (q, v) in c.iter_mut().enumerate() {
            let keep = q < cutoff || n - q < cutoff;
            *v = if keep { *v / n as f64 } else { Complex64::new(0.0, 0.0) };
        }
        self.forward.process(&mut c);
        c.iter().map(|z| z.re.exp()).collect()
    }
}

/// `E(f / ratio)` on bins `0..=n/2` by linear interpolation, clamped at
/// Nyquist.
fn warp_half(env: &[f64], n: usize, ratio: f64) -> Vec<f64> {
    let nyq = n / 2;
    (0..=nyq)
        .map(|k| {
            let src = (k as f64 / ratio).min(nyq as f64);
            let i = src.floor() as usize;
            let frac = src - i as f64;
            if i >= nyq || frac == 0.0 {
                env[i.min(nyq)]
            } else {
                env[i] * (1.0 - frac) + env[i + 1] * frac
            }
        })
        .collect()
}

/// Shifts the spectral envelope by `ratio`. The output has exactly the input
/// sample count.
pub fn formant_shift(clip: &AudioClip, ratio: f64) -> Result<AudioClip> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "formant ratio must be positive, got {ratio}"
        )));
    }
    let len = clip.samples.len();
    if len == 0 {
        return Ok(clip.clone());
    }
    let n = fft_size(clip.sample_rate);
    let hop = n / 4;
    let cutoff = cepstral_cutoff(clip.sample_rate);
    let spectral = Spectral::new(n);
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();

    // pad by a full frame on each side so every sample sees full overlap
    let mut x = vec![0.0; n];
    x.extend(clip.samples.iter().map(|&v| v as f64));
    x.resize(len + 2 * n + hop, 0.0);
    let mut out = vec![0.0; x.len()];
    let mut norm = vec![0.0; x.len()];

    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= x.len() {
        for i in 0..n {
            buf[i] = Complex64::new(x[start + i] * window[i], 0.0);
        }
        spectral.forward.process(&mut buf);
        let env = spectral.envelope(&buf, cutoff);
        let warped = warp_half(&env, n, ratio);
        for k in 0..=n / 2 {
            let gain = warped[k] / env[k];
            buf[k] *= gain;
            if k != 0 && k != n / 2 {
                buf[n - k] *= gain;
            }
        }
        spectral.inverse.process(&mut buf);
        for i in 0..n {
            out[start + i] += buf[i].re / n as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
        start += hop;
    }

    let samples = (0..len)
        .map(|i| {
            let j = i + n;
            (if norm[j] > 1e-9 { out[j] / norm[j] } else { 0.0 }) as f32
        })
        .collect();
    Ok(AudioClip {
        sample_rate: clip.sample_rate,
        samples,
    })
}
