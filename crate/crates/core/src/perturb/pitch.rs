//! Pitch randomization: time-stretch by the ratio with waveform-similarity
//! overlap-add (WSOLA), then resample back to the original length. The
//! stretch keeps local periodicity; the resample scales every frequency by
//! the ratio and restores the duration.

use std::f64::consts::PI;

use super::AudioClip;
use crate::error::{Error, Result};

/// Analysis/synthesis window length.
pub const WINDOW_SECONDS: f64 = 0.025;
/// Synthesis hop.
pub const HOP_SECONDS: f64 = 0.010;

/// Zero crossings on each side of the resampling kernel.
const SINC_HALF_WIDTH: usize = 16;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Stretches `x` to about `ratio * len` samples without changing its local
/// frequency content.
pub fn wsola_stretch(x: &[f64], ratio: f64, sample_rate: u32) -> Vec<f64> {
    let sr = sample_rate as f64;
    let win = ((WINDOW_SECONDS * sr).round() as usize).max(4);
    let hop_s = ((HOP_SECONDS * sr).round() as usize).clamp(1, win - 1);
    let hop_a = hop_s as f64 / ratio;
    let tolerance = hop_s / 2;
    let out_len = (x.len() as f64 * ratio).round() as usize;
    if x.is_empty() || out_len == 0 {
        return Vec::new();
    }

    // zero-pad so every window and search position is in range
    let pad = win + tolerance + hop_s;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(x);
    padded.resize(padded.len() + pad + win, 0.0);

    let w = hann(win);
    let frames = out_len.div_ceil(hop_s) + 1;
    let mut out = vec![0.0; frames * hop_s + win];
    let mut norm = vec![0.0; out.len()];
    let max_start = padded.len() - win;

    let mut prev: Option<usize> = None;
    for k in 0..frames {
        let ideal = (pad as f64 + k as f64 * hop_a).round() as isize - (win / 2) as isize;
        let ideal = ideal.clamp(0, max_start as isize) as usize;
        let start = match prev {
            None => ideal,
            Some(p) => {
                // natural continuation of the previously copied segment
                let target = (p + hop_s).min(max_start);
                let lo = ideal.saturating_sub(tolerance);
                let hi = (ideal + tolerance).min(max_start);
                let mut best = (f64::NEG_INFINITY, ideal);
                for cand in lo..=hi {
                    let score: f64 = (0..win).map(|i| padded[cand + i] * padded[target + i]).sum();
                    if score > best.0 {
                        best = (score, cand);
                    }
                }
                best.1
            }
        };
        let at = k * hop_s;
        for i in 0..win {
            out[at + i] += w[i] * padded[start + i];
            norm[at + i] += w[i];
        }
        prev = Some(start);
    }

    // output sample j corresponds to input position (j / ratio); the first
    // frame was centered on the pad boundary, so drop half a window.
    let offset = win / 2;
    (0..out_len)
        .map(|j| {
            let n = norm[j + offset];
            if n > 1e-9 {
                out[j + offset] / n
            } else {
                0.0
            }
        })
        .collect()
}

/// Band-limited resampling of `x` to exactly `target_len` samples spanning
/// the same duration. A Hann-windowed sinc kernel is used, with the cutoff
/// lowered when decimating.
pub fn resample_to_len(x: &[f64], target_len: usize) -> Vec<f64> {
    if x.is_empty() || target_len == 0 {
        return vec![0.0; target_len];
    }
    if target_len == x.len() {
        return x.to_vec();
    }
    let step = x.len() as f64 / target_len as f64;
    let cutoff = (1.0 / step).min(1.0);
    let half = SINC_HALF_WIDTH as f64 / cutoff;
    (0..target_len)
        .map(|j| {
            let pos = j as f64 * step;
            let lo = (pos - half).ceil().max(0.0) as usize;
            let hi = ((pos + half).floor() as usize).min(x.len() - 1);
            let mut acc = 0.0;
            for (i, &v) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let t = i as f64 - pos;
                let window = 0.5 + 0.5 * (PI * t / half).cos();
                acc += v * cutoff * sinc(cutoff * t) * window;
            }
            acc
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Scales the fundamental frequency by `ratio` and keeps the sample count.
/// `ratio == 1` returns the input unchanged.
pub fn pitch_randomize(clip: &AudioClip, ratio: f64) -> Result<AudioClip> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "pitch ratio must be positive, got {ratio}"
        )));
    }
    if ratio == 1.0 {
        return Ok(clip.clone());
    }
    let x: Vec<f64> = clip.samples.iter().map(|&v| v as f64).collect();
    let stretched = wsola_stretch(&x, ratio, clip.sample_rate);
    let y = resample_to_len(&stretched, x.len());
    Ok(AudioClip {
        sample_rate: clip.sample_rate,
        samples: y.into_iter().map(|v| v as f32).collect(),
    })
}
