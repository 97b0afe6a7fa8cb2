//! Randomized parametric equalizer: a low shelf, a bank of peaking filters
//! and a high shelf, each a second-order recursive section.
//!
//! Coefficients follow the widely used audio-EQ cookbook designs. Shelves
//! use slope S = 1.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AudioClip, PeqParams};
use crate::error::{Error, Result};

/// Maximum number of parameter re-draws when a section fails the stability
/// check.
pub const MAX_RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    LowShelf,
    Peaking,
    HighShelf,
}

/// Design parameters of one section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub kind: BandKind,
    pub freq_hz: f64,
    pub gain_db: f64,
    pub q: f64,
}

/// Normalized coefficients (a0 = 1) of
/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Shelf bandwidth term for slope S = 1.
fn shelf_alpha(sin_w0: f64) -> f64 {
    sin_w0 / 2.0 * std::f64::consts::SQRT_2
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
        }
    }

    pub fn design(band: &Band, sample_rate: f64) -> Self {
        let a = 10f64.powf(band.gain_db / 40.0);
        let w0 = 2.0 * PI * band.freq_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        match band.kind {
            BandKind::Peaking => {
                let alpha = sin / (2.0 * band.q);
                Self::normalized(
                    [1.0 + alpha * a, -2.0 * cos, 1.0 - alpha * a],
                    [1.0 + alpha / a, -2.0 * cos, 1.0 - alpha / a],
                )
            }
            BandKind::LowShelf => {
                let k = 2.0 * a.sqrt() * shelf_alpha(sin);
                Self::normalized(
                    [
                        a * ((a + 1.0) - (a - 1.0) * cos + k),
                        2.0 * a * ((a - 1.0) - (a + 1.0) * cos),
                        a * ((a + 1.0) - (a - 1.0) * cos - k),
                    ],
                    [
                        (a + 1.0) + (a - 1.0) * cos + k,
                        -2.0 * ((a - 1.0) + (a + 1.0) * cos),
                        (a + 1.0) + (a - 1.0) * cos - k,
                    ],
                )
            }
            BandKind::HighShelf => {
                let k = 2.0 * a.sqrt() * shelf_alpha(sin);
                Self::normalized(
                    [
                        a * ((a + 1.0) + (a - 1.0) * cos + k),
                        -2.0 * a * ((a - 1.0) + (a + 1.0) * cos),
                        a * ((a + 1.0) + (a - 1.0) * cos - k),
                    ],
                    [
                        (a + 1.0) - (a - 1.0) * cos + k,
                        2.0 * ((a - 1.0) - (a + 1.0) * cos),
                        (a + 1.0) - (a - 1.0) * cos - k,
                    ],
                )
            }
        }
    }

    /// Magnitudes of the two roots of `z^2 + a1 z + a2`.
    pub fn pole_magnitudes(&self) -> [f64; 2] {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            [((-self.a1 + s) / 2.0).abs(), ((-self.a1 - s) / 2.0).abs()]
        } else {
            // complex-conjugate pair with |z|^2 = a2
            let m = self.a2.sqrt();
            [m, m]
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_magnitudes().iter().all(|&m| m < 1.0)
    }

    /// Filters `x` in place (transposed direct form II).
    pub fn process(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + z1;
            z1 = self.b1 * input - self.a1 * y + z2;
            z2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }

    /// `|H(e^{jw})|` at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let eval = |c0: f64, c1: f64, c2: f64| {
            let re = c0 + c1 * w.cos() + c2 * (2.0 * w).cos();
            let im = -(c1 * w.sin() + c2 * (2.0 * w).sin());
            re.hypot(im)
        };
        eval(self.b0, self.b1, self.b2) / eval(1.0, self.a1, self.a2)
    }
}

/// Center frequencies of the peaking bands: log-spaced strictly between the
/// two shelf frequencies.
pub fn peaking_centers(params: &PeqParams, sample_rate: u32) -> Vec<f64> {
    let lo = params.low_shelf_hz;
    let hi = params.high_shelf_hz(sample_rate);
    let n = params.n_peaking;
    (1..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n + 1) as f64))
        .collect()
}

fn draw_bands(params: &PeqParams, sample_rate: u32, rng: &mut impl Rng) -> Vec<Band> {
    let (g_lo, g_hi) = params.gain_db_range;
    let (q_lo, q_hi) = params.q_range;
    let mut bands = Vec::with_capacity(params.n_peaking + 2);
    bands.push(Band {
        kind: BandKind::LowShelf,
        freq_hz: params.low_shelf_hz,
        gain_db: rng.random_range(g_lo..=g_hi),
        q: std::f64::consts::FRAC_1_SQRT_2,
    });
    for f in peaking_centers(params, sample_rate) {
        let gain_db = rng.random_range(g_lo..=g_hi);
        bands.push(Band {
            kind: BandKind::Peaking,
            freq_hz: f,
            gain_db,
            q: rng.random_range(q_lo..=q_hi),
        });
    }
    bands.push(Band {
        kind: BandKind::HighShelf,
        freq_hz: params.high_shelf_hz(sample_rate),
        gain_db: rng.random_range(g_lo..=g_hi),
        q: std::f64::consts::FRAC_1_SQRT_2,
    });
    bands
}

/// Draws a band set whose every section is stable, re-drawing up to
/// [`MAX_RETRIES`] times.
pub fn sample_bands(params: &PeqParams, sample_rate: u32, rng: &mut impl Rng) -> Result<Vec<Band>> {
    params.validate(sample_rate)?;
    for _ in 0..MAX_RETRIES {
        let bands = draw_bands(params, sample_rate, rng);
        if bands.iter().all(|b| Biquad::design(b, sample_rate as f64).is_stable()) {
            return Ok(bands);
        }
    }
    Err(Error::UnstableFilter { retries: MAX_RETRIES })
}

/// Applies the cascade. Sections with exactly 0 dB gain are the identity and
/// are skipped, so an all-zero design returns the input bit for bit.
pub fn apply_bands(clip: &AudioClip, bands: &[Band]) -> Result<AudioClip> {
    let sr = clip.sample_rate as f64;
    let mut x: Vec<f64> = clip.samples.iter().map(|&v| v as f64).collect();
    for band in bands.iter().filter(|b| b.gain_db != 0.0) {
        let section = Biquad::design(band, sr);
        if !section.is_stable() {
            return Err(Error::UnstableFilter { retries: 0 });
        }
        section.process(&mut x);
    }
    Ok(AudioClip {
        sample_rate: clip.sample_rate,
        samples: x.into_iter().map(|v| v as f32).collect(),
    })
}

/// Random parametric equalization of `clip`.
pub fn peq(clip: &AudioClip, params: &PeqParams, rng: &mut impl Rng) -> Result<(AudioClip, Vec<Band>)> {
    let bands = sample_bands(params, clip.sample_rate, rng)?;
    Ok((apply_bands(clip, &bands)?, bands))
}
