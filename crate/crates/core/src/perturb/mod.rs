//! Information-perturbation augmentation on raw audio: formant shifting,
//! pitch randomization and random parametric equalization, composed in that
//! order with parameters drawn from a seeded stream.

mod formant;
mod peq;
mod pitch;
mod wav;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use formant::{cepstral_cutoff, fft_size, formant_shift, Spectral};
pub use peq::{apply_bands, peaking_centers, peq, sample_bands, Band, BandKind, Biquad, MAX_RETRIES};
pub use pitch::{pitch_randomize, resample_to_len, wsola_stretch, HOP_SECONDS, WINDOW_SECONDS};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};
use crate::rng;

/// Mono audio with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioClip {
    pub fn new(sample_rate: u32, samples: Vec<f32>) -> Result<Self> {
        let clip = Self { sample_rate, samples };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(index) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(i) = self.samples.iter().position(|v| v.abs() > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} = {} outside [-1, 1]",
                self.samples[i]
            )));
        }
        Ok(())
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square difference to another clip of the same length.
    pub fn rms_difference(&self, other: &AudioClip) -> f64 {
        let n = self.samples.len().max(1) as f64;
        let ss: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum();
        (ss / n).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeqParams {
    pub n_peaking: usize,
    pub gain_db_range: (f64, f64),
    pub q_range: (f64, f64),
    pub low_shelf_hz: f64,
    /// Upper bound on the high-shelf frequency; the effective value is
    /// `min(this, 0.45 * sample_rate)`.
    pub high_shelf_max_hz: f64,
}

impl Default for PeqParams {
    fn default() -> Self {
        Self {
            n_peaking: 8,
            gain_db_range: (-12.0, 12.0),
            q_range: (2.0, 5.0),
            low_shelf_hz: 60.0,
            high_shelf_max_hz: 10_000.0,
        }
    }
}

impl PeqParams {
    pub fn high_shelf_hz(&self, sample_rate: u32) -> f64 {
        self.high_shelf_max_hz.min(0.45 * sample_rate as f64)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let (g0, g1) = self.gain_db_range;
        let (q0, q1) = self.q_range;
        if !(g0 <= g1 && g0.is_finite() && g1.is_finite()) {
            return Err(Error::InvalidArgument(format!("empty gain range [{g0}, {g1}]")));
        }
        if !(q0 <= q1 && q0 > 0.0 && q1.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid Q range [{q0}, {q1}]")));
        }
        let hi = self.high_shelf_hz(sample_rate);
        if !(self.low_shelf_hz > 0.0 && self.low_shelf_hz < hi) {
            return Err(Error::InvalidArgument(format!(
                "shelf frequencies {} Hz and {hi} Hz are not ordered below Nyquist",
                self.low_shelf_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbParams {
    /// Formant ratio drawn from U[lo, hi], inverted with probability 0.5.
    pub formant_ratio_range: (f64, f64),
    /// Pitch ratio drawn from U[lo, hi], inverted with probability 0.5.
    pub pitch_ratio_range: (f64, f64),
    pub peq: PeqParams,
    pub seed: u64,
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            formant_ratio_range: (1.0, 1.4),
            pitch_ratio_range: (1.0, 2.0),
            peq: PeqParams::default(),
            seed: 0,
        }
    }
}

impl PerturbParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Ratios pinned to 1 and every equalizer gain pinned to 0 dB.
    pub fn identity(seed: u64) -> Self {
        Self {
            formant_ratio_range: (1.0, 1.0),
            pitch_ratio_range: (1.0, 1.0),
            peq: PeqParams {
                gain_db_range: (0.0, 0.0),
                ..PeqParams::default()
            },
            seed,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        for (name, (lo, hi)) in [("formant", self.formant_ratio_range), ("pitch", self.pitch_ratio_range)] {
            if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} ratio range [{lo}, {hi}] must satisfy 1 <= lo <= hi"
                )));
            }
        }
        self.peq.validate(sample_rate)
    }
}

/// The concrete values drawn for one perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawnParams {
    pub formant_ratio: f64,
    pub pitch_ratio: f64,
    pub bands: Vec<Band>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbOutput {
    pub clip: AudioClip,
    pub drawn: DrawnParams,
    /// Samples hard-limited to [-1, 1].
    pub clipped: usize,
}

const FORMANT_STREAM: u64 = 1;
const PITCH_STREAM: u64 = 2;
const PEQ_STREAM: u64 = 3;

fn draw_ratio((lo, hi): (f64, f64), rng: &mut impl Rng) -> f64 {
    let r = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        1.0 / r
    } else {
        r
    }
}

/// Draws the random parameters for `params` at `sample_rate`.
pub fn draw_params(params: &PerturbParams, sample_rate: u32) -> Result<DrawnParams> {
    params.validate(sample_rate)?;
    let formant_ratio = draw_ratio(
        params.formant_ratio_range,
        &mut rng::stream(params.seed, &[FORMANT_STREAM]),
    );
    let pitch_ratio = draw_ratio(params.pitch_ratio_range, &mut rng::stream(params.seed, &[PITCH_STREAM]));
    let bands = sample_bands(&params.peq, sample_rate, &mut rng::stream(params.seed, &[PEQ_STREAM]))?;
    Ok(DrawnParams {
        formant_ratio,
        pitch_ratio,
        bands,
    })
}

/// formant shift -> pitch randomization -> parametric EQ, then a hard limit
/// at ±1. Deterministic in `(clip, params)`.
pub fn perturb_audio(clip: &AudioClip, params: &PerturbParams) -> Result<PerturbOutput> {
    clip.validate()?;
    let drawn = draw_params(params, clip.sample_rate)?;
    let shifted = if drawn.formant_ratio == 1.0 {
        clip.clone()
    } else {
        formant_shift(clip, drawn.formant_ratio)?
    };
    let pitched = pitch_randomize(&shifted, drawn.pitch_ratio)?;
    let mut out = apply_bands(&pitched, &drawn.bands)?;
    let mut clipped = 0;
    for s in &mut out.samples {
        if s.abs() > 1.0 {
            *s = s.clamp(-1.0, 1.0);
            clipped += 1;
        }
    }
    Ok(PerturbOutput {
        clip: out,
        drawn,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_clip(seed: u64, n: usize) -> AudioClip {
        let mut r = rng::stream(seed, &[]);
        AudioClip::new(16000, (0..n).map(|_| r.random_range(-0.3f32..0.3)).collect()).unwrap()
    }

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(0, vec![]).is_err());
        assert!(AudioClip::new(8000, vec![f32::NAN]).is_err());
        assert!(AudioClip::new(8000, vec![1.5]).is_err());
        assert!(AudioClip::new(8000, vec![1.0, -1.0]).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(PerturbParams::default().validate(16000).is_ok());
        let bad = PerturbParams {
            pitch_ratio_range: (0.8, 1.2),
            ..Default::default()
        };
        assert!(bad.validate(16000).is_err());
        let empty = PerturbParams {
            formant_ratio_range: (1.3, 1.1),
            ..Default::default()
        };
        assert!(empty.validate(16000).is_err());
        // shelves cannot be ordered at a tiny sample rate
        assert!(PerturbParams::default().validate(100).is_err());
    }

    #[test]
    fn pinned_identity_returns_input() {
        let clip = noise_clip(1, 8000);
        let out = perturb_audio(&clip, &PerturbParams::identity(9)).unwrap();
        assert_eq!(out.clip, clip);
        assert_eq!(out.clipped, 0);
        assert_eq!((out.drawn.formant_ratio, out.drawn.pitch_ratio), (1.0, 1.0));
    }

    #[test]
    fn seeds_control_the_output() {
        let clip = noise_clip(2, 6000);
        let a = perturb_audio(&clip, &PerturbParams::with_seed(5)).unwrap();
        let b = perturb_audio(&clip, &PerturbParams::with_seed(5)).unwrap();
        let c = perturb_audio(&clip, &PerturbParams::with_seed(6)).unwrap();
        assert_eq!(a, b);
        assert!(a.clip.rms_difference(&c.clip) > 0.0);
        assert_eq!(a.clip.samples.len(), clip.samples.len());
        assert!(a.clip.samples.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn drawn_ratios_are_in_range_or_inverted() {
        let mut inverted = 0;
        for seed in 0..200 {
            let d = draw_params(&PerturbParams::with_seed(seed), 16000).unwrap();
            let f = d.formant_ratio.max(1.0 / d.formant_ratio);
            let p = d.pitch_ratio.max(1.0 / d.pitch_ratio);
            assert!((1.0..=1.4 + 1e-12).contains(&f));
            assert!((1.0..=2.0 + 1e-12).contains(&p));
            inverted += usize::from(d.pitch_ratio < 1.0);
        }
        assert!((60..=140).contains(&inverted), "{inverted}");
    }

    #[test]
    fn loud_input_is_limited_and_counted() {
        let clip = AudioClip::new(16000, vec![0.99; 4000]).unwrap();
        let params = PerturbParams {
            formant_ratio_range: (1.0, 1.0),
            pitch_ratio_range: (1.0, 1.0),
            peq: PeqParams {
                gain_db_range: (12.0, 12.0),
                ..PeqParams::default()
            },
            seed: 0,
        };
        let out = perturb_audio(&clip, &params).unwrap();
        assert!(out.clipped > 0);
        assert!(out.clip.samples.iter().all(|v| v.abs() <= 1.0));
    }
}
