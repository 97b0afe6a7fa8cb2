mod common;

use std::f64::consts::PI;

use layerlens::perturb::{
    apply_bands, formant_shift, perturb_audio, pitch_randomize, sample_bands, AudioClip, Band, BandKind, Biquad,
    PeqParams, PerturbParams,
};
use layerlens::rng;
use proptest::prelude::*;
use rand::Rng;

use common::{dft_magnitudes, spectral_peak_hz};

fn sine_clip(freq: f64, sr: u32, seconds: f64) -> AudioClip {
    let n = (sr as f64 * seconds) as usize;
    AudioClip::new(
        sr,
        (0..n)
            .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin()) as f32)
            .collect(),
    )
    .unwrap()
}

#[test]
fn pitch_ratio_two_moves_a_440_hz_peak_to_880() {
    let clip = sine_clip(440.0, 16000, 1.0);
    let out = pitch_randomize(&clip, 2.0).unwrap();
    assert_eq!(out.samples.len(), clip.samples.len());
    let peak = spectral_peak_hz(&out.samples[2000..14000], 16000, 100.0, 2000.0);
    assert!((peak - 880.0).abs() <= 0.03 * 880.0, "peak at {peak} Hz");
}

#[test]
fn pitch_ratio_half_lowers_the_peak() {
    let clip = sine_clip(600.0, 16000, 1.0);
    let out = pitch_randomize(&clip, 0.5).unwrap();
    let peak = spectral_peak_hz(&out.samples[2000..14000], 16000, 100.0, 2000.0);
    assert!((peak - 300.0).abs() <= 0.03 * 300.0, "peak at {peak} Hz");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn pitch_keeps_duration_for_ratios_in_range(ratio in 0.5f64..=2.0, len in 800usize..6000) {
        let clip = AudioClip::new(8000, (0..len).map(|i| ((i as f32) * 0.05).sin() * 0.4).collect()).unwrap();
        let out = pitch_randomize(&clip, ratio).unwrap();
        prop_assert!((out.samples.len() as i64 - len as i64).abs() <= 512);
        prop_assert!(out.samples.iter().all(|v| v.is_finite()));
    }
}

/// Impulse train at `f0` through a band-pass resonator at `formant` Hz
/// (zeros at DC and Nyquist keep the envelope symmetric about the peak).
fn vowel(f0: f64, formant: f64, sr: u32, seconds: f64) -> AudioClip {
    let n = (sr as f64 * seconds) as usize;
    let period = (sr as f64 / f0).round() as usize;
    let r = (-PI * 80.0 / sr as f64).exp();
    let theta = 2.0 * PI * formant / sr as f64;
    let (a1, a2) = (-2.0 * r * theta.cos(), r * r);
    let (mut y1, mut y2) = (0.0, 0.0);
    let excitation = |i: usize| if i.is_multiple_of(period) { 1.0 } else { 0.0 };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = excitation(i) - if i >= 2 { excitation(i - 2) } else { 0.0 };
        let y = x - a1 * y1 - a2 * y2;
        y2 = y1;
        y1 = y;
        out.push(y);
    }
    let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    AudioClip::new(sr, out.iter().map(|v| (0.8 * v / max) as f32).collect()).unwrap()
}

/// Cepstrally smoothed envelope peak of one Hann-windowed frame, computed
/// with a direct DFT.
fn envelope_peak_hz(x: &[f32], sr: u32, coeffs: usize) -> f64 {
    let n = x.len();
    let frame: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    let mag = dft_magnitudes(&frame);
    let logmag: Vec<f64> = mag.iter().map(|m| (m + 1e-12).ln()).collect();
    // real cepstrum of a real, even log spectrum: cosine transform
    let half = n / 2;
    let full_log = |k: usize| if k <= half { logmag[k] } else { logmag[n - k] };
    let cep: Vec<f64> = (0..coeffs)
        .map(|q| {
            (0..n)
                .map(|k| full_log(k) * (2.0 * PI * (q * k) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 1..half {
        let env: f64 = cep[0]
            + 2.0
                * (1..coeffs)
                    .map(|q| cep[q] * (2.0 * PI * (q * k) as f64 / n as f64).cos())
                    .sum::<f64>();
        if env > best.0 {
            best = (env, k as f64 * sr as f64 / n as f64);
        }
    }
    best.1
}

#[test]
fn formant_ratio_moves_envelope_peak() {
    let sr = 16000;
    let clip = vowel(100.0, 700.0, sr, 0.5);
    let before = envelope_peak_hz(&clip.samples[3000..4024], sr, 20);
    let out = formant_shift(&clip, 1.3).unwrap();
    assert_eq!(out.samples.len(), clip.samples.len());
    let after = envelope_peak_hz(&out.samples[3000..4024], sr, 20);
    assert!((before - 700.0).abs() <= 0.05 * 700.0, "input envelope peak {before}");
    assert!((after - 910.0).abs() <= 0.05 * 910.0, "output envelope peak {after}");
}

#[test]
fn formant_shift_keeps_the_harmonic_spacing() {
    let sr = 16000;
    let clip = vowel(200.0, 700.0, sr, 0.5);
    let out = formant_shift(&clip, 1.3).unwrap();
    // the strongest partial moves from ~700 to ~900 Hz but stays a harmonic of 200 Hz
    let peak = spectral_peak_hz(&out.samples[2000..6000], sr, 100.0, 2000.0);
    let harmonic = (peak / 200.0).round() * 200.0;
    assert!((peak - harmonic).abs() < 10.0, "peak {peak}");
}

#[test]
fn boosted_band_gains_energy_on_white_noise() {
    let sr = 16000u32;
    let mut r = rng::stream(11, &[]);
    let samples: Vec<f32> = (0..8192).map(|_| r.random_range(-0.25f32..0.25)).collect();
    let clip = AudioClip::new(sr, samples).unwrap();
    let band = Band {
        kind: BandKind::Peaking,
        freq_hz: 2000.0,
        gain_db: 12.0,
        q: 3.0,
    };
    let out = apply_bands(&clip, &[band]).unwrap();
    let band_energy = |x: &[f32]| {
        let frame: Vec<f64> = x[1024..5120].iter().map(|&v| v as f64).collect();
        let mag = dft_magnitudes(&frame);
        let hz = sr as f64 / frame.len() as f64;
        mag.iter()
            .enumerate()
            .filter(|(k, _)| ((*k as f64 * hz) - 2000.0).abs() < 150.0)
            .map(|(_, m)| m * m)
            .sum::<f64>()
    };
    let ratio = band_energy(&out.samples) / band_energy(&clip.samples);
    assert!(ratio > 1.0, "ratio {ratio}");
    // +12 dB is about 15.8x in power at the center
    assert!(ratio > 5.0, "ratio {ratio}");
}

#[test]
fn zero_gain_equalizer_is_exact_identity_and_seeded() {
    let clip = sine_clip(123.0, 8000, 0.5);
    let p = PeqParams {
        gain_db_range: (0.0, 0.0),
        ..PeqParams::default()
    };
    let bands = sample_bands(&p, 8000, &mut rng::stream(1, &[])).unwrap();
    assert_eq!(apply_bands(&clip, &bands).unwrap(), clip);
    let q = PeqParams::default();
    let a = apply_bands(&clip, &sample_bands(&q, 8000, &mut rng::stream(2, &[])).unwrap()).unwrap();
    let b = apply_bands(&clip, &sample_bands(&q, 8000, &mut rng::stream(2, &[])).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sampled_equalizers_are_pole_stable() {
    let p = PeqParams::default();
    for seed in 0..2000u64 {
        for sr in [8000u32, 16000, 44100] {
            for band in sample_bands(&p, sr, &mut rng::stream(seed, &[sr as u64])).unwrap() {
                let m = Biquad::design(&band, sr as f64).pole_magnitudes();
                assert!(m.iter().all(|&v| v < 1.0), "{band:?} at {sr}: {m:?}");
            }
        }
    }
}

#[test]
fn composed_identity_and_default_draws() {
    let clip = sine_clip(220.0, 16000, 0.6);
    let id = perturb_audio(&clip, &PerturbParams::identity(4)).unwrap();
    assert!(id.clip.rms_difference(&clip) < 1e-3);
    let out = perturb_audio(&clip, &PerturbParams::with_seed(4)).unwrap();
    assert_eq!(out.clip.samples.len(), clip.samples.len());
    assert_eq!(out.clip.sample_rate, clip.sample_rate);
    assert!(out.clip.samples.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
}
