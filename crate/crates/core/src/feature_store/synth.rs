//! Synthetic layered-feature datasets with a known informative layer.
//!
//! Every value is standard normal noise. In the informative layer, MCI
//! recordings are shifted by `+effect_size / 2` and NC recordings by
//! `-effect_size / 2` in every dimension, so class means differ by exactly
//! `effect_size` there and nowhere else. An optional per-patient offset
//! (`speaker_scale`) shared by all layers and recordings of a patient mimics
//! speaker identity leaking into the features.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{write_lfsf, write_manifest, FeatureSequence, Label, Language, UtteranceRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub patients: usize,
    pub recordings_per_patient: usize,
    pub layers: usize,
    pub frames: usize,
    pub dim: usize,
    pub fps: f32,
    /// 1-based index of the layer carrying class signal.
    pub informative_layer: usize,
    pub effect_size: f32,
    pub speaker_scale: f32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            patients: 40,
            recordings_per_patient: 3,
            layers: 24,
            frames: 90,
            dim: 8,
            fps: 2.0,
            informative_layer: 18,
            effect_size: 3.0,
            speaker_scale: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.informative_layer == 0 || self.informative_layer > self.layers {
            return Err(Error::InvalidArgument(format!(
                "informative layer {} outside 1..={}",
                self.informative_layer, self.layers
            )));
        }
        if !(self.effect_size.is_finite() && self.effect_size >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "effect_size must be finite and non-negative, got {}",
                self.effect_size
            )));
        }
        if self.patients == 0 || self.recordings_per_patient == 0 {
            return Err(Error::InvalidArgument("need at least one patient and recording".into()));
        }
        if self.layers == 0 || self.frames == 0 || self.dim == 0 || !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidArgument("L, T, D and fps must be positive".into()));
        }
        Ok(())
    }

    /// Patients alternate NC, MCI, NC, ... so the set is balanced.
    pub fn patient_label(&self, patient: usize) -> Label {
        if patient.is_multiple_of(2) {
            Label::Nc
        } else {
            Label::Mci
        }
    }

    pub fn patient_id(&self, patient: usize) -> String {
        format!("p{:03}", patient + 1)
    }

    pub fn recording_id(&self, recording: usize) -> String {
        format!("r{:02}", recording + 1)
    }

    pub fn record(&self, patient: usize, recording: usize) -> UtteranceRecord {
        let patient_id = self.patient_id(patient);
        let recording_id = self.recording_id(recording);
        UtteranceRecord {
            path: PathBuf::from(format!("{patient_id}_{recording_id}.lfsf")),
            language: if patient % 4 < 2 { Language::En } else { Language::Zh },
            label: self.patient_label(patient),
            patient_id,
            recording_id,
        }
    }
}

/// Generates the feature tensor of one recording.
pub fn synth_sequence(config: &SynthConfig, patient: usize, recording: usize) -> Result<FeatureSequence> {
    config.validate()?;
    let mut speaker_rng = rng::stream(config.seed, &[0x5eed, patient as u64]);
    let speaker: Vec<f32> = (0..config.dim)
        .map(|_| config.speaker_scale * speaker_rng.sample::<f32, _>(StandardNormal))
        .collect();

    let sign = match config.patient_label(patient) {
        Label::Mci => 1.0,
        Label::Nc => -1.0,
    };
    let shift = sign * config.effect_size / 2.0;
    let informative = config.informative_layer - 1;

    let mut rng = rng::stream(config.seed, &[patient as u64, recording as u64]);
    let mut data = Vec::with_capacity(config.layers * config.frames * config.dim);
    for layer in 0..config.layers {
        let offset = if layer == informative { shift } else { 0.0 };
        for _ in 0..config.frames {
            for s in &speaker {
                let noise: f32 = rng.sample(StandardNormal);
                data.push(noise + offset + s);
            }
        }
    }
    FeatureSequence::new(config.layers, config.frames, config.dim, config.fps, data)
}

/// In-memory synthetic dataset: records in manifest order with their features.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub records: Vec<UtteranceRecord>,
    pub features: Vec<FeatureSequence>,
}

impl SynthDataset {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut records = Vec::new();
        let mut features = Vec::new();
        for p in 0..config.patients {
            for r in 0..config.recordings_per_patient {
                records.push(config.record(p, r));
                features.push(synth_sequence(config, p, r)?);
            }
        }
        Ok(Self { records, features })
    }
}

/// Writes one LFSF file per recording plus `manifest.jsonl` into `out_dir`,
/// returning the manifest path. Paths in the manifest are relative to `out_dir`.
pub fn synth_dataset(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let data = SynthDataset::generate(config)?;
    for (record, seq) in data.records.iter().zip(&data.features) {
        write_lfsf(seq, out_dir.join(&record.path))?;
    }
    let manifest = out_dir.join("manifest.jsonl");
    write_manifest(&data.records, &manifest)?;
    Ok(manifest)
}
