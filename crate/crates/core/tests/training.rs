use layerlens::feature_store::{SynthConfig, SynthDataset};
use layerlens::model::{FusionConfig, InputMode, ModelConfig};
use layerlens::optim::AdamWConfig;
use layerlens::splits::{speaker_split, SplitSpec};
use layerlens::train::{layer_scan, train, Example, Phase, TrainConfig};

fn examples(data: &SynthDataset) -> Vec<Example<'_>> {
    data.records
        .iter()
        .zip(&data.features)
        .map(|(r, f)| Example {
            id: &r.recording_id,
            label: r.label,
            features: f,
        })
        .collect()
}

fn small_model(layers: usize, dim: usize) -> ModelConfig {
    ModelConfig {
        layers,
        input_dim: dim,
        hidden: 8,
        recurrent_layers: 1,
        projection: 8,
        dropout: 0.1,
        input: InputMode::Fused,
    }
}

fn config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        optimizer: AdamWConfig {
            learning_rate: 1e-2,
            ..AdamWConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn strong_signal_is_fit_within_fifteen_epochs() {
    let data = SynthDataset::generate(&SynthConfig {
        patients: 8,
        layers: 6,
        informative_layer: 2,
        effect_size: 5.0,
        frames: 40,
        dim: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let ex = examples(&data);
    let split = speaker_split(&data.records, &SplitSpec::speaker(0)).unwrap();
    let tr: Vec<_> = split.train.iter().map(|&i| ex[i]).collect();
    let va: Vec<_> = split.val.iter().map(|&i| ex[i]).collect();
    let out = train(&config(0, 15), &small_model(6, 4), &FusionConfig::uniform(), &tr, &va).unwrap();
    let best_train = out
        .metrics
        .iter()
        .filter(|m| m.split == Phase::Train)
        .map(|m| m.report.acc)
        .fold(0.0, f64::max);
    assert_eq!(best_train, 1.0);
}

#[test]
fn same_seed_same_everything_and_seed_matters() {
    let data = SynthDataset::generate(&SynthConfig {
        patients: 6,
        layers: 4,
        informative_layer: 3,
        frames: 20,
        dim: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let ex = examples(&data);
    let (tr, va) = ex.split_at(12);
    let m = small_model(4, 3);
    let a = train(&config(5, 3), &m, &FusionConfig::prior(3, 1.0), tr, va).unwrap();
    let b = train(&config(5, 3), &m, &FusionConfig::prior(3, 1.0), tr, va).unwrap();
    let c = train(&config(6, 3), &m, &FusionConfig::prior(3, 1.0), tr, va).unwrap();
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.best.tensors(), b.best.tensors());
    assert_ne!(a.trace, c.trace);
}

#[test]
fn single_layer_input_gives_single_row_scan() {
    let data = SynthDataset::generate(&SynthConfig {
        patients: 4,
        layers: 1,
        informative_layer: 1,
        frames: 10,
        dim: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let ex = examples(&data);
    let (tr, va) = ex.split_at(6);
    let scan = layer_scan(&config(1, 1), &small_model(1, 2), tr, va, Some(va)).unwrap();
    assert_eq!(scan.rows.len(), 1);
    assert_eq!(scan.rows[0].layer, 1);
    assert!(scan.rows[0].test_or.is_some());
    assert_eq!(scan.to_csv().lines().count(), 1 + 4);
}
