mod common;

use common::{finite_difference_check, smooth_features};
use layerlens::feature_store::Label;
use layerlens::model::{FusionConfig, InputMode, ModelConfig, ModelParams};

fn small(recurrent_layers: usize) -> ModelConfig {
    ModelConfig {
        layers: 4,
        input_dim: 8,
        hidden: 16,
        recurrent_layers,
        projection: 8,
        dropout: 0.1,
        input: InputMode::Fused,
    }
}

fn assert_clean(report: common::GradCheckReport) {
    assert!(
        report.failures.is_empty(),
        "{} of {} coordinates failed, e.g. {:?}",
        report.failures.len(),
        report.checked,
        &report.failures[..report.failures.len().min(5)]
    );
}

#[test]
fn two_layer_model_eval_mode() {
    let params = ModelParams::<f64>::init(small(2), &FusionConfig::prior(2, 1.0), 5).unwrap();
    let seq = smooth_features(4, 12, 8, 0.3);
    assert_clean(finite_difference_check(
        &params,
        &seq,
        Label::Mci,
        false,
        0,
        1e-4,
        1e-4,
        1e-7,
    ));
}

#[test]
fn two_layer_model_with_dropout_masks() {
    let params = ModelParams::<f64>::init(small(2), &FusionConfig::uniform(), 9).unwrap();
    let seq = smooth_features(4, 12, 8, 1.1);
    assert_clean(finite_difference_check(
        &params,
        &seq,
        Label::Nc,
        true,
        42,
        1e-4,
        1e-4,
        1e-7,
    ));
}

#[test]
fn single_layer_input_mode() {
    let cfg = ModelConfig {
        input: InputMode::Layer { index: 3 },
        ..small(1)
    };
    let params = ModelParams::<f64>::init(cfg, &FusionConfig::uniform(), 2).unwrap();
    let seq = smooth_features(4, 5, 8, 2.0);
    assert_clean(finite_difference_check(
        &params,
        &seq,
        Label::Mci,
        false,
        0,
        1e-4,
        1e-4,
        1e-7,
    ));
}

#[test]
fn fusion_gradient_is_nonzero_for_informative_input() {
    let params = ModelParams::<f64>::init(small(1), &FusionConfig::uniform(), 3).unwrap();
    let seq = smooth_features(4, 6, 8, 0.0);
    let cache = params
        .forward(&seq.view(), false, &mut layerlens::rng::stream(0, &[]))
        .unwrap();
    let (_, g) = params.backward(&cache, Label::Mci).unwrap();
    let p = g.fusion.unwrap();
    let grad = p.logits();
    assert!(grad.iter().any(|v| v.abs() > 1e-9));
    // softmax gradient is orthogonal to the all-ones direction
    assert!(grad.iter().sum::<f64>().abs() < 1e-12);
}
