//! `layerlens` command-line interface.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use layerlens::feature_store::{
    load_features, load_manifest, synth_dataset, FeatureSequence, SynthConfig, UtteranceRecord,
};
use layerlens::inference::{aggregate, predict_segments, Logic};
use layerlens::model::{load_checkpoint, save_checkpoint, FusionConfig, InputMode, ModelConfig};
use layerlens::optim::AdamWConfig;
use layerlens::perturb::{perturb_audio, read_wav, write_wav, PerturbParams};
use layerlens::rng;
use layerlens::splits::{self, Split, SplitMode, SplitSpec};
use layerlens::train::{
    cross_validate, cv_csv, layer_scan, read_trace, trace_export, trace_export_final, train, write_trace, Example,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "layerlens",
    version,
    about = "Layer-weighted speech-feature MCI classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write perturbed copies of WAV files.
    Perturb(PerturbArgs),
    /// Generate a synthetic feature dataset and manifest.
    Synth(SynthArgs),
    /// Split a manifest into train and validation sets.
    Split(SplitArgs),
    /// Train a fused-layer classifier.
    Train(TrainCmd),
    /// Train one classifier per layer and report per-layer accuracy.
    LayerScan(LayerScanCmd),
    /// Export the layer-weight trace of a trained model as CSV.
    TraceExport(TraceExportArgs),
    /// Speaker-grouped k-fold cross-validation.
    Cv(CvCmd),
    /// Recording-level predictions from a checkpoint.
    Predict(PredictArgs),
}

#[derive(Args)]
struct PerturbArgs {
    /// A WAV file or a directory of WAV files.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Perturbed copies per input file.
    #[arg(long, default_value_t = 1)]
    copies: usize,
    /// Pin ratios to 1 and gains to 0 dB (output equals input).
    #[arg(long)]
    pin_identity: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    patients: usize,
    #[arg(long, default_value_t = 3)]
    recordings: usize,
    #[arg(long, default_value_t = 24)]
    layers: usize,
    #[arg(long, default_value_t = 90)]
    frames: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    fps: f32,
    /// 1-based layer carrying the class signal.
    #[arg(long, default_value_t = 18)]
    informative_layer: usize,
    #[arg(long, default_value_t = 3.0)]
    effect: f32,
    #[arg(long, default_value_t = 0.0)]
    speaker_scale: f32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Speaker,
    General,
}

impl From<ModeArg> for SplitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Speaker => SplitMode::Speaker,
            ModeArg::General => SplitMode::General,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LogicArg {
    Or,
    Ensemble,
}

impl From<LogicArg> for Logic {
    fn from(l: LogicArg) -> Self {
        match l {
            LogicArg::Or => Logic::Or,
            LogicArg::Ensemble => Logic::Ensemble,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Uniform,
    Prior,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "speaker")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.2)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Options shared by every command that trains.
#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory that relative manifest paths are resolved against
    /// (defaults to the manifest's directory).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3e-5)]
    lr: f64,
    #[arg(long, default_value_t = 0.01)]
    weight_decay: f64,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 30.0)]
    window: f64,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    recurrent_layers: usize,
    #[arg(long, default_value_t = 64)]
    projection: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Validation share for the train/validation split.
    #[arg(long, default_value_t = 0.2)]
    val_ratio: f64,
    #[arg(long, value_enum, default_value = "speaker")]
    split_mode: ModeArg,
    /// Use a split written by `split` instead of computing one.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args)]
struct FusionArgs {
    #[arg(long, value_enum, default_value = "prior")]
    fusion: FusionArg,
    /// 1-based layer favored by the prior initialization.
    #[arg(long, default_value_t = 18)]
    major_layer: usize,
    #[arg(long, default_value_t = 5.0)]
    major_weight: f64,
}

impl FusionArgs {
    fn config(&self) -> FusionConfig {
        match self.fusion {
            FusionArg::Uniform => FusionConfig::uniform(),
            FusionArg::Prior => FusionConfig::prior(self.major_layer, self.major_weight),
        }
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Output directory for the checkpoint, trace and metrics log.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LayerScanCmd {
    #[command(flatten)]
    train: TrainArgs,
    /// Optional held-out manifest scored as the test set.
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceExportArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Export only the final epoch.
    #[arg(long)]
    final_only: bool,
}

#[derive(Args)]
struct CvCmd {
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    fusion: FusionArgs,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value = "or")]
    logic: LogicArg,
    /// Output directory: `cv.csv` plus each fold's final-epoch weights.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint file or a directory written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "or")]
    logic: LogicArg,
    #[arg(long, default_value_t = 30.0)]
    window: f64,
    #[arg(long)]
    out: PathBuf,
}

/// On-disk form of a split: record keys on each side.
#[derive(Serialize, Deserialize)]
struct SplitFile {
    mode: SplitMode,
    val_ratio: f64,
    seed: u64,
    train: Vec<String>,
    val: Vec<String>,
}

const CHECKPOINT_FILE: &str = "model.ckpt";
const LAST_CHECKPOINT_FILE: &str = "last.ckpt";
const TRACE_FILE: &str = "trace.json";
const METRICS_FILE: &str = "metrics.csv";

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Perturb(a) => run_perturb(a),
        Command::Synth(a) => run_synth(a),
        Command::Split(a) => run_split(a),
        Command::Train(a) => run_train(a),
        Command::LayerScan(a) => run_layer_scan(a),
        Command::TraceExport(a) => run_trace_export(a),
        Command::Cv(a) => run_cv(a),
        Command::Predict(a) => run_predict(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn wav_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)
            .with_context(|| format!("listing {}", input.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")));
        files.sort();
        if files.is_empty() {
            bail!("no .wav files in {}", input.display());
        }
        Ok(files)
    } else {
        Ok(vec![input.to_path_buf()])
    }
}

fn run_perturb(a: PerturbArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for path in wav_inputs(&a.input)? {
        let clip = read_wav(&path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("clip").to_string();
        for copy in 0..a.copies {
            let seed = rng::derive_seed(a.seed, &[rng::name_hash(&stem), copy as u64]);
            let params = if a.pin_identity {
                PerturbParams::identity(seed)
            } else {
                PerturbParams::with_seed(seed)
            };
            let out = perturb_audio(&clip, &params)?;
            let dest = a.out.join(format!("{stem}_perturb{copy}.wav"));
            write_wav(&out.clip, &dest)?;
            println!(
                "{} formant={:.4} pitch={:.4} clipped={}",
                dest.display(),
                out.drawn.formant_ratio,
                out.drawn.pitch_ratio,
                out.clipped
            );
        }
    }
    Ok(())
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        patients: a.patients,
        recordings_per_patient: a.recordings,
        layers: a.layers,
        frames: a.frames,
        dim: a.dim,
        fps: a.fps,
        informative_layer: a.informative_layer,
        effect_size: a.effect,
        speaker_scale: a.speaker_scale,
        seed: a.seed,
    };
    let manifest = synth_dataset(&cfg, &a.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn compute_split(records: &[UtteranceRecord], mode: SplitMode, ratio: f64, seed: u64) -> Result<Split> {
    let spec = SplitSpec {
        mode,
        val_ratio: ratio,
        seed,
    };
    Ok(splits::split(records, &spec)?)
}

fn run_split(a: SplitArgs) -> Result<()> {
    let records = load_manifest(&a.manifest)?;
    let mode = a.mode.into();
    let split = compute_split(&records, mode, a.ratio, a.seed)?;
    let file = SplitFile {
        mode,
        val_ratio: a.ratio,
        seed: a.seed,
        train: split.train.iter().map(|&i| records[i].key()).collect(),
        val: split.val.iter().map(|&i| records[i].key()).collect(),
    };
    write_text(&a.out, &serde_json::to_string_pretty(&file)?)?;
    println!(
        "train {} recordings, val {} recordings",
        file.train.len(),
        file.val.len()
    );
    Ok(())
}

fn load_split(path: &Path, records: &[UtteranceRecord]) -> Result<Split> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: SplitFile = serde_json::from_str(&text)?;
    let index = |key: &String| -> Result<usize> {
        records
            .iter()
            .position(|r| &r.key() == key)
            .with_context(|| format!("split key {key} not in manifest"))
    };
    Ok(Split {
        train: file.train.iter().map(index).collect::<Result<_>>()?,
        val: file.val.iter().map(index).collect::<Result<_>>()?,
    })
}

struct Dataset {
    records: Vec<UtteranceRecord>,
    keys: Vec<String>,
    features: Vec<FeatureSequence>,
}

impl Dataset {
    fn load(manifest: &Path, features: Option<&Path>) -> Result<Self> {
        let records = load_manifest(manifest)?;
        let dir = features
            .map(Path::to_path_buf)
            .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
        let features = load_features(&records, &dir)?;
        let keys = records.iter().map(UtteranceRecord::key).collect();
        Ok(Self {
            records,
            keys,
            features,
        })
    }

    fn examples(&self) -> Vec<Example<'_>> {
        self.records
            .iter()
            .zip(&self.keys)
            .zip(&self.features)
            .map(|((r, k), f)| Example {
                id: k,
                label: r.label,
                features: f,
            })
            .collect()
    }

    fn shape(&self) -> Result<(usize, usize)> {
        let first = self.features.first().context("manifest is empty")?;
        let shape = (first.layer_count(), first.feature_dim());
        if let Some(bad) = self
            .features
            .iter()
            .position(|f| (f.layer_count(), f.feature_dim()) != shape)
        {
            bail!(
                "recording {} has a different layer count or feature dimension",
                self.keys[bad]
            );
        }
        Ok(shape)
    }
}

impl TrainArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            optimizer: AdamWConfig {
                learning_rate: self.lr,
                weight_decay: self.weight_decay,
                ..AdamWConfig::default()
            },
            epochs: self.epochs,
            seed: self.seed,
            window_seconds: self.window,
            selection_logic: Logic::Or,
        }
    }

    fn model_config(&self, layers: usize, dim: usize) -> ModelConfig {
        ModelConfig {
            layers,
            input_dim: dim,
            hidden: self.hidden,
            recurrent_layers: self.recurrent_layers,
            projection: self.projection,
            dropout: self.dropout,
            input: InputMode::Fused,
        }
    }

    fn split(&self, data: &Dataset) -> Result<Split> {
        match &self.split {
            Some(path) => load_split(path, &data.records),
            None => compute_split(&data.records, self.split_mode.into(), self.val_ratio, self.seed),
        }
    }
}

fn run_train(a: TrainCmd) -> Result<()> {
    let data = Dataset::load(&a.train.manifest, a.train.features.as_deref())?;
    let (layers, dim) = data.shape()?;
    let examples = data.examples();
    let split = a.train.split(&data)?;
    let train_set = Split::select(&examples, &split.train)
        .into_iter()
        .copied()
        .collect::<Vec<_>>();
    let val_set = Split::select(&examples, &split.val)
        .into_iter()
        .copied()
        .collect::<Vec<_>>();

    let fusion = a.fusion.config();
    let model = a.train.model_config(layers, dim);
    let outcome = train(&a.train.train_config(), &model, &fusion, &train_set, &val_set)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_checkpoint(&outcome.best, &fusion, a.out.join(CHECKPOINT_FILE))?;
    save_checkpoint(&outcome.last, &fusion, a.out.join(LAST_CHECKPOINT_FILE))?;
    write_trace(&outcome.trace, a.out.join(TRACE_FILE))?;
    write_text(&a.out.join(METRICS_FILE), &outcome.metrics_csv())?;
    println!(
        "best epoch {} val acc {:.4}; final argmax layer {}",
        outcome.best_epoch,
        outcome.val_accuracy(outcome.best_epoch).unwrap_or(f64::NAN),
        outcome.trace.final_argmax().map_or("-".into(), |l| l.to_string())
    );
    Ok(())
}

fn run_layer_scan(a: LayerScanCmd) -> Result<()> {
    let data = Dataset::load(&a.train.manifest, a.train.features.as_deref())?;
    let (layers, dim) = data.shape()?;
    let examples = data.examples();
    let split = a.train.split(&data)?;
    let train_set = Split::select(&examples, &split.train)
        .into_iter()
        .copied()
        .collect::<Vec<_>>();
    let val_set = Split::select(&examples, &split.val)
        .into_iter()
        .copied()
        .collect::<Vec<_>>();
    let test = a
        .test_manifest
        .as_deref()
        .map(|m| Dataset::load(m, a.train.features.as_deref()))
        .transpose()?;
    let test_examples = test.as_ref().map(Dataset::examples);

    let model = a.train.model_config(layers, dim);
    let scan = layer_scan(
        &a.train.train_config(),
        &model,
        &train_set,
        &val_set,
        test_examples.as_deref(),
    )?;
    write_text(&a.out, &scan.to_csv())?;
    let (layer, acc) = scan.peak(Logic::Or);
    println!("validation peak (OR): layer {layer}, acc {acc:.4}");
    Ok(())
}

fn run_trace_export(a: TraceExportArgs) -> Result<()> {
    let path = if a.ckpt.is_dir() {
        a.ckpt.join(TRACE_FILE)
    } else {
        a.ckpt.clone()
    };
    let trace = read_trace(&path)?;
    if a.final_only {
        trace_export_final(&trace, &a.out)?;
    } else {
        trace_export(&trace, &a.out)?;
    }
    Ok(())
}

fn run_cv(a: CvCmd) -> Result<()> {
    let data = Dataset::load(&a.train.manifest, a.train.features.as_deref())?;
    let (layers, dim) = data.shape()?;
    let examples = data.examples();
    let model = a.train.model_config(layers, dim);
    let results = cross_validate(
        &a.train.train_config(),
        &model,
        &a.fusion.config(),
        &data.records,
        &examples,
        a.k,
        a.logic.into(),
    )?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_text(&a.out.join("cv.csv"), &cv_csv(&results))?;
    let mut summary = String::from("fold,argmax_layer\n");
    for r in &results {
        if !r.trace.is_empty() {
            trace_export_final(&r.trace, a.out.join(format!("fold{}_final_weights.csv", r.fold)))?;
            writeln!(summary, "{},{}", r.fold, r.trace.final_argmax().unwrap_or(0))?;
        }
    }
    write_text(&a.out.join("fold_argmax.csv"), &summary)?;
    print!("{}", cv_csv(&results));
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<()> {
    let ckpt = if a.ckpt.is_dir() {
        a.ckpt.join(CHECKPOINT_FILE)
    } else {
        a.ckpt.clone()
    };
    let (params, _) = load_checkpoint(&ckpt)?;
    let data = Dataset::load(&a.manifest, a.features.as_deref())?;
    let logic: Logic = a.logic.into();
    let mut out = String::from("recording_id,patient_id,p_nc_sum,p_mci_sum,label\n");
    for (rec, features) in data.records.iter().zip(&data.features) {
        let preds = predict_segments(&params, &rec.recording_id, features, a.window)?;
        let verdict = aggregate(&preds, logic)?;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            rec.recording_id, rec.patient_id, verdict.sums.0, verdict.sums.1, verdict.label
        )?;
    }
    write_text(&a.out, &out)?;
    Ok(())
}
