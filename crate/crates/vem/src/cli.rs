//! The `vem` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use vem_core::dataset::{generate_synthetic, split_dataset, Dataset, SplitSpec, SyntheticSpec, ValueWidth};
use vem_core::eval::{evaluate, ScoreOptions};
use vem_core::losses::GradCheckOptions;
use vem_core::model::{Checkpoint, EncodingModel};
use vem_core::trainer::{run_lambda_ablation, train_stage1, train_stage2, GradProbe, Stage, TrainConfig};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{load_config, parse_override, resolve, Setting};
use crate::error::{io_err, Error, Result};
use crate::ground_truth::write_ground_truth;
use crate::interchange::{load_dataset, write_dataset};
use crate::report::{write_report, ReportFormat};
use crate::trainlog::{LogObserver, StdClock};

/// Largest relative error `grad-check` accepts.
pub const GRAD_CHECK_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "vem", version, about = "Two-stage image-text aligned visual encoding models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset plus its ground-truth sidecar.
    GenSynth(GenSynthArgs),
    /// Run one training stage and save the best checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on one split and write a report.
    Eval(EvalArgs),
    /// Sweep the alignment weight over several seeds from one stage-1 checkpoint.
    Ablate(AblateArgs),
    /// Compare analytic gradients with central differences.
    GradCheck(GradCheckArgs),
    /// Check that a directory is a readable dataset.
    ValidateData(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Width {
    #[value(name = "32")]
    W32,
    #[value(name = "64")]
    W64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SyntheticSpec::default().n_samples)]
    n_samples: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().latent_dim)]
    latent_dim: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().d_img)]
    d_img: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().d_text)]
    d_text: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().n_vertices)]
    n_vertices: usize,
    #[arg(long, default_value_t = SyntheticSpec::default().noise_std_img)]
    noise_std_img: f64,
    #[arg(long, default_value_t = SyntheticSpec::default().noise_std_text)]
    noise_std_text: f64,
    #[arg(long, default_value_t = SyntheticSpec::default().noise_std_voxel)]
    noise_std_voxel: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Float width of the written blobs.
    #[arg(long, value_enum, default_value = "64")]
    value_width: Width,
}

/// Config sources shared by the training commands.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// `key = value` config file; without it the desk preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lambda=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training stage; defaults to the config's.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stage: Option<u8>,
    #[arg(long)]
    data: PathBuf,
    /// Stage-1 checkpoint to resume from (stage 2 only).
    #[arg(long)]
    from: Option<PathBuf>,
    /// Checkpoint directory to write.
    #[arg(long)]
    out: PathBuf,
    /// Epoch log path; defaults to `<out>.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Training seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "val")]
    split: SplitName,
    /// Report path ending in `.csv` or `.json`.
    #[arg(long)]
    out: PathBuf,
    /// Clip each normalized vertex score at 1.
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Stage-2 settings shared by every run.
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    data: PathBuf,
    /// Stage-1 checkpoint; trained with the desk stage-1 preset when absent.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// Seed of the stage-1 run when `--from` is absent.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output: `kind,lambda,seed,m`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    /// Config whose stage is checked; both desk stages when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset directory; the default synthetic benchmark when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Scale the analytic gradient of this tensor by 1.001 before comparing.
    #[arg(long, hide = true)]
    corrupt_gradient: Option<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    dir: PathBuf,
}

fn usage(message: impl Into<String>) -> Error {
    Error::Usage(message.into())
}

fn overrides(raw: &[String]) -> Result<Vec<Setting>> {
    raw.iter().map(|s| parse_override(s)).collect()
}

fn config_from(args: &ConfigArgs, forced: &[Setting]) -> Result<TrainConfig> {
    let mut extra = overrides(&args.set)?;
    extra.extend_from_slice(forced);
    match &args.config {
        Some(path) => load_config(path, &extra),
        None => resolve(&[], &extra),
    }
}

fn forced(key: &str, value: impl ToString) -> Setting {
    Setting {
        origin: format!("--{key}"),
        key: key.into(),
        value: value.to_string(),
    }
}

fn summary(ds: &Dataset) -> String {
    let m = &ds.manifest;
    format!(
        "{} samples, d_img {}, d_text {}, {} vertices, {}-bit values, rois [{}], subject {}",
        m.n_samples,
        m.d_img,
        m.d_text,
        m.n_vertices,
        m.value_width.bytes() * 8,
        m.roi_names.join(", "),
        m.subject_id
    )
}

fn check_compatible(model: &EncodingModel, ds: &Dataset) -> Result<()> {
    let (d_img, v) = (ds.manifest.d_img, ds.n_vertices());
    if model.extractor.input_dim != d_img || model.n_vertices() != v {
        return Err(vem_core::Error::Validation(format!(
            "checkpoint expects d_img {} and n_vertices {}, dataset has d_img {d_img} and n_vertices {v}",
            model.extractor.input_dim,
            model.n_vertices()
        ))
        .into());
    }
    if model.align.weight.rows() != ds.manifest.d_text {
        return Err(vem_core::Error::Validation(format!(
            "checkpoint expects d_text {}, dataset has d_text {}",
            model.align.weight.rows(),
            ds.manifest.d_text
        ))
        .into());
    }
    Ok(())
}

fn gen_synth(args: &GenSynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: args.n_samples,
        latent_dim: args.latent_dim,
        d_img: args.d_img,
        d_text: args.d_text,
        n_vertices: args.n_vertices,
        noise_std_img: args.noise_std_img,
        noise_std_text: args.noise_std_text,
        noise_std_voxel: args.noise_std_voxel,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let (mut ds, gt) = generate_synthetic(&spec)?;
    ds.manifest.value_width = match args.value_width {
        Width::W32 => ValueWidth::F32,
        Width::W64 => ValueWidth::F64,
    };
    ds.quantize_to_width();
    write_dataset(&ds, &args.out)?;
    write_ground_truth(&spec, &gt, &args.out)?;
    println!("wrote {}: {}", args.out.display(), summary(&ds));
    Ok(())
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| OsString::from("checkpoint"));
    name.push(".log");
    out.with_file_name(name)
}

fn train(args: &TrainArgs) -> Result<()> {
    let mut forced_settings = Vec::new();
    if let Some(stage) = args.stage {
        forced_settings.push(forced("stage", stage));
    }
    if let Some(seed) = args.seed {
        forced_settings.push(forced("seed", seed));
    }
    let cfg = config_from(&args.config, &forced_settings)?;
    match (cfg.stage, &args.from) {
        (Stage::Two, None) => return Err(usage("stage 2 needs --from <stage-1 checkpoint>")),
        (Stage::One, Some(_)) => return Err(usage("--from only applies to stage 2")),
        _ => {}
    }
    let ds = load_dataset(&args.data)?;
    let split = split_dataset(&ds, &SplitSpec::with_seed(args.split_seed))?;
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    let mut observer = LogObserver::create(&log_path, true)?;
    let (ckpt, record) = match &args.from {
        None => train_stage1(&cfg, &ds, &split, &mut observer)?,
        Some(from) => train_stage2(&cfg, &load_checkpoint(from)?, &ds, &split, &mut observer)?,
    };
    observer.finish()?;
    save_checkpoint(&ckpt, &args.out)?;
    println!(
        "stage {} best epoch {} of {}: validation m = {}",
        cfg.stage,
        record.best_epoch,
        record.epochs.len(),
        ckpt.best_val_m
    );
    println!("checkpoint {}", args.out.display());
    println!("log {}", log_path.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let format = ReportFormat::from_path(&args.out).ok_or_else(|| usage("--out must end in .csv or .json"))?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let ds = load_dataset(&args.data)?;
    check_compatible(&ckpt.model, &ds)?;
    let split = split_dataset(&ds, &SplitSpec::with_seed(args.split_seed))?;
    let rows = match args.split {
        SplitName::Train => &split.train,
        SplitName::Val => &split.val,
        SplitName::Test => &split.test,
    };
    let pred = ckpt.model.predict(&ds.image_features.select_rows(rows)?)?;
    let targets = ds.voxel_targets.select_rows(rows)?;
    let options = ScoreOptions {
        clip: args.clip,
        ..ScoreOptions::default()
    };
    let report = evaluate(&pred, &targets, &ds.noise_ceiling, &ds.roi_labels, &ds.manifest.roi_names, &options)?;
    write_report(&report, &ds.roi_labels, &ds.manifest.roi_names, &args.out, format)?;
    println!("m = {}", report.overall_m);
    println!("excluded vertices = {}", report.n_excluded_vertices);
    for (roi, median) in &report.per_roi_median {
        println!("roi {roi} median = {median}");
    }
    Ok(())
}

fn ablate(args: &AblateArgs) -> Result<()> {
    if args.seeds.is_empty() {
        return Err(usage("--seeds needs at least one seed"));
    }
    let cfg = config_from(&args.config, &[forced("stage", 2)])?;
    let ds = load_dataset(&args.data)?;
    let split = split_dataset(&ds, &SplitSpec::with_seed(args.split_seed))?;
    let mut clock = StdClock::new();
    let stage1: Checkpoint = match &args.from {
        Some(path) => load_checkpoint(path)?,
        None => {
            let s1 = TrainConfig {
                seed: args.seed,
                pca_k: cfg.pca_k,
                extractor_widths: cfg.extractor_widths.clone(),
                extractor_taps: cfg.extractor_taps.clone(),
                extractor_activation: cfg.extractor_activation,
                ..TrainConfig::desk_stage1()
            };
            let (ckpt, _) = train_stage1(&s1, &ds, &split, &mut clock)?;
            println!("stage 1 validation m = {}", ckpt.best_val_m);
            ckpt
        }
    };
    let report = run_lambda_ablation(&cfg, &stage1, &ds, &split, &args.lambdas, &args.seeds, &mut clock)?;
    std::fs::write(&args.out, report.to_csv()).map_err(io_err(&args.out))?;
    for (lambda, median) in &report.medians {
        println!("lambda {lambda}: median m = {median}");
    }
    Ok(())
}

fn grad_check(args: &GradCheckArgs) -> Result<bool> {
    if args.batch < 1 {
        return Err(usage("--batch must be >= 1"));
    }
    let extra = overrides(&args.set)?;
    let configs = match &args.config {
        Some(path) => vec![load_config(path, &extra)?],
        None => vec![
            resolve(&[], &[extra.clone(), vec![forced("stage", 1)]].concat())?,
            resolve(&[], &[extra, vec![forced("stage", 2)]].concat())?,
        ],
    };
    let ds = match &args.data {
        Some(dir) => load_dataset(dir)?,
        None => generate_synthetic(&SyntheticSpec::default())?.0,
    };
    let split = split_dataset(&ds, &SplitSpec::with_seed(args.split_seed))?;
    let mut failed = Vec::new();
    let mut corrupted = false;
    for cfg in &configs {
        let probe = GradProbe::new(cfg, &ds, &split, args.batch, args.seed)?;
        let mut grads = probe.analytic()?;
        if let Some(name) = &args.corrupt_gradient {
            if let Some(g) = grads.get_mut(name) {
                *g = g.scale(1.001);
                corrupted = true;
            }
        }
        let report = probe.check(&grads, &GradCheckOptions::default())?;
        for t in &report.tensors {
            println!(
                "stage {} {}: max relative error {:e} over {} coordinates",
                cfg.stage, t.name, t.max_relative_error, t.coordinates_checked
            );
        }
        failed.extend(report.failures(GRAD_CHECK_THRESHOLD).iter().map(|t| format!("stage {} {}", cfg.stage, t.name)));
    }
    if let Some(name) = &args.corrupt_gradient {
        if !corrupted {
            return Err(usage(format!("no trainable tensor named {name}")));
        }
    }
    if failed.is_empty() {
        println!("all tensors below {GRAD_CHECK_THRESHOLD:e}");
        Ok(true)
    } else {
        eprintln!("gradient check failed (>= {GRAD_CHECK_THRESHOLD:e}): {}", failed.join(", "));
        Ok(false)
    }
}

fn validate_data(args: &ValidateArgs) -> Result<()> {
    let ds = load_dataset(&args.dir)?;
    println!("ok {}: {}", args.dir.display(), summary(&ds));
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Config { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::GenSynth(a) => gen_synth(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Ablate(a) => ablate(a).map(|_| true),
        Command::GradCheck(a) => grad_check(a),
        Command::ValidateData(a) => validate_data(a).map(|_| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
