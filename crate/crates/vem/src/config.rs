//! `key = value` training configs.
//!
//! One setting per line; `#` starts a comment. Keys are the [`TrainConfig`]
//! field names plus `preset` (`desk` or `paper`), which together with `stage`
//! picks the base values that the remaining keys override. Lists are comma
//! separated. Unknown or repeated keys are rejected.

use std::fs;
use std::path::Path;

use vem_core::trainer::{Stage, TrainConfig};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn config(self, stage: Stage) -> TrainConfig {
        match (self, stage) {
            (Preset::Desk, Stage::One) => TrainConfig::desk_stage1(),
            (Preset::Desk, Stage::Two) => TrainConfig::desk_stage2(),
            (Preset::Paper, Stage::One) => TrainConfig::paper_stage1(),
            (Preset::Paper, Stage::Two) => TrainConfig::paper_stage2(),
        }
    }
}

/// A setting together with where it came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub origin: String,
    pub key: String,
    pub value: String,
}

fn config_err(origin: &str, message: impl Into<String>) -> Error {
    Error::Config {
        origin: origin.to_string(),
        message: message.into(),
    }
}

pub fn parse_settings(text: &str) -> Result<Vec<Setting>> {
    let mut out: Vec<Setting> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = format!("line {}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(&origin, format!("expected key = value, got {line:?}")))?;
        let key = key.trim();
        if out.iter().any(|s| s.key == key) {
            return Err(config_err(&origin, format!("{key} set twice")));
        }
        out.push(Setting {
            origin,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

/// Parses a `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<Setting> {
    let origin = format!("--set {arg}");
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| config_err(&origin, "expected key=value"))?;
    Ok(Setting {
        origin,
        key: key.trim().to_string(),
        value: value.trim().to_string(),
    })
}

fn parse_value<T: std::str::FromStr>(s: &Setting) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.value
        .parse()
        .map_err(|e| config_err(&s.origin, format!("bad value {:?} for {}: {e}", s.value, s.key)))
}

fn parse_list(s: &Setting) -> Result<Vec<usize>> {
    s.value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|e| config_err(&s.origin, format!("bad list entry {part:?} for {}: {e}", s.key)))
        })
        .collect()
}

fn parse_stage(s: &Setting) -> Result<Stage> {
    let n: u8 = parse_value(s)?;
    Stage::try_from(n).map_err(|e| config_err(&s.origin, e.to_string()))
}

fn parse_preset(s: &Setting) -> Result<Preset> {
    match s.value.as_str() {
        "desk" => Ok(Preset::Desk),
        "paper" => Ok(Preset::Paper),
        other => Err(config_err(&s.origin, format!("unknown preset {other:?} (desk or paper)"))),
    }
}

fn apply(cfg: &mut TrainConfig, s: &Setting) -> Result<()> {
    match s.key.as_str() {
        "stage" => cfg.stage = parse_stage(s)?,
        "preset" => {
            parse_preset(s)?;
        }
        "epochs" => cfg.epochs = parse_value(s)?,
        "batch_size" => cfg.batch_size = parse_value(s)?,
        "learning_rate" => cfg.learning_rate = parse_value(s)?,
        "weight_decay" => cfg.weight_decay = parse_value(s)?,
        "dropout_rate" => cfg.dropout_rate = parse_value(s)?,
        "lambda" => cfg.lambda = parse_value(s)?,
        "tau" => cfg.tau = parse_value(s)?,
        "seed" => cfg.seed = parse_value(s)?,
        "unfreeze_last_n_blocks" => cfg.unfreeze_last_n_blocks = parse_value(s)?,
        "pca_k" => cfg.pca_k = parse_value(s)?,
        "paper_defaults" => cfg.paper_defaults = parse_value(s)?,
        "symmetric_alignment" => cfg.symmetric_alignment = parse_value(s)?,
        "extractor_widths" => cfg.extractor_widths = parse_list(s)?,
        "extractor_taps" => cfg.extractor_taps = parse_list(s)?,
        "extractor_activation" => {
            cfg.extractor_activation = s.value.parse().map_err(|e: vem_core::Error| config_err(&s.origin, e.to_string()))?
        }
        other => return Err(config_err(&s.origin, format!("unknown key {other:?}"))),
    }
    Ok(())
}

/// Builds a config from file settings followed by overrides; later settings
/// win. `stage` and `preset` are resolved first to choose the base.
pub fn resolve(file: &[Setting], overrides: &[Setting]) -> Result<TrainConfig> {
    let all: Vec<&Setting> = file.iter().chain(overrides).collect();
    let mut stage = Stage::One;
    let mut preset = Preset::Desk;
    for s in &all {
        match s.key.as_str() {
            "stage" => stage = parse_stage(s)?,
            "preset" => preset = parse_preset(s)?,
            _ => {}
        }
    }
    let mut cfg = preset.config(stage);
    for s in &all {
        apply(&mut cfg, s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str, overrides: &[Setting]) -> Result<TrainConfig> {
    resolve(&parse_settings(text)?, overrides)
}

pub fn load_config(path: &Path, overrides: &[Setting]) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, overrides)
}

/// The config as `key = value` lines that [`parse_config`] reads back to an
/// equal value.
pub fn render_config(cfg: &TrainConfig) -> String {
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let preset = if cfg.paper_defaults { "paper" } else { "desk" };
    format!(
        "preset = {preset}\nstage = {}\nepochs = {}\nbatch_size = {}\nlearning_rate = {:?}\nweight_decay = {:?}\n\
         dropout_rate = {:?}\nlambda = {:?}\ntau = {:?}\nseed = {}\nunfreeze_last_n_blocks = {}\npca_k = {}\n\
         paper_defaults = {}\nsymmetric_alignment = {}\nextractor_widths = {}\nextractor_taps = {}\n\
         extractor_activation = {}\n",
        cfg.stage,
        cfg.epochs,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.weight_decay,
        cfg.dropout_rate,
        cfg.lambda,
        cfg.tau,
        cfg.seed,
        cfg.unfreeze_last_n_blocks,
        cfg.pca_k,
        cfg.paper_defaults,
        cfg.symmetric_alignment,
        list(&cfg.extractor_widths),
        list(&cfg.extractor_taps),
        cfg.extractor_activation.name(),
    )
}
