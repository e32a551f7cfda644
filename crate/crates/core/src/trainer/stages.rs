use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, ScoreOptions};
use crate::model::{loss_and_gradients, apply_freeze, Batch, Checkpoint, EncodingModel, FreezeMask, Mode};
use crate::rng::{seeded, stream, ChaCha8Rng, RngState};
use crate::trainer::{AdamW, Stage, TrainConfig};

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses.
    pub train_loss: f64,
    pub val_m: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainRecord {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch with the highest validation score.
    pub best_epoch: usize,
}

impl TrainRecord {
    pub fn best(&self) -> &EpochLog {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Receives progress and supplies wall-clock time. The core has no clock of
/// its own, so the default reports 0 seconds.
pub trait TrainObserver {
    fn now_seconds(&self) -> f64 {
        0.0
    }

    fn on_epoch(&mut self, _stage: Stage, _log: &EpochLog) {}
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

/// Validation score `m` of `model` on the rows `indices`.
pub fn validation_score(model: &EncodingModel, ds: &Dataset, indices: &[usize]) -> Result<f64> {
    let inputs = ds.image_features.select_rows(indices)?;
    let targets = ds.voxel_targets.select_rows(indices)?;
    let pred = model.predict(&inputs)?;
    let report = evaluate(
        &pred,
        &targets,
        &ds.noise_ceiling,
        &ds.roi_labels,
        &ds.manifest.roi_names,
        &ScoreOptions::default(),
    )?;
    Ok(report.overall_m)
}

fn check_split(ds: &Dataset, split: &Split) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::Precondition("training split is empty".into()));
    }
    if split.val.len() < 2 {
        return Err(Error::Precondition(format!(
            "validation split needs at least 2 samples, has {}",
            split.val.len()
        )));
    }
    let n = ds.n_samples();
    if let Some(&i) = split.train.iter().chain(&split.val).find(|&&i| i >= n) {
        return Err(Error::Validation(format!("split index {i} out of range for {n} samples")));
    }
    Ok(())
}

/// Stage 1: fit the head projection under MSE with everything else frozen.
///
/// The PCA output stage is fitted to the training-split voxel targets. The
/// returned checkpoint holds the epoch with the highest validation `m`.
pub fn train_stage1(
    cfg: &TrainConfig,
    ds: &Dataset,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<(Checkpoint, TrainRecord)> {
    if cfg.stage != Stage::One {
        return Err(Error::Validation(format!("train_stage1 given a stage {} config", cfg.stage)));
    }
    cfg.validate()?;
    ds.validate()?;
    check_split(ds, split)?;
    let train_targets = ds.voxel_targets.select_rows(&split.train)?;
    let spec = cfg.model_spec(ds.manifest.d_img, ds.manifest.d_text);
    let model = EncodingModel::initialize(&spec, &train_targets, cfg.seed)?;
    let mask = FreezeMask::stage1(&model);
    run(cfg, model, &mask, ds, split, observer)
}

/// Stage 2: resume from a stage-1 checkpoint, train the last
/// `unfreeze_last_n_blocks` extractor blocks and the alignment matrix under
/// `L_mse + lambda * L_alignment`. The voxel head stays frozen.
pub fn train_stage2(
    cfg: &TrainConfig,
    stage1: &Checkpoint,
    ds: &Dataset,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<(Checkpoint, TrainRecord)> {
    if cfg.stage != Stage::Two {
        return Err(Error::Validation(format!("train_stage2 given a stage {} config", cfg.stage)));
    }
    if stage1.stage != Stage::One {
        return Err(Error::Validation(format!(
            "stage 2 must start from a stage 1 checkpoint, got stage {}",
            stage1.stage
        )));
    }
    cfg.validate()?;
    ds.validate()?;
    check_split(ds, split)?;
    let mut model = stage1.model.clone();
    model.validate()?;
    if model.extractor.input_dim != ds.manifest.d_img || model.n_vertices() != ds.n_vertices() {
        return Err(Error::Validation(format!(
            "checkpoint expects {} inputs / {} vertices, dataset has {} / {}",
            model.extractor.input_dim,
            model.n_vertices(),
            ds.manifest.d_img,
            ds.n_vertices()
        )));
    }
    model.head.dropout_rate = cfg.dropout_rate;
    let mask = FreezeMask::stage2(&model, cfg.unfreeze_last_n_blocks);
    run(cfg, model, &mask, ds, split, observer)
}

fn run(
    cfg: &TrainConfig,
    mut model: EncodingModel,
    mask: &FreezeMask,
    ds: &Dataset,
    split: &Split,
    observer: &mut dyn TrainObserver,
) -> Result<(Checkpoint, TrainRecord)> {
    mask.check_covers(&model)?;
    let objective = cfg.objective();
    let mut optimizer = AdamW::new(&model, cfg.learning_rate, cfg.weight_decay);
    let mut rng: ChaCha8Rng = seeded(cfg.seed, stream::TRAINING);
    let mut order = split.train.clone();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, EncodingModel)> = None;

    for epoch in 1..=cfg.epochs {
        let started = observer.now_seconds();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs = ds.image_features.select_rows(chunk)?;
            let text = ds.text_embeddings.select_rows(chunk)?;
            let targets = ds.voxel_targets.select_rows(chunk)?;
            let batch = Batch {
                inputs: &inputs,
                text: &text,
                targets: &targets,
            };
            let (loss, grads) = loss_and_gradients(&model, batch, &objective, Mode::Train(&mut rng), Some(mask))
                .map_err(|e| match e {
                    Error::Diverged(msg) => Error::Diverged(format!("epoch {epoch}: {msg}")),
                    other => other,
                })?;
            let grads = apply_freeze(mask, grads)?;
            optimizer.step(&mut model, &grads, mask)?;
            loss_sum += loss.total * chunk.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_m = validation_score(&model, ds, &split.val)?;
        if !val_m.is_finite() {
            return Err(Error::Diverged(format!("epoch {epoch}: non-finite validation score")));
        }
        let log = EpochLog {
            epoch,
            train_loss,
            val_m,
            seconds: observer.now_seconds() - started,
        };
        observer.on_epoch(cfg.stage, &log);
        logs.push(log);
        if best.as_ref().is_none_or(|(_, m, _)| val_m > *m) {
            best = Some((epoch, val_m, model.clone()));
        }
    }

    let (best_epoch, best_val_m, best_model) = best.expect("epochs >= 1");
    let checkpoint = Checkpoint {
        stage: cfg.stage,
        epoch: best_epoch,
        model: best_model,
        config: cfg.clone(),
        best_val_m,
        rng_state: RngState::capture(&rng),
    };
    Ok((checkpoint, TrainRecord { epochs: logs, best_epoch }))
}
