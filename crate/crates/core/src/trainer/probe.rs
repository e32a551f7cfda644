use alloc::format;

use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::losses::{compare_model_gradients, GradCheckOptions, GradCheckReport, Gradients};
use crate::model::{loss_and_gradients, Batch, EncodingModel, FreezeMask, Mode, Objective};
use crate::rng::{seeded, stream};
use crate::trainer::{Stage, TrainConfig};

/// A model, one batch and the trainable set of a stage, ready for a
/// finite-difference gradient check.
///
/// The model is initialized as stage 1 would initialize it, except that the
/// head projection gets `N(0, 1/d_feat)` entries so that the extractor sits on
/// a path with non-zero gradient.
#[derive(Debug, Clone)]
pub struct GradProbe {
    pub model: EncodingModel,
    pub mask: FreezeMask,
    pub objective: Objective,
    inputs: Matrix,
    text: Matrix,
    targets: Matrix,
}

impl GradProbe {
    /// Uses the first `batch_size` rows of the training split as the batch.
    pub fn new(cfg: &TrainConfig, ds: &Dataset, split: &Split, batch_size: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        ds.validate()?;
        if batch_size == 0 || batch_size > split.train.len() {
            return Err(Error::Precondition(format!(
                "gradient check batch of {batch_size} needs 1..={} training rows",
                split.train.len()
            )));
        }
        let train_targets = ds.voxel_targets.select_rows(&split.train)?;
        let spec = cfg.model_spec(ds.manifest.d_img, ds.manifest.d_text);
        let mut model = EncodingModel::initialize(&spec, &train_targets, cfg.seed)?;
        let std = libm::sqrt(1.0 / model.feature_dim() as f64);
        let normal = Normal::new(0.0, std).map_err(|e| Error::Precondition(format!("{e}")))?;
        let mut rng = seeded(seed, stream::GRAD_CHECK);
        for v in model.head.projection_weight.as_mut_slice() {
            *v = normal.sample(&mut rng);
        }
        let mask = match cfg.stage {
            Stage::One => FreezeMask::stage1(&model),
            Stage::Two => FreezeMask::stage2(&model, cfg.unfreeze_last_n_blocks),
        };
        let rows = &split.train[..batch_size];
        Ok(Self {
            model,
            mask,
            objective: cfg.objective(),
            inputs: ds.image_features.select_rows(rows)?,
            text: ds.text_embeddings.select_rows(rows)?,
            targets: ds.voxel_targets.select_rows(rows)?,
        })
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch {
            inputs: &self.inputs,
            text: &self.text,
            targets: &self.targets,
        }
    }

    /// Backpropagated gradients (eval mode).
    pub fn analytic(&self) -> Result<Gradients> {
        Ok(loss_and_gradients(&self.model, self.batch(), &self.objective, Mode::Eval, None)?.1)
    }

    /// Compares `analytic` against central differences for every trainable
    /// tensor.
    pub fn check(&self, analytic: &Gradients, options: &GradCheckOptions) -> Result<GradCheckReport> {
        compare_model_gradients(&self.model, self.batch(), &self.objective, &self.mask, analytic, options)
    }
}
