use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::AlignConfig;
use crate::model::{Activation, ExtractorSpec, ModelSpec, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u8", into = "u8"))]
pub enum Stage {
    One,
    Two,
}

impl TryFrom<u8> for Stage {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Stage::One),
            2 => Ok(Stage::Two),
            other => Err(Error::Validation(format!("stage must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        match s {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

impl core::fmt::Display for Stage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Hyperparameters of one training stage plus the surrogate extractor layout.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub stage: Stage,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    pub lambda: f64,
    pub tau: f64,
    pub seed: u64,
    pub unfreeze_last_n_blocks: usize,
    pub pca_k: usize,
    /// Set by the presets that carry the published large-scale values.
    pub paper_defaults: bool,
    pub symmetric_alignment: bool,
    pub extractor_widths: Vec<usize>,
    pub extractor_taps: Vec<usize>,
    pub extractor_activation: Activation,
}

impl TrainConfig {
    /// Small-data stage-1 preset.
    pub fn desk_stage1() -> Self {
        Self {
            stage: Stage::One,
            epochs: 40,
            batch_size: 64,
            learning_rate: 3e-3,
            weight_decay: 0.01,
            dropout_rate: 0.1,
            lambda: 0.0,
            tau: 0.1,
            seed: 0,
            unfreeze_last_n_blocks: 2,
            pca_k: 8,
            paper_defaults: false,
            symmetric_alignment: false,
            extractor_widths: vec![64, 64, 64],
            extractor_taps: vec![0, 1, 2],
            extractor_activation: Activation::Gelu,
        }
    }

    /// Small-data stage-2 preset.
    pub fn desk_stage2() -> Self {
        Self {
            stage: Stage::Two,
            epochs: 6,
            learning_rate: 1e-3,
            lambda: 1e-3,
            ..Self::desk_stage1()
        }
    }

    /// Stage-1 values of the original large-scale setup.
    pub fn paper_stage1() -> Self {
        Self {
            epochs: 40,
            batch_size: 512,
            learning_rate: 6.0e-4,
            weight_decay: 0.8,
            dropout_rate: 0.9,
            paper_defaults: true,
            ..Self::desk_stage1()
        }
    }

    /// Stage-2 values of the original large-scale setup.
    pub fn paper_stage2() -> Self {
        Self {
            epochs: 6,
            batch_size: 184,
            learning_rate: 1.0e-5,
            weight_decay: 0.8,
            dropout_rate: 0.9,
            paper_defaults: true,
            ..Self::desk_stage2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Precondition(msg));
        if self.epochs < 1 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0) {
            return fail(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if self.pca_k < 1 {
            return fail("pca_k must be >= 1".into());
        }
        if self.extractor_widths.is_empty() || self.extractor_widths.contains(&0) {
            return fail("extractor_widths must be non-empty and positive".into());
        }
        self.align_config().validate()
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig {
            tau: self.tau,
            lambda: self.lambda,
            symmetric: self.symmetric_alignment,
        }
    }

    /// Objective of this stage; stage 1 always trains on MSE alone.
    pub fn objective(&self) -> Objective {
        let mut align = self.align_config();
        if self.stage == Stage::One {
            align.lambda = 0.0;
        }
        Objective { align }
    }

    pub fn model_spec(&self, input_dim: usize, d_text: usize) -> ModelSpec {
        ModelSpec {
            extractor: ExtractorSpec {
                input_dim,
                widths: self.extractor_widths.clone(),
                activation: self.extractor_activation,
                taps: self.extractor_taps.clone(),
            },
            pca_k: self.pca_k,
            dropout_rate: self.dropout_rate,
            d_text,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for cfg in [
            TrainConfig::desk_stage1(),
            TrainConfig::desk_stage2(),
            TrainConfig::paper_stage1(),
            TrainConfig::paper_stage2(),
        ] {
            cfg.validate().unwrap();
        }
        let p2 = TrainConfig::paper_stage2();
        assert_eq!((p2.epochs, p2.batch_size, p2.learning_rate), (6, 184, 1.0e-5));
        let p1 = TrainConfig::paper_stage1();
        assert_eq!((p1.epochs, p1.batch_size, p1.learning_rate), (40, 512, 6.0e-4));
        assert_eq!((p1.weight_decay, p1.dropout_rate), (0.8, 0.9));
    }

    #[test]
    fn invalid_values() {
        let base = TrainConfig::desk_stage1();
        assert!(TrainConfig { epochs: 0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..base.clone() }.validate().is_err());
        assert!(TrainConfig { tau: 0.0, ..base.clone() }.validate().is_err());
    }

    #[test]
    fn stage_one_objective_ignores_lambda() {
        let cfg = TrainConfig { lambda: 0.5, ..TrainConfig::desk_stage1() };
        assert_eq!(cfg.objective().align.lambda, 0.0);
        let cfg = TrainConfig { lambda: 0.5, ..TrainConfig::desk_stage2() };
        assert_eq!(cfg.objective().align.lambda, 0.5);
    }
}
