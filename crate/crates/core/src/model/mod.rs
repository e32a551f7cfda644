//! The encoding model: surrogate feature extractor, voxel head with a fixed
//! PCA output stage, alignment matrix, freeze masks, full-model backprop and
//! the checkpoint value type.

mod align;
mod backprop;
mod extractor;
mod freeze;
mod head;

pub use align::{align_scores, AlignmentMatrix};
pub use backprop::{loss_and_gradients, loss_terms, loss_value, Batch, LossBreakdown, Objective};
pub use extractor::{Activation, Block, ExtractorParams, ExtractorSpec};
pub use freeze::{apply_freeze, FreezeMask};
pub use head::{dropout_mask, init_voxel_head_pca, predict_voxels, Mode, VoxelHead};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{dim_check, Result};
use crate::linalg::Matrix;
use crate::rng::{seeded, stream, RngState};
use crate::trainer::{Stage, TrainConfig};

pub const HEAD_WEIGHT: &str = "head.projection.weight";
pub const HEAD_BIAS: &str = "head.projection.bias";
pub const ALIGN_WEIGHT: &str = "align.weight";

pub fn block_weight_name(i: usize) -> String {
    format!("extractor.blocks.{i}.weight")
}

pub fn block_bias_name(i: usize) -> String {
    format!("extractor.blocks.{i}.bias")
}

/// Whether a trainable tensor is a weight matrix (decayed) or a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
}

/// Read-only view of a trainable tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub kind: TensorKind,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

/// Mutable view of a trainable tensor.
#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub kind: TensorKind,
    pub data: &'a mut [f64],
}

/// Everything needed to build a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub extractor: ExtractorSpec,
    pub pca_k: usize,
    pub dropout_rate: f64,
    pub d_text: usize,
}

/// Extractor F, voxel head T and alignment matrix W.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncodingModel {
    pub extractor: ExtractorParams,
    pub head: VoxelHead,
    pub align: AlignmentMatrix,
}

impl EncodingModel {
    /// Seeded extractor and alignment init; PCA output stage fitted to
    /// `train_targets`; zero projection.
    pub fn initialize(spec: &ModelSpec, train_targets: &Matrix, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed, stream::MODEL_INIT);
        let extractor = ExtractorParams::init(&spec.extractor, &mut rng)?;
        let d_feat = extractor.feature_dim();
        let output_stage = init_voxel_head_pca(train_targets, spec.pca_k)?;
        let head = VoxelHead::new(output_stage, d_feat, spec.dropout_rate)?;
        let align = AlignmentMatrix::init(spec.d_text, d_feat, &mut rng);
        let model = Self { extractor, head, align };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        self.head.validate()?;
        let d_feat = self.extractor.feature_dim();
        dim_check("voxel head feature width", d_feat, self.head.feature_dim())?;
        dim_check("alignment feature width", d_feat, self.align.weight.cols())
    }

    pub fn feature_dim(&self) -> usize {
        self.extractor.feature_dim()
    }

    pub fn n_vertices(&self) -> usize {
        self.head.n_vertices()
    }

    /// Eval-mode voxel predictions.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        let f = self.extractor.forward(inputs)?;
        predict_voxels(&self.head, &f, Mode::Eval)
    }

    /// Trainable tensors in a fixed order: extractor blocks, head
    /// projection, alignment matrix. The PCA output stage is a fixed buffer
    /// and never listed.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (i, b) in self.extractor.blocks.iter().enumerate() {
            out.push(TensorRef {
                name: block_weight_name(i),
                kind: TensorKind::Weight,
                rows: b.weight.rows(),
                cols: b.weight.cols(),
                data: b.weight.as_slice(),
            });
            out.push(TensorRef {
                name: block_bias_name(i),
                kind: TensorKind::Bias,
                rows: 1,
                cols: b.bias.len(),
                data: &b.bias,
            });
        }
        let w = &self.head.projection_weight;
        out.push(TensorRef {
            name: HEAD_WEIGHT.into(),
            kind: TensorKind::Weight,
            rows: w.rows(),
            cols: w.cols(),
            data: w.as_slice(),
        });
        out.push(TensorRef {
            name: HEAD_BIAS.into(),
            kind: TensorKind::Bias,
            rows: 1,
            cols: self.head.projection_bias.len(),
            data: &self.head.projection_bias,
        });
        let a = &self.align.weight;
        out.push(TensorRef {
            name: ALIGN_WEIGHT.into(),
            kind: TensorKind::Weight,
            rows: a.rows(),
            cols: a.cols(),
            data: a.as_slice(),
        });
        out
    }

    /// Same order as [`Self::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (i, b) in self.extractor.blocks.iter_mut().enumerate() {
            out.push(TensorMut {
                name: block_weight_name(i),
                kind: TensorKind::Weight,
                data: b.weight.as_mut_slice(),
            });
            out.push(TensorMut {
                name: block_bias_name(i),
                kind: TensorKind::Bias,
                data: &mut b.bias,
            });
        }
        out.push(TensorMut {
            name: HEAD_WEIGHT.into(),
            kind: TensorKind::Weight,
            data: self.head.projection_weight.as_mut_slice(),
        });
        out.push(TensorMut {
            name: HEAD_BIAS.into(),
            kind: TensorKind::Bias,
            data: &mut self.head.projection_bias,
        });
        out.push(TensorMut {
            name: ALIGN_WEIGHT.into(),
            kind: TensorKind::Weight,
            data: self.align.weight.as_mut_slice(),
        });
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|t| t.name).collect()
    }
}

/// A saved training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
    pub model: EncodingModel,
    pub config: TrainConfig,
    pub best_val_m: f64,
    pub rng_state: RngState,
}
