use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{dim_check, Error, Result};
use crate::linalg::{pca_fit, pca_reconstruct, Matrix, PcaModel};

/// Forward-pass mode. Dropout is only active in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Voxel mapping: a trainable projection onto PCA coefficients followed by
/// the fixed PCA reconstruction (`weight = components`, `bias = mean`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VoxelHead {
    /// k x d_feat.
    pub projection_weight: Matrix,
    pub projection_bias: Vec<f64>,
    pub dropout_rate: f64,
    pub output_stage: PcaModel,
}

impl VoxelHead {
    /// Zero projection on top of `output_stage`: predicts the PCA mean until trained.
    pub fn new(output_stage: PcaModel, feature_dim: usize, dropout_rate: f64) -> Result<Self> {
        let head = Self {
            projection_weight: Matrix::zeros(output_stage.k(), feature_dim),
            projection_bias: alloc::vec![0.0; output_stage.k()],
            dropout_rate,
            output_stage,
        };
        head.validate()?;
        Ok(head)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        dim_check("projection rows vs pca k", self.output_stage.k(), self.projection_weight.rows())?;
        dim_check("projection bias", self.output_stage.k(), self.projection_bias.len())?;
        self.output_stage.validate()
    }

    pub fn feature_dim(&self) -> usize {
        self.projection_weight.cols()
    }

    pub fn n_vertices(&self) -> usize {
        self.output_stage.dim()
    }

    /// PCA coefficients for (possibly dropped-out) features.
    pub(crate) fn coefficients(&self, features: &Matrix) -> Result<Matrix> {
        let mut c = features.matmul_t(&self.projection_weight)?;
        c.add_row_broadcast(&self.projection_bias)?;
        Ok(c)
    }
}

/// Inverted dropout scale factors (0 or `1/(1-rate)`) for a `rows x cols`
/// input. One uniform draw per element, row-major; an element is kept when
/// its draw is `>= rate`. Nothing is drawn when `rate == 0`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut dyn RngCore) -> Matrix {
    if rate == 0.0 {
        return Matrix::from_fn(rows, cols, |_, _| 1.0);
    }
    let keep_scale = 1.0 / (1.0 - rate);
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() >= rate {
            keep_scale
        } else {
            0.0
        }
    })
}

pub(crate) fn apply_mask(features: &Matrix, mask: &Matrix) -> Matrix {
    Matrix::from_fn(features.rows(), features.cols(), |i, j| features.get(i, j) * mask.get(i, j))
}

/// Predicted voxels `pca_reconstruct(dropout(f) P^T + b)`.
pub fn predict_voxels(head: &VoxelHead, features: &Matrix, mode: Mode<'_>) -> Result<Matrix> {
    dim_check("voxel head feature width", head.feature_dim(), features.cols())?;
    let coefficients = match mode {
        Mode::Eval => head.coefficients(features)?,
        Mode::Train(rng) => {
            let mask = dropout_mask(features.rows(), features.cols(), head.dropout_rate, rng);
            head.coefficients(&apply_mask(features, &mask))?
        }
    };
    pca_reconstruct(&head.output_stage, &coefficients)
}

/// The fixed output stage: PCA of the training voxel targets.
pub fn init_voxel_head_pca(train_targets: &Matrix, k: usize) -> Result<PcaModel> {
    pca_fit(train_targets, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, stream};

    fn head(k: usize, d: usize, rate: f64) -> VoxelHead {
        let targets = Matrix::from_fn(12, 5, |i, j| libm::sin((i * 5 + j) as f64 * 0.37));
        VoxelHead::new(init_voxel_head_pca(&targets, k).unwrap(), d, rate).unwrap()
    }

    #[test]
    fn zero_projection_predicts_mean() {
        let h = head(3, 4, 0.0);
        let f = Matrix::from_fn(3, 4, |i, j| (i + j) as f64);
        let v = predict_voxels(&h, &f, Mode::Eval).unwrap();
        for i in 0..3 {
            for (a, b) in v.row(i).iter().zip(&h.output_stage.mean) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eval_is_deterministic() {
        let mut h = head(3, 4, 0.5);
        h.projection_weight = Matrix::from_fn(3, 4, |i, j| 0.1 * (i as f64 - j as f64));
        let f = Matrix::from_fn(3, 4, |i, j| (i * j) as f64 - 1.0);
        assert_eq!(
            predict_voxels(&h, &f, Mode::Eval).unwrap(),
            predict_voxels(&h, &f, Mode::Eval).unwrap()
        );
    }

    #[test]
    fn train_dropout_replays_mask() {
        let mut h = head(2, 6, 0.5);
        h.projection_weight = Matrix::from_fn(2, 6, |i, j| 0.2 * (i + 1) as f64 - 0.05 * j as f64);
        h.projection_bias = alloc::vec![0.3, -0.1];
        let f = Matrix::from_fn(4, 6, |i, j| libm::cos((i * 6 + j) as f64));

        let mut rng = seeded(11, stream::TRAINING);
        let v = predict_voxels(&h, &f, Mode::Train(&mut rng)).unwrap();

        // replay: one uniform per element, kept iff u >= rate, scaled by 2
        let mut replay = seeded(11, stream::TRAINING);
        let mut dropped = f.clone();
        let mut zeros = 0;
        for x in dropped.as_mut_slice() {
            let u: f64 = replay.random();
            if u >= 0.5 {
                *x *= 2.0;
            } else {
                *x = 0.0;
                zeros += 1;
            }
        }
        assert!(zeros > 0 && zeros < 24);
        let mut coeff = Matrix::zeros(4, 2);
        for i in 0..4 {
            for k in 0..2 {
                let s: f64 = (0..6).map(|j| dropped.get(i, j) * h.projection_weight.get(k, j)).sum();
                coeff.set(i, k, s + h.projection_bias[k]);
            }
        }
        let expected = pca_reconstruct(&h.output_stage, &coeff).unwrap();
        assert!(v.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn full_rank_head_represents_any_target() {
        let targets = Matrix::from_fn(10, 4, |i, j| libm::sin((i * 4 + j) as f64) + j as f64);
        let pca = init_voxel_head_pca(&targets, 4).unwrap();
        let want = Matrix::from_fn(1, 4, |_, j| 3.0 - j as f64);
        let z = crate::linalg::pca_project(&pca, &want).unwrap();
        assert!(pca_reconstruct(&pca, &z).unwrap().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn rank_one_targets_are_reconstructed() {
        let dir = [1.0, -2.0, 0.5];
        let targets = Matrix::from_fn(6, 3, |i, j| (i as f64 - 2.0) * dir[j]);
        let pca = init_voxel_head_pca(&targets, 1).unwrap();
        let z = crate::linalg::pca_project(&pca, &targets).unwrap();
        assert!(pca_reconstruct(&pca, &z).unwrap().max_abs_diff(&targets) < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let h = head(2, 4, 0.0);
        assert!(predict_voxels(&h, &Matrix::zeros(1, 3), Mode::Eval).is_err());
        let mut bad = h.clone();
        bad.dropout_rate = 1.0;
        assert!(bad.validate().is_err());
    }
}
