use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_check, Error, Result};
use crate::linalg::Matrix;

/// Learnable map from image features into the text-embedding space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentMatrix {
    /// d_text x d_feat.
    pub weight: Matrix,
}

impl AlignmentMatrix {
    /// Identity when the widths agree, otherwise `N(0, 1/d_feat)` entries.
    pub fn init<R: Rng + ?Sized>(d_text: usize, d_feat: usize, rng: &mut R) -> Self {
        let weight = if d_text == d_feat {
            Matrix::identity(d_text)
        } else {
            let scale = 1.0 / libm::sqrt(d_feat as f64);
            Matrix::from_fn(d_text, d_feat, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
        };
        Self { weight }
    }
}

/// Rows scaled to unit length, plus the original norms.
pub(crate) fn normalize_rows(m: &Matrix, what: &str) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let norm = libm::sqrt(m.row(i).iter().map(|v| v * v).sum());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Validation(format!("{what} row {i} has zero or non-finite norm")));
        }
        out.row_mut(i).iter_mut().for_each(|v| *v /= norm);
        norms.push(norm);
    }
    Ok((out, norms))
}

/// Cosine scores `s_ij = t_i . (W f_j)` between L2-normalized text rows and
/// L2-normalized aligned image rows.
pub fn align_scores(w: &AlignmentMatrix, text: &Matrix, features: &Matrix) -> Result<Matrix> {
    dim_check("alignment batch", text.rows(), features.rows())?;
    dim_check("alignment text width", w.weight.rows(), text.cols())?;
    dim_check("alignment feature width", w.weight.cols(), features.cols())?;
    let (t_hat, _) = normalize_rows(text, "text embedding")?;
    let (u_hat, _) = normalize_rows(&features.matmul_t(&w.weight)?, "aligned image feature")?;
    Ok(t_hat.matmul_t(&u_hat)?.map(|s| s.clamp(-1.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, stream};

    #[test]
    fn orthonormal_rows_give_identity() {
        let w = AlignmentMatrix::init(3, 3, &mut seeded(0, stream::MODEL_INIT));
        let t = Matrix::identity(3);
        let s = align_scores(&w, &t, &t).unwrap();
        assert!(s.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn scaling_a_feature_row_leaves_its_column() {
        let w = AlignmentMatrix::init(2, 3, &mut seeded(1, stream::MODEL_INIT));
        let t = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 + 0.5);
        let f = Matrix::from_fn(3, 3, |i, j| libm::sin((3 * i + j) as f64) + 0.1);
        let base = align_scores(&w, &t, &f).unwrap();
        let mut scaled = f.clone();
        scaled.row_mut(1).iter_mut().for_each(|v| *v *= 10.0);
        let after = align_scores(&w, &t, &scaled).unwrap();
        for i in 0..3 {
            assert!((base.get(i, 1) - after.get(i, 1)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_by_hand() {
        let w = AlignmentMatrix { weight: Matrix::from_rows(&[&[1.0, 2.0], &[0.0, -1.0]]).unwrap() };
        let t = Matrix::from_rows(&[&[3.0, 4.0], &[1.0, 0.0]]).unwrap();
        let f = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, -1.0]]).unwrap();
        // W f_0 = (3, -1), W f_1 = (0, 1)
        let s = align_scores(&w, &t, &f).unwrap();
        let n0 = libm::sqrt(10.0);
        assert!((s.get(0, 0) - (3.0 * 3.0 - 4.0) / (5.0 * n0)).abs() < 1e-15);
        assert!((s.get(0, 1) - 4.0 / 5.0).abs() < 1e-15);
        assert!((s.get(1, 0) - 3.0 / n0).abs() < 1e-15);
        assert!(s.get(1, 1).abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_rejected() {
        let w = AlignmentMatrix::init(2, 2, &mut seeded(0, 0));
        let t = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert!(matches!(align_scores(&w, &t, &Matrix::identity(2)), Err(Error::Validation(_))));
    }
}
