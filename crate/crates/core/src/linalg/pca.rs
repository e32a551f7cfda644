use alloc::format;
use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// Principal component model: `mean`, orthonormal `components` (k x d, one
/// per row) and their `variances` in descending order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub variances: Vec<f64>,
}

impl PcaModel {
    /// Number of retained components.
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    /// Input dimensionality.
    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    /// Checks the structural invariants (orthonormal rows, sorted variances).
    pub fn validate(&self) -> Result<()> {
        dim_check("pca mean length", self.dim(), self.mean.len())?;
        dim_check("pca variance count", self.k(), self.variances.len())?;
        if !self.components.is_finite() || self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pca model".into()));
        }
        if self.variances.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Validation("pca variances must be non-negative".into()));
        }
        if self.variances.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Validation("pca variances must be non-increasing".into()));
        }
        let gram = self.components.matmul_t(&self.components)?;
        let residual = gram.max_abs_diff(&Matrix::identity(self.k()));
        if residual > 1e-9 {
            return Err(Error::Validation(format!(
                "pca components not orthonormal (residual {residual:e})"
            )));
        }
        Ok(())
    }
}

/// Fits a `k`-component PCA to the rows of `x`.
///
/// The covariance uses divisor `n - 1`. Each component is oriented so that its
/// largest-magnitude entry is positive (first such entry on ties).
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Precondition(format!("pca_fit needs n >= 2, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Precondition(format!(
            "pca_fit needs 1 <= k <= min(n - 1, d) = {}, got {k}",
            (n - 1).min(d)
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("pca_fit input".into()));
    }

    let mean = x.column_means();
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let cov = centered.t_matmul(&centered)?.scale(1.0 / (n - 1) as f64);
    let eig = symmetric_eigen(&cov)?;

    let mut components = Matrix::zeros(k, d);
    for r in 0..k {
        let v = eig.vectors.row(r);
        let mut pivot = 0;
        for (j, &val) in v.iter().enumerate() {
            if libm::fabs(val) > libm::fabs(v[pivot]) {
                pivot = j;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (dst, &src) in components.row_mut(r).iter_mut().zip(v) {
            *dst = sign * src;
        }
    }
    let variances = eig.values[..k].iter().map(|&v| v.max(0.0)).collect();
    Ok(PcaModel {
        mean,
        components,
        variances,
    })
}

/// `(x - mean) * components^T`.
pub fn pca_project(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    dim_check("pca_project input columns", model.dim(), x.cols())?;
    let mut centered = x.clone();
    for i in 0..x.rows() {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&model.mean) {
            *v -= m;
        }
    }
    centered.matmul_t(&model.components)
}

/// `z * components + mean`.
pub fn pca_reconstruct(model: &PcaModel, z: &Matrix) -> Result<Matrix> {
    dim_check("pca_reconstruct coefficient columns", model.k(), z.cols())?;
    let mut out = z.matmul(&model.components)?;
    out.add_row_broadcast(&model.mean)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_point_example() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[2.0, 0.0]]).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        assert_eq!(m.mean, vec![1.0, 0.0]);
        assert_eq!(m.components.row(0), [1.0, 0.0]);
        assert!((m.variances[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_have_zero_variance() {
        let x = Matrix::from_fn(4, 3, |_, j| (j + 1) as f64); let x = Matrix::from_vec(4, 3, x.into_vec()).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        assert_eq!(m.variances, vec![0.0]);
        assert_eq!(m.mean, vec![1.0, 2.0, 3.0]);
        m.validate().unwrap();
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let one = Matrix::from_rows(&[&[1.0, 2.0]]).unwrap();
        assert!(matches!(pca_fit(&one, 1), Err(Error::Precondition(_))));
        let x = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0], &[2.0, 2.0]]).unwrap();
        assert!(matches!(pca_fit(&x, 0), Err(Error::Precondition(_))));
        assert!(matches!(pca_fit(&x, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn project_and_reconstruct_basics() {
        let x = Matrix::from_rows(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 2.5], &[3.0, 1.0, 0.0], &[2.0, 2.0, 1.0]])
            .unwrap();
        let m = pca_fit(&x, 2).unwrap();
        let at_mean = pca_project(&m, &Matrix::row_vector(&m.mean).unwrap()).unwrap();
        assert!(at_mean.as_slice().iter().all(|v| v.abs() < 1e-15));

        let shifted: Vec<f64> = m.mean.iter().zip(m.components.row(0)).map(|(a, b)| a + b).collect();
        let z = pca_project(&m, &Matrix::row_vector(&shifted).unwrap()).unwrap();
        assert!((z.get(0, 0) - 1.0).abs() < 1e-12 && z.get(0, 1).abs() < 1e-12);

        let back = pca_reconstruct(&m, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(back.row(0), m.mean.as_slice());

        assert!(pca_project(&m, &Matrix::zeros(1, 2)).is_err());
        assert!(pca_reconstruct(&m, &Matrix::zeros(1, 3)).is_err());
    }
}
