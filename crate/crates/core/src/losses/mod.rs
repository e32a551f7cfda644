//! Training objectives: voxel MSE, the InfoNCE image-text alignment loss, their
//! weighted combination, and finite-difference gradient checking.

mod gradcheck;

pub use gradcheck::{
    check_gradient, check_gradient_terms, compare_model_gradients, grad_check_model, GradCheckOptions, GradCheckReport, TensorCheck,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::linalg::Matrix;

/// Gradient key of [`mse_loss`].
pub const PRED: &str = "pred";
/// Gradient key of [`alignment_loss`].
pub const SCORES: &str = "scores";

/// Gradients keyed by tensor name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients(BTreeMap<String, Matrix>);

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, grad: Matrix) {
        self.0.insert(name.into(), grad);
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.0.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.0.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Matrix)> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Matrix)> {
        self.0.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self += scale * other`, tensor by tensor; names missing from `self`
    /// are inserted.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) -> Result<()> {
        for (name, g) in &other.0 {
            match self.0.get_mut(name) {
                Some(acc) => {
                    dim_check(&format!("gradient {name} rows"), acc.rows(), g.rows())?;
                    dim_check(&format!("gradient {name} cols"), acc.cols(), g.cols())?;
                    for (a, &b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *a += scale * b;
                    }
                }
                None => {
                    self.0.insert(name.clone(), g.scale(scale));
                }
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.0.values().all(Matrix::is_finite)
    }
}

/// A scalar loss and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradients: Gradients,
}

/// Temperature and weight of the alignment term.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignConfig {
    pub tau: f64,
    pub lambda: f64,
    /// Average the text-to-image and image-to-text directions.
    pub symmetric: bool,
}

impl AlignConfig {
    pub fn new(tau: f64, lambda: f64) -> Self {
        Self {
            tau,
            lambda,
            symmetric: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Precondition(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Precondition(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Mean of squared errors over every element.
///
/// The gradient with respect to `pred` (key [`PRED`]) is
/// `2 (pred - target) / (B V)`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<LossValue> {
    dim_check("mse rows", target.rows(), pred.rows())?;
    dim_check("mse cols", target.cols(), pred.cols())?;
    let count = (pred.rows() * pred.cols()).max(1) as f64;
    let diff = pred.sub(target)?;
    let value = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count;
    let mut gradients = Gradients::new();
    gradients.insert(PRED, diff.scale(2.0 / count));
    Ok(LossValue { value, gradients })
}

/// InfoNCE over a B x B score matrix whose diagonal holds the positive pairs.
///
/// Row `i` (text anchor `i` against every image in the batch) contributes
/// `-log softmax(s_i / tau)[i]`; the value is the mean over rows. The gradient
/// with respect to the scores (key [`SCORES`]) is `(softmax - I) / (B tau)`.
/// With `cfg.symmetric` the column direction is averaged in.
pub fn alignment_loss(scores: &Matrix, cfg: &AlignConfig) -> Result<LossValue> {
    cfg.validate()?;
    let b = scores.rows();
    if b == 0 {
        return Err(Error::Precondition("alignment loss needs B >= 1".into()));
    }
    dim_check("alignment scores square", b, scores.cols())?;
    if !scores.is_finite() {
        return Err(Error::NonFinite("alignment scores".into()));
    }

    let (row_value, row_grad) = directional_infonce(scores, cfg.tau);
    let (value, grad) = if cfg.symmetric {
        let (col_value, col_grad_t) = directional_infonce(&scores.transpose(), cfg.tau);
        let grad = row_grad.add(&col_grad_t.transpose())?.scale(0.5);
        (0.5 * (row_value + col_value), grad)
    } else {
        (row_value, row_grad)
    };
    let mut gradients = Gradients::new();
    gradients.insert(SCORES, grad);
    Ok(LossValue { value, gradients })
}

fn directional_infonce(scores: &Matrix, tau: f64) -> (f64, Matrix) {
    let b = scores.rows();
    let mut grad = Matrix::zeros(b, b);
    let mut total = 0.0;
    let mut exps = vec![0.0; b];
    for i in 0..b {
        let row = scores.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (e, &s) in exps.iter_mut().zip(row) {
            *e = libm::exp((s - max) / tau);
            denom += *e;
        }
        // -log(exp((s_ii - max)/tau) / denom)
        total += libm::log(denom) - (row[i] - max) / tau;
        let g = grad.row_mut(i);
        for (j, (gj, &e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / denom;
            *gj = (p - if i == j { 1.0 } else { 0.0 }) / (b as f64 * tau);
        }
    }
    (total / b as f64, grad)
}

/// `mse + lambda * align`, with gradients combined by the same weights.
pub fn total_loss(mse: &LossValue, align: &LossValue, cfg: &AlignConfig) -> Result<LossValue> {
    let mut gradients = mse.gradients.clone();
    gradients.add_scaled(&align.gradients, cfg.lambda)?;
    Ok(LossValue {
        value: mse.value + cfg.lambda * align.value,
        gradients,
    })
}

/// Per-row losses of the text-to-image direction; used by tests and reports.
pub fn alignment_row_losses(scores: &Matrix, tau: f64) -> Vec<f64> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|&s| libm::exp((s - max) / tau)).sum();
            libm::log(denom) - (row[i] - max) / tau
        })
        .collect()
}
