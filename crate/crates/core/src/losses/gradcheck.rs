use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::losses::Gradients;
use crate::model::{loss_and_gradients, loss_terms, Batch, EncodingModel, FreezeMask, Mode, Objective};
use crate::rng::{seeded, stream};

/// Central-difference check of `analytic` at `params` over `coords`.
///
/// Returns the largest `|a - n| / max(|a|, |n|, 1e-8)` where `n` is
/// `(L(theta + eps e_i) - L(theta - eps e_i)) / (2 eps)`.
pub fn check_gradient<F>(params: &[f64], analytic: &[f64], coords: &[usize], epsilon: f64, mut loss: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_gradient_terms(params, analytic, coords, epsilon, |theta| Ok(alloc::vec![loss(theta)?]))
}

/// [`check_gradient`] for a loss given as a list of summands.
///
/// `L(theta + eps e_i) - L(theta - eps e_i)` is accumulated summand by
/// summand, so rounding shared by both evaluations cancels before the sum.
/// Both evaluations must return the same number of summands.
pub fn check_gradient_terms<F>(
    params: &[f64],
    analytic: &[f64],
    coords: &[usize],
    epsilon: f64,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_epsilon(epsilon)?;
    if params.len() != analytic.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient length".into(),
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let mut theta = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let original = theta[i];
        theta[i] = original + epsilon;
        let plus = loss(&theta)?;
        theta[i] = original - epsilon;
        let minus = loss(&theta)?;
        theta[i] = original;
        dim_check("loss summand count", plus.len(), minus.len())?;
        if plus.iter().chain(&minus).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("loss during gradient check at coordinate {i}")));
        }
        let delta: f64 = plus.iter().zip(&minus).map(|(p, m)| p - m).sum();
        let numeric = delta / (2.0 * epsilon);
        let a = analytic[i];
        let denom = libm::fabs(a).max(libm::fabs(numeric)).max(1e-8);
        worst = worst.max(libm::fabs(a - numeric) / denom);
    }
    Ok(worst)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(1e-8..=1e-4).contains(&epsilon) {
        return Err(Error::Precondition(format!("epsilon must be in [1e-8, 1e-4], got {epsilon}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub coordinates_checked: usize,
    pub max_relative_error: f64,
}

/// Per-tensor outcome of [`grad_check_model`]; frozen tensors are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max)
    }

    /// Tensors whose error reaches `threshold`.
    pub fn failures(&self, threshold: f64) -> Vec<&TensorCheck> {
        self.tensors.iter().filter(|t| !(t.max_relative_error < threshold)).collect()
    }
}

/// Options for [`grad_check_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Tensors larger than this are checked on a seeded random subsample of
    /// this many coordinates.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_coords_per_tensor: 400,
            seed: 0,
        }
    }
}

/// Checks the model's analytic gradients (eval mode, so no dropout) against
/// central differences for every tensor `mask` leaves trainable.
pub fn grad_check_model(
    model: &EncodingModel,
    batch: Batch<'_>,
    objective: &Objective,
    mask: &FreezeMask,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, analytic) = loss_and_gradients(model, batch, objective, Mode::Eval, None)?;
    compare_model_gradients(model, batch, objective, mask, &analytic, options)
}

/// Like [`grad_check_model`] but against caller-supplied gradients.
pub fn compare_model_gradients(
    model: &EncodingModel,
    batch: Batch<'_>,
    objective: &Objective,
    mask: &FreezeMask,
    analytic: &Gradients,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    check_epsilon(options.epsilon)?;
    mask.check_covers(model)?;
    let mut rng = seeded(options.seed, stream::GRAD_CHECK);
    let mut tensors = Vec::new();
    for (t_idx, tensor) in model.tensors().into_iter().enumerate() {
        if mask.is_frozen(&tensor.name) != Some(false) {
            continue;
        }
        let len = tensor.data.len();
        let coords: Vec<usize> = if len <= options.max_coords_per_tensor {
            (0..len).collect()
        } else {
            let mut picked = rand::seq::index::sample(&mut rng, len, options.max_coords_per_tensor).into_vec();
            picked.sort_unstable();
            picked
        };
        let grad = analytic
            .get(&tensor.name)
            .ok_or_else(|| Error::Validation(format!("no analytic gradient for {}", tensor.name)))?;
        let params = tensor.data.to_vec();
        let mut probe = model.clone();
        let worst = check_gradient_terms(&params, grad.as_slice(), &coords, options.epsilon, |theta| {
            let mut views = probe.tensors_mut();
            views[t_idx].data.copy_from_slice(theta);
            drop(views);
            loss_terms(&probe, batch, objective, Mode::Eval)
        })?;
        tensors.push(TensorCheck {
            name: tensor.name,
            coordinates_checked: coords.len(),
            max_relative_error: worst,
        });
    }
    Ok(GradCheckReport { tensors })
}
