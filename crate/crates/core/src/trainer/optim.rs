use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::Gradients;
use crate::model::{EncodingModel, FreezeMask, TensorKind};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with decoupled weight decay.
///
/// Per step, for every unfrozen tensor:
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta`,
/// with the decay term applied to weight matrices only. Frozen tensors are
/// left untouched, decay included.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(model: &EncodingModel, learning_rate: f64, weight_decay: f64) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
        Self {
            learning_rate,
            weight_decay,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut EncodingModel, grads: &Gradients, mask: &FreezeMask) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::Diverged("non-finite gradient reached the optimizer".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - libm::pow(ADAM_BETA1, t as f64);
        let bias2 = 1.0 - libm::pow(ADAM_BETA2, t as f64);
        let lr = self.learning_rate;
        let wd = self.weight_decay;

        for (idx, tensor) in model.tensors_mut().into_iter().enumerate() {
            match mask.is_frozen(&tensor.name) {
                Some(true) => continue,
                Some(false) => {}
                None => {
                    return Err(Error::Validation(format!(
                        "freeze mask does not cover tensor {}",
                        tensor.name
                    )))
                }
            }
            let g = grads
                .get(&tensor.name)
                .ok_or_else(|| Error::Validation(format!("missing gradient for {}", tensor.name)))?
                .as_slice();
            if g.len() != tensor.data.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("gradient of {}", tensor.name),
                    expected: tensor.data.len(),
                    actual: g.len(),
                });
            }
            let decay = if tensor.kind == TensorKind::Weight { wd } else { 0.0 };
            update_slice(
                tensor.data,
                g,
                &mut self.first[idx],
                &mut self.second[idx],
                (bias1, bias2),
                lr,
                decay,
            );
        }
        Ok(())
    }
}

fn update_slice(
    theta: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (bias1, bias2): (f64, f64),
    lr: f64,
    decay: f64,
) {
    for i in 0..g.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        let old = theta[i];
        theta[i] = old - lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS) - lr * decay * old;
    }
}
