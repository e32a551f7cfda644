use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::losses::Gradients;
use crate::model::{block_bias_name, block_weight_name, EncodingModel, ALIGN_WEIGHT, HEAD_BIAS, HEAD_WEIGHT};

/// Frozen flag for every trainable tensor of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeMask {
    frozen: BTreeMap<String, bool>,
}

impl FreezeMask {
    pub fn from_flags(flags: impl IntoIterator<Item = (String, bool)>) -> Self {
        Self {
            frozen: flags.into_iter().collect(),
        }
    }

    pub fn all(model: &EncodingModel, frozen: bool) -> Self {
        Self::from_flags(model.tensor_names().into_iter().map(|n| (n, frozen)))
    }

    /// Stage 1: only the head projection trains.
    pub fn stage1(model: &EncodingModel) -> Self {
        let mut mask = Self::all(model, true);
        mask.set(HEAD_WEIGHT, false);
        mask.set(HEAD_BIAS, false);
        mask
    }

    /// Stage 2: the last `n` extractor blocks and the alignment matrix train;
    /// the voxel head and earlier blocks stay frozen.
    pub fn stage2(model: &EncodingModel, unfreeze_last_n_blocks: usize) -> Self {
        let mut mask = Self::all(model, true);
        let depth = model.extractor.blocks.len();
        for i in depth.saturating_sub(unfreeze_last_n_blocks)..depth {
            mask.set(&block_weight_name(i), false);
            mask.set(&block_bias_name(i), false);
        }
        mask.set(ALIGN_WEIGHT, false);
        mask
    }

    pub fn set(&mut self, name: &str, frozen: bool) {
        self.frozen.insert(name.into(), frozen);
    }

    pub fn is_frozen(&self, name: &str) -> Option<bool> {
        self.frozen.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.frozen.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Errors unless the mask names exactly the model's trainable tensors.
    pub fn check_covers(&self, model: &EncodingModel) -> Result<()> {
        let names = model.tensor_names();
        for n in &names {
            if !self.frozen.contains_key(n) {
                return Err(Error::Validation(format!("freeze mask does not cover tensor {n}")));
            }
        }
        if self.frozen.len() != names.len() {
            return Err(Error::Validation("freeze mask names tensors the model lacks".into()));
        }
        Ok(())
    }

    /// Index of the first extractor block with a trainable tensor.
    pub(crate) fn first_trainable_block(&self, n_blocks: usize) -> Option<usize> {
        (0..n_blocks).find(|&i| {
            self.is_frozen(&block_weight_name(i)) == Some(false)
                || self.is_frozen(&block_bias_name(i)) == Some(false)
        })
    }
}

/// Zeroes the gradients of frozen tensors.
pub fn apply_freeze(mask: &FreezeMask, mut grads: Gradients) -> Result<Gradients> {
    for (name, g) in grads.iter_mut() {
        match mask.is_frozen(name) {
            Some(true) => g.as_mut_slice().iter_mut().for_each(|v| *v = 0.0),
            Some(false) => {}
            None => {
                return Err(Error::Validation(format!("freeze mask does not cover tensor {name}")));
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn grads() -> Gradients {
        let mut g = Gradients::new();
        g.insert("a", Matrix::from_fn(2, 2, |i, j| (i + j + 1) as f64));
        g.insert("b", Matrix::from_fn(1, 3, |_, j| j as f64 - 1.0));
        g
    }

    #[test]
    fn all_frozen_zeroes_everything() {
        let mask = FreezeMask::from_flags([("a".into(), true), ("b".into(), true)]);
        let g = apply_freeze(&mask, grads()).unwrap();
        assert!(g.iter().all(|(_, m)| m.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn all_unfrozen_is_identity() {
        let mask = FreezeMask::from_flags([("a".into(), false), ("b".into(), false)]);
        assert_eq!(apply_freeze(&mask, grads()).unwrap(), grads());
    }

    #[test]
    fn uncovered_tensor_is_an_error() {
        let mask = FreezeMask::from_flags([("a".into(), false)]);
        assert!(matches!(apply_freeze(&mask, grads()), Err(Error::Validation(_))));
    }
}
