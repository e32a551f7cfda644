use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::trainer::{train_stage2, TrainConfig, TrainObserver};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AblationRow {
    pub lambda: f64,
    pub seed: u64,
    pub val_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// `(lambda, median val_m)` in the order the lambdas were given.
    pub medians: Vec<(f64, f64)>,
}

impl AblationReport {
    pub fn median_for(&self, lambda: f64) -> Option<f64> {
        self.medians.iter().find(|(l, _)| *l == lambda).map(|&(_, m)| m)
    }

    /// Lambdas from best to worst median score.
    pub fn ordering(&self) -> Vec<f64> {
        let mut sorted = self.medians.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
        sorted.into_iter().map(|(l, _)| l).collect()
    }

    /// `kind,lambda,seed,m` with one `run` row per (lambda, seed) and one
    /// `median` row per lambda (empty seed field).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,lambda,seed,m\n");
        for r in &self.rows {
            let _ = writeln!(out, "run,{},{},{}", r.lambda, r.seed, r.val_m);
        }
        for (l, m) in &self.medians {
            let _ = writeln!(out, "median,{l},,{m}");
        }
        out
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs stage 2 from the shared `stage1` checkpoint for every
/// `(lambda, seed)` pair and reports best validation scores.
pub fn run_lambda_ablation(
    base: &TrainConfig,
    stage1: &Checkpoint,
    ds: &Dataset,
    split: &Split,
    lambdas: &[f64],
    seeds: &[u64],
    observer: &mut dyn TrainObserver,
) -> Result<AblationReport> {
    if lambdas.is_empty() || seeds.is_empty() {
        return Err(Error::Precondition("ablation needs at least one lambda and one seed".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len() * seeds.len());
    let mut medians = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut scores = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = TrainConfig {
                lambda,
                seed,
                ..base.clone()
            };
            let (ckpt, _) = train_stage2(&cfg, stage1, ds, split, observer)?;
            rows.push(AblationRow {
                lambda,
                seed,
                val_m: ckpt.best_val_m,
            });
            scores.push(ckpt.best_val_m);
        }
        medians.push((lambda, median(&mut scores)));
    }
    Ok(AblationReport { rows, medians })
}
