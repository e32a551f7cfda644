//! Noise-ceiling-normalized squared-correlation scoring.
//!
//! For each vertex `j`, `R2_j` is the squared Pearson correlation between
//! predicted and measured responses across samples. The headline score is
//! `m = mean_j R2_j / NC_j` over vertices whose noise ceiling exceeds
//! `nc_epsilon`; vertices at or below it (e.g. zero-padded ones) are excluded.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{pearson_corr, Matrix};

pub const DEFAULT_NC_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreOptions {
    pub nc_epsilon: f64,
    /// Clip each normalized score at 1.
    pub clip: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            nc_epsilon: DEFAULT_NC_EPSILON,
            clip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub per_vertex_r2: Vec<f64>,
    /// `None` for excluded vertices.
    pub per_vertex_normalized: Vec<Option<f64>>,
    pub overall_m: f64,
    pub per_roi_median: BTreeMap<String, f64>,
    pub n_excluded_vertices: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedScore {
    pub overall_m: f64,
    pub per_vertex_normalized: Vec<Option<f64>>,
    pub n_excluded: usize,
}

/// Squared Pearson correlation per column.
pub fn r2_per_vertex(pred: &Matrix, target: &Matrix) -> Result<Vec<f64>> {
    dim_check("r2 rows", target.rows(), pred.rows())?;
    dim_check("r2 cols", target.cols(), pred.cols())?;
    if pred.rows() < 2 {
        return Err(Error::Precondition("r2 needs at least 2 samples".into()));
    }
    (0..pred.cols())
        .map(|j| {
            let r = pearson_corr(&pred.column(j), &target.column(j))?;
            Ok(r * r)
        })
        .collect()
}

/// `m = mean(R2_j / NC_j)` over vertices with `NC_j > nc_epsilon`.
pub fn noise_normalized_score(r2: &[f64], nc: &[f64], options: &ScoreOptions) -> Result<NormalizedScore> {
    dim_check("noise ceiling length", r2.len(), nc.len())?;
    if nc.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Validation("noise ceiling values must lie in [0, 1]".into()));
    }
    let per_vertex_normalized: Vec<Option<f64>> = r2
        .iter()
        .zip(nc)
        .map(|(&r, &c)| {
            (c > options.nc_epsilon).then(|| {
                let v = r / c;
                if options.clip {
                    v.min(1.0)
                } else {
                    v
                }
            })
        })
        .collect();
    let included: Vec<f64> = per_vertex_normalized.iter().flatten().copied().collect();
    if included.is_empty() {
        return Err(Error::Undefined(
            "every vertex has a noise ceiling at or below nc_epsilon".into(),
        ));
    }
    Ok(NormalizedScore {
        overall_m: included.iter().sum::<f64>() / included.len() as f64,
        n_excluded: r2.len() - included.len(),
        per_vertex_normalized,
    })
}

/// Median of the included normalized scores within each ROI. ROIs without an
/// included vertex are left out.
pub fn roi_median_scores(
    normalized: &[Option<f64>],
    roi_labels: &[u32],
    roi_names: &[String],
) -> Result<BTreeMap<String, f64>> {
    dim_check("roi label count", normalized.len(), roi_labels.len())?;
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (score, &label) in normalized.iter().zip(roi_labels) {
        let label = label as usize;
        if label >= roi_names.len() {
            return Err(Error::Validation(alloc::format!("roi label {label} has no name")));
        }
        if let Some(s) = score {
            groups.entry(label).or_default().push(*s);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(label, mut values)| {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let median = if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            };
            (roi_names[label].clone(), median)
        })
        .collect())
}

/// Full report for predictions against targets.
pub fn evaluate(
    pred: &Matrix,
    target: &Matrix,
    noise_ceiling: &[f64],
    roi_labels: &[u32],
    roi_names: &[String],
    options: &ScoreOptions,
) -> Result<EvalReport> {
    let per_vertex_r2 = r2_per_vertex(pred, target)?;
    let score = noise_normalized_score(&per_vertex_r2, noise_ceiling, options)?;
    let per_roi_median = roi_median_scores(&score.per_vertex_normalized, roi_labels, roi_names)?;
    Ok(EvalReport {
        per_vertex_r2,
        per_vertex_normalized: score.per_vertex_normalized,
        overall_m: score.overall_m,
        per_roi_median,
        n_excluded_vertices: score.n_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hand_built_score() {
        let s = noise_normalized_score(&[0.5, 0.25], &[1.0, 0.5], &ScoreOptions::default()).unwrap();
        assert!((s.overall_m - 0.5).abs() < 1e-15);
        let ideal = noise_normalized_score(&[0.3, 0.8], &[0.3, 0.8], &ScoreOptions::default()).unwrap();
        assert!((ideal.overall_m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exclusion_and_clip() {
        let opts = ScoreOptions::default();
        let s = noise_normalized_score(&[0.9, 0.4, 0.2], &[0.5, 0.0, 0.4], &opts).unwrap();
        assert_eq!(s.n_excluded, 1);
        assert_eq!(s.per_vertex_normalized[1], None);
        assert!((s.overall_m - (1.8 + 0.5) / 2.0).abs() < 1e-15);
        let clipped = noise_normalized_score(&[0.9, 0.4, 0.2], &[0.5, 0.0, 0.4], &ScoreOptions { clip: true, ..opts }).unwrap();
        assert!((clipped.overall_m - 0.75).abs() < 1e-15);
        assert!(matches!(
            noise_normalized_score(&[0.1], &[0.0], &opts),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn r2_signs_square_away() {
        let t = Matrix::from_fn(6, 2, |i, j| libm::sin((i * 2 + j) as f64));
        assert!(r2_per_vertex(&t, &t).unwrap().iter().all(|&r| (r - 1.0).abs() < 1e-14));
        assert!(r2_per_vertex(&t.scale(-1.0), &t).unwrap().iter().all(|&r| (r - 1.0).abs() < 1e-14));
        assert!(r2_per_vertex(&Matrix::zeros(1, 2), &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn roi_medians() {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let scores = vec![Some(0.1), Some(0.4), Some(0.3), None, Some(0.9)];
        let labels = [0, 0, 0, 2, 1];
        let m = roi_median_scores(&scores, &labels, &names).unwrap();
        assert_eq!(m.get("a"), Some(&0.3));
        assert_eq!(m.get("b"), Some(&0.9));
        assert!(!m.contains_key("c"));
        let whole = roi_median_scores(&scores[..2], &[0, 0], &names).unwrap();
        assert!((whole["a"] - 0.25).abs() < 1e-15);
    }
}
