use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation of two equal-length vectors.
///
/// Returns 0 when either vector has zero variance: a constant carries no
/// correlational information and downstream metrics must stay finite.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Precondition(alloc::format!(
            "pearson_corr needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Precondition(
            "pearson_corr needs at least 2 observations".into(),
        ));
    }
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    let r = sab / (libm::sqrt(saa) * libm::sqrt(sbb));
    if !r.is_finite() {
        return Err(Error::NonFinite("pearson_corr".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let neg: [f64; 4] = a.map(|v| -v);
        assert!((pearson_corr(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_corr(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        // cov = 0.8*... by hand: deviations (-1.5,-.5,.5,1.5) vs (-.5,-1.5,1.5,.5)
        // sum of products 3.0, sum of squares 5.0 each -> 0.6
        assert!((pearson_corr(&a, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn constant_vector_gives_zero() {
        assert_eq!(pearson_corr(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(pearson_corr(&[1.0], &[1.0]), Err(Error::Precondition(_))));
        assert!(matches!(pearson_corr(&[1.0, 2.0], &[1.0]), Err(Error::Precondition(_))));
    }

    fn vec_pair() -> impl Strategy<Value = (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-10.0..10.0f64, n),
                proptest::collection::vec(-10.0..10.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_affine_invariant((a, b) in vec_pair(), alpha in 0.1..10.0f64, beta in -5.0..5.0f64) {
            let r = pearson_corr(&a, &b).unwrap();
            prop_assert!((r - pearson_corr(&b, &a).unwrap()).abs() < 1e-12);
            let shifted: alloc::vec::Vec<f64> = a.iter().map(|v| alpha * v + beta).collect();
            prop_assert!((r - pearson_corr(&shifted, &b).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}
