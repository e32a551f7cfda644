use proptest::prelude::*;
use vem_core::dataset::{generate_synthetic, SyntheticSpec};
use vem_core::linalg::{pca_fit, Matrix};
use vem_core::model::{align_scores, AlignmentMatrix, EncodingModel};
use vem_core::rng::seeded;
use vem_core::trainer::TrainConfig;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-2.0..2.0f64, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

fn scale_rows(m: &Matrix, scales: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) * scales[i % scales.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_ignore_positive_row_rescaling(
        b in 1usize..6,
        seed in any::<u64>(),
        text_scales in proptest::collection::vec(0.01..100.0f64, 6),
        feat_scales in proptest::collection::vec(0.01..100.0f64, 6),
    ) {
        use rand::Rng;
        let mut rng = seeded(seed, 400);
        let text = Matrix::from_fn(b, 4, |_, _| rng.random_range(-1.0..1.0));
        let feats = Matrix::from_fn(b, 5, |_, _| rng.random_range(-1.0..1.0));
        let w = AlignmentMatrix::init(4, 5, &mut rng);
        let base = align_scores(&w, &text, &feats).unwrap();
        let scaled = align_scores(&w, &scale_rows(&text, &text_scales), &scale_rows(&feats, &feat_scales)).unwrap();
        prop_assert!(base.max_abs_diff(&scaled) < 1e-9);
        prop_assert!(base.as_slice().iter().all(|s| (-1.0 - 1e-12..=1.0 + 1e-12).contains(s)));
    }

    #[test]
    fn pca_components_are_orthonormal_and_sorted(x in matrix(3..15, 2..7), k_pick in 0usize..7) {
        let k = 1 + k_pick % x.cols().min(x.rows() - 1);
        let model = pca_fit(&x, k).unwrap();
        let gram = model.components.matmul_t(&model.components).unwrap();
        prop_assert!(gram.max_abs_diff(&Matrix::identity(k)) < 1e-9);
        prop_assert!(model.variances.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(model.variances.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn eval_forward_is_a_pure_function(seed in 0u64..1000, rows in 1usize..20) {
        let (ds, _) = generate_synthetic(&SyntheticSpec { n_samples: 40, seed, ..SyntheticSpec::default() }).unwrap();
        let cfg = TrainConfig { seed, ..TrainConfig::desk_stage1() };
        let spec = cfg.model_spec(ds.manifest.d_img, ds.manifest.d_text);
        let model = EncodingModel::initialize(&spec, &ds.voxel_targets, seed).unwrap();
        let idx: Vec<usize> = (0..rows).collect();
        let x = ds.image_features.select_rows(&idx).unwrap();
        let a = model.predict(&x).unwrap();
        let b = model.predict(&x).unwrap();
        prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
