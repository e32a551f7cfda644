use vem_core::dataset::{generate_synthetic, split_dataset, Dataset, Split, SplitSpec, SyntheticSpec};
use vem_core::linalg::Matrix;
use vem_core::losses::{alignment_loss, check_gradient_terms, mse_loss, total_loss, GradCheckOptions, PRED, SCORES};
use vem_core::model::{align_scores, loss_terms, loss_value, Mode, ALIGN_WEIGHT, HEAD_BIAS, HEAD_WEIGHT};
use vem_core::trainer::{GradProbe, TrainConfig};

fn benchmark() -> (Dataset, Split) {
    let (ds, _) = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let split = split_dataset(&ds, &SplitSpec::default()).unwrap();
    (ds, split)
}

#[test]
fn both_stage_objectives_pass_at_batch_eight() {
    let (ds, split) = benchmark();
    for cfg in [TrainConfig::desk_stage1(), TrainConfig::desk_stage2()] {
        let probe = GradProbe::new(&cfg, &ds, &split, 8, 0).unwrap();
        let report = probe.check(&probe.analytic().unwrap(), &GradCheckOptions::default()).unwrap();
        assert!(!report.tensors.is_empty());
        for t in &report.tensors {
            assert!(t.max_relative_error < 1e-5, "stage {} {}: {:e}", cfg.stage, t.name, t.max_relative_error);
            assert!(t.coordinates_checked >= 200.min(probe.model.tensors().iter().find(|x| x.name == t.name).unwrap().data.len()));
        }
    }
}

#[test]
fn frozen_tensors_are_left_out_of_the_report() {
    let (ds, split) = benchmark();
    let probe = GradProbe::new(&TrainConfig::desk_stage1(), &ds, &split, 8, 0).unwrap();
    let report = probe.check(&probe.analytic().unwrap(), &GradCheckOptions::default()).unwrap();
    let mut names: Vec<&str> = report.tensors.iter().map(|t| t.name.as_str()).collect();
    names.sort();
    assert_eq!(names, [HEAD_BIAS, HEAD_WEIGHT]);

    let probe = GradProbe::new(&TrainConfig::desk_stage2(), &ds, &split, 8, 0).unwrap();
    let report = probe.check(&probe.analytic().unwrap(), &GradCheckOptions::default()).unwrap();
    let names: Vec<&str> = report.tensors.iter().map(|t| t.name.as_str()).collect();
    assert!(names.contains(&ALIGN_WEIGHT));
    assert!(!names.contains(&HEAD_WEIGHT));
    assert!(!names.iter().any(|n| n.starts_with("extractor.blocks.0.")));
}

#[test]
fn corrupted_gradient_is_caught() {
    let (ds, split) = benchmark();
    let probe = GradProbe::new(&TrainConfig::desk_stage2(), &ds, &split, 8, 0).unwrap();
    let mut grads = probe.analytic().unwrap();
    let w = grads.get_mut(ALIGN_WEIGHT).unwrap();
    *w = w.scale(1.001);
    let report = probe.check(&grads, &GradCheckOptions::default()).unwrap();
    let failed: Vec<&str> = report.failures(1e-5).iter().map(|t| t.name.as_str()).collect();
    assert_eq!(failed, [ALIGN_WEIGHT]);
}

#[test]
fn single_row_batch_still_passes() {
    let (ds, split) = benchmark();
    let probe = GradProbe::new(&TrainConfig::desk_stage2(), &ds, &split, 1, 0).unwrap();
    let report = probe.check(&probe.analytic().unwrap(), &GradCheckOptions::default()).unwrap();
    assert!(report.max_relative_error() < 1e-5, "{:e}", report.max_relative_error());
}

#[test]
fn summands_add_up_to_the_loss() {
    let (ds, split) = benchmark();
    for cfg in [TrainConfig::desk_stage1(), TrainConfig::desk_stage2(), TrainConfig { symmetric_alignment: true, ..TrainConfig::desk_stage2() }] {
        let probe = GradProbe::new(&cfg, &ds, &split, 8, 0).unwrap();
        let terms = loss_terms(&probe.model, probe.batch(), &probe.objective, Mode::Eval).unwrap();
        let total = loss_value(&probe.model, probe.batch(), &probe.objective, Mode::Eval).unwrap().total;
        assert!((terms.iter().sum::<f64>() - total).abs() < 1e-14 * total.abs().max(1.0));
    }
}

/// The full stage-2 objective as a function of its direct inputs: the voxel
/// predictions and the alignment score matrix of a B=8 synthetic batch.
#[test]
fn stage2_loss_inputs_match_central_differences() {
    let (ds, split) = benchmark();
    let cfg = TrainConfig::desk_stage2();
    let probe = GradProbe::new(&cfg, &ds, &split, 8, 0).unwrap();
    let batch = probe.batch();
    let pred = probe.model.predict(batch.inputs).unwrap();
    let features = probe.model.extractor.forward(batch.inputs).unwrap();
    let scores = align_scores(&probe.model.align, batch.text, &features).unwrap();
    let align_cfg = cfg.align_config();

    let (b, v) = pred.shape();
    let params: Vec<f64> = pred.as_slice().iter().chain(scores.as_slice()).copied().collect();
    let split_params = |theta: &[f64]| {
        (
            Matrix::from_vec(b, v, theta[..b * v].to_vec()).unwrap(),
            Matrix::from_vec(b, b, theta[b * v..].to_vec()).unwrap(),
        )
    };
    let total = |theta: &[f64]| {
        let (p, s) = split_params(theta);
        total_loss(&mse_loss(&p, batch.targets).unwrap(), &alignment_loss(&s, &align_cfg).unwrap(), &align_cfg).unwrap()
    };
    let combined = total(&params);
    let analytic: Vec<f64> = combined
        .gradients
        .get(PRED)
        .unwrap()
        .as_slice()
        .iter()
        .chain(combined.gradients.get(SCORES).unwrap().as_slice())
        .copied()
        .collect();
    let coords: Vec<usize> = (0..params.len()).collect();
    let count = (b * v) as f64;
    let err = check_gradient_terms(&params, &analytic, &coords, 1e-5, |theta| {
        let (p, s) = split_params(theta);
        let mut terms: Vec<f64> =
            p.as_slice().iter().zip(batch.targets.as_slice()).map(|(x, y)| (x - y) * (x - y) / count).collect();
        terms.push(align_cfg.lambda * alignment_loss(&s, &align_cfg).unwrap().value);
        Ok(terms)
    })
    .unwrap();
    assert!(err < 1e-6, "{err:e}");
}
