//! Forward pass and hand-derived reverse pass of the full training loss.

use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{pca_reconstruct, Matrix};
use crate::losses::{alignment_loss, alignment_row_losses, mse_loss, AlignConfig, Gradients, PRED, SCORES};
use crate::model::align::normalize_rows;
use crate::model::extractor::ExtractorTrace;
use crate::model::head::{apply_mask, dropout_mask};
use crate::model::{
    block_bias_name, block_weight_name, EncodingModel, FreezeMask, Mode, ALIGN_WEIGHT, HEAD_BIAS,
    HEAD_WEIGHT,
};

/// Aligned rows of one minibatch.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub inputs: &'a Matrix,
    pub text: &'a Matrix,
    pub targets: &'a Matrix,
}

/// `L = L_mse + lambda * L_alignment`; the alignment term is skipped entirely
/// when `lambda == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub align: AlignConfig,
}

impl Objective {
    pub fn mse_only() -> Self {
        Self {
            align: AlignConfig::new(1.0, 0.0),
        }
    }

    fn uses_alignment(&self) -> bool {
        self.align.lambda > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub mse: f64,
    /// `None` when the objective has `lambda == 0`.
    pub alignment: Option<f64>,
    pub total: f64,
}

struct AlignState {
    text_hat: Matrix,
    aligned_hat: Matrix,
    aligned_norms: Vec<f64>,
    score_grad: Matrix,
}

struct ForwardState {
    trace: ExtractorTrace,
    features: Matrix,
    mask: Option<Matrix>,
    dropped: Matrix,
    pred_grad: Matrix,
    align: Option<AlignState>,
    breakdown: LossBreakdown,
    scores: Option<Matrix>,
    pred: Matrix,
}

fn forward(model: &EncodingModel, batch: Batch<'_>, objective: &Objective, mode: Mode<'_>) -> Result<ForwardState> {
    objective.align.validate()?;
    let b = batch.inputs.rows();
    dim_check("batch text rows", b, batch.text.rows())?;
    dim_check("batch target rows", b, batch.targets.rows())?;
    dim_check("batch target width", model.n_vertices(), batch.targets.cols())?;

    let (trace, features) = model.extractor.forward_traced(batch.inputs)?;
    let head = &model.head;
    let mask = match mode {
        Mode::Train(rng) if head.dropout_rate > 0.0 => {
            Some(dropout_mask(b, features.cols(), head.dropout_rate, rng))
        }
        _ => None,
    };
    let dropped = match &mask {
        Some(m) => apply_mask(&features, m),
        None => features.clone(),
    };
    let pred = pca_reconstruct(&head.output_stage, &head.coefficients(&dropped)?)?;
    let mse = mse_loss(&pred, batch.targets)?;
    let pred_grad = mse.gradients.get(PRED).cloned().expect("mse gradient present");

    let mut breakdown = LossBreakdown {
        mse: mse.value,
        alignment: None,
        total: mse.value,
    };
    let mut align_scores = None;
    let align = if objective.uses_alignment() {
        dim_check("batch text width", model.align.weight.rows(), batch.text.cols())?;
        let (text_hat, _) = normalize_rows(batch.text, "text embedding")?;
        let (aligned_hat, aligned_norms) =
            normalize_rows(&features.matmul_t(&model.align.weight)?, "aligned image feature")?;
        let scores = text_hat.matmul_t(&aligned_hat)?;
        let loss = alignment_loss(&scores, &objective.align)?;
        align_scores = Some(scores);
        breakdown.alignment = Some(loss.value);
        breakdown.total += objective.align.lambda * loss.value;
        let score_grad = loss
            .gradients
            .get(SCORES)
            .expect("alignment gradient present")
            .scale(objective.align.lambda);
        Some(AlignState {
            text_hat,
            aligned_hat,
            aligned_norms,
            score_grad,
        })
    } else {
        None
    };
    if !breakdown.total.is_finite() {
        return Err(Error::Diverged("non-finite training loss".into()));
    }
    Ok(ForwardState {
        trace,
        features,
        mask,
        dropped,
        pred_grad,
        align,
        breakdown,
        scores: align_scores,
        pred,
    })
}

/// Loss of one batch without gradients.
pub fn loss_value(model: &EncodingModel, batch: Batch<'_>, objective: &Objective, mode: Mode<'_>) -> Result<LossBreakdown> {
    Ok(forward(model, batch, objective, mode)?.breakdown)
}

/// The summands of the total loss: one weighted squared error per
/// prediction entry, then one weighted InfoNCE term per batch row.
///
/// Their sum equals [`loss_value`]'s total up to summation order. Differencing
/// two term lists entry by entry before summing keeps finite differences far
/// below the rounding of the summed loss.
pub fn loss_terms(model: &EncodingModel, batch: Batch<'_>, objective: &Objective, mode: Mode<'_>) -> Result<Vec<f64>> {
    let state = forward(model, batch, objective, mode)?;
    let count = (state.pred.rows() * state.pred.cols()).max(1) as f64;
    let mut terms: Vec<f64> = state
        .pred
        .as_slice()
        .iter()
        .zip(batch.targets.as_slice())
        .map(|(p, t)| (p - t) * (p - t) / count)
        .collect();
    if let Some(scores) = &state.scores {
        let cfg = &objective.align;
        let b = scores.rows() as f64;
        let rows = alignment_row_losses(scores, cfg.tau);
        if cfg.symmetric {
            let cols = alignment_row_losses(&scores.transpose(), cfg.tau);
            terms.extend(rows.iter().zip(&cols).map(|(r, c)| cfg.lambda * 0.5 * (r + c) / b));
        } else {
            terms.extend(rows.iter().map(|r| cfg.lambda * r / b));
        }
    }
    Ok(terms)
}

/// Loss of one batch and its gradient for every trainable tensor.
///
/// With `mask`, backpropagation stops below the first extractor block that
/// has a trainable tensor; gradients of the blocks beneath are reported as
/// zeros, which is what freezing would leave anyway.
pub fn loss_and_gradients(
    model: &EncodingModel,
    batch: Batch<'_>,
    objective: &Objective,
    mode: Mode<'_>,
    mask: Option<&FreezeMask>,
) -> Result<(LossBreakdown, Gradients)> {
    let state = forward(model, batch, objective, mode)?;
    let head = &model.head;
    let mut grads = Gradients::new();

    // voxel head: v = (dropped P^T + p) C + mean
    let coeff_grad = state.pred_grad.matmul_t(&head.output_stage.components)?;
    grads.insert(HEAD_WEIGHT, coeff_grad.t_matmul(&state.dropped)?);
    grads.insert(
        HEAD_BIAS,
        Matrix::from_vec(1, coeff_grad.cols(), coeff_grad.column_sums())?,
    );
    let mut feature_grad = coeff_grad.matmul(&head.projection_weight)?;
    if let Some(m) = &state.mask {
        feature_grad = apply_mask(&feature_grad, m);
    }

    // alignment: s = T_hat U_hat^T, U_hat = normalize(F W^T)
    match &state.align {
        Some(a) => {
            let unit_grad = a.score_grad.t_matmul(&a.text_hat)?;
            let mut raw_grad = Matrix::zeros(unit_grad.rows(), unit_grad.cols());
            for j in 0..unit_grad.rows() {
                let u = a.aligned_hat.row(j);
                let du = unit_grad.row(j);
                let radial: f64 = u.iter().zip(du).map(|(x, y)| x * y).sum();
                let norm = a.aligned_norms[j];
                for ((g, &x), &y) in raw_grad.row_mut(j).iter_mut().zip(u).zip(du) {
                    *g = (y - x * radial) / norm;
                }
            }
            grads.insert(ALIGN_WEIGHT, raw_grad.t_matmul(&state.features)?);
            feature_grad = feature_grad.add(&raw_grad.matmul(&model.align.weight)?)?;
        }
        None => grads.insert(
            ALIGN_WEIGHT,
            Matrix::zeros(model.align.weight.rows(), model.align.weight.cols()),
        ),
    }

    extractor_backward(model, &state.trace, &feature_grad, mask, &mut grads)?;
    if !grads.all_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    Ok((state.breakdown, grads))
}

fn extractor_backward(
    model: &EncodingModel,
    trace: &ExtractorTrace,
    feature_grad: &Matrix,
    mask: Option<&FreezeMask>,
    grads: &mut Gradients,
) -> Result<()> {
    let ex = &model.extractor;
    let n_blocks = ex.blocks.len();
    let depth = trace.outputs.len();
    let stop = match mask {
        Some(m) => m.first_trainable_block(n_blocks).unwrap_or(n_blocks),
        None => 0,
    };

    for (i, b) in ex.blocks.iter().enumerate() {
        grads.insert(block_weight_name(i), Matrix::zeros(b.weight.rows(), b.weight.cols()));
        grads.insert(block_bias_name(i), Matrix::zeros(1, b.bias.len()));
    }
    if stop >= depth {
        return Ok(());
    }

    let mut out_grads: Vec<Matrix> = trace.outputs.iter().map(|o| Matrix::zeros(o.rows(), o.cols())).collect();
    for (&t, offset) in ex.taps.iter().zip(ex.tap_offsets()) {
        let width = ex.blocks[t].output_dim();
        out_grads[t] = out_grads[t].add(&feature_grad.column_block(offset, width))?;
    }
    for l in (stop..depth).rev() {
        let block = &ex.blocks[l];
        let act = block.activation;
        let pre = &trace.pre[l];
        let mut dz = out_grads[l].clone();
        for (g, &z) in dz.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            *g *= act.derivative(z);
        }
        grads.insert(block_weight_name(l), dz.t_matmul(&trace.inputs[l])?);
        grads.insert(block_bias_name(l), Matrix::from_vec(1, dz.cols(), dz.column_sums())?);
        if l > stop {
            let below = dz.matmul(&block.weight)?;
            out_grads[l - 1] = out_grads[l - 1].add(&below)?;
        }
    }
    Ok(())
}
