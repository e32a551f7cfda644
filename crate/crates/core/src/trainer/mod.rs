//! Two-stage training: stage 1 fits the voxel head under MSE with a frozen
//! extractor; stage 2 resumes from the best stage-1 checkpoint and fine-tunes
//! the last extractor blocks and the alignment matrix under
//! `L_mse + lambda * L_alignment`. Also hosts the optimizer, the lambda
//! ablation runner and the gradient-check probe.

mod ablation;
mod config;
mod optim;
mod probe;
mod stages;

pub use ablation::{run_lambda_ablation, AblationReport, AblationRow};
pub use config::{Stage, TrainConfig};
pub use optim::{AdamW, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use probe::GradProbe;
pub use stages::{train_stage1, train_stage2, validation_score, EpochLog, NoopObserver, TrainObserver, TrainRecord};
