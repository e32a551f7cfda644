//! Numerical core for two-stage visual encoding models with image-text alignment.
//!
//! Stage 1 fits a voxel-mapping head (trainable projection followed by a fixed
//! PCA output stage) under mean squared error while the feature extractor stays
//! frozen. Stage 2 resumes from the best stage-1 checkpoint, unfreezes the last
//! extractor blocks together with an alignment matrix, and optimizes
//! `L = L_mse + lambda * L_alignment`, where `L_alignment` is an InfoNCE loss
//! between text embeddings and aligned image features.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and anything
//! touching the filesystem live in the companion `vem` crate.

#![no_std]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::Matrix;
