//! Dense linear algebra: the [`Matrix`] carrier, a symmetric eigensolver,
//! PCA and Pearson correlation.

mod eigen;
mod matrix;
mod pca;
mod stats;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::Matrix;
pub use pca::{pca_fit, pca_project, pca_reconstruct, PcaModel};
pub use stats::{mean, pearson_corr};
