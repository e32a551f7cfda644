//! Ground-truth sidecar written next to generated datasets.
//!
//! `ground_truth.json` holds the generating [`SyntheticSpec`] and the analytic
//! noise ceilings; the loading matrices and latents are 64-bit little-endian
//! row-major blobs (`gt_image_loadings.bin` d_img x r, `gt_text_loadings.bin`
//! d_text x r, `gt_voxel_loadings.bin` n_vertices x r, `gt_latents.bin` n x r).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vem_core::dataset::{SyntheticGroundTruth, SyntheticSpec, ValueWidth};
use vem_core::linalg::Matrix;

use crate::blob;
use crate::error::{io_err, parse_err, Error, Result};

pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const IMAGE_LOADINGS: &str = "gt_image_loadings.bin";
pub const TEXT_LOADINGS: &str = "gt_text_loadings.bin";
pub const VOXEL_LOADINGS: &str = "gt_voxel_loadings.bin";
pub const LATENTS: &str = "gt_latents.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    spec: SyntheticSpec,
    noise_ceiling: Vec<f64>,
}

pub fn write_ground_truth(spec: &SyntheticSpec, gt: &SyntheticGroundTruth, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let sidecar = Sidecar {
        spec: spec.clone(),
        noise_ceiling: gt.noise_ceiling.clone(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    blob::write(&dir.join(GROUND_TRUTH), text.as_bytes())?;
    for (name, m) in [
        (IMAGE_LOADINGS, &gt.image_loadings),
        (TEXT_LOADINGS, &gt.text_loadings),
        (VOXEL_LOADINGS, &gt.voxel_loadings),
        (LATENTS, &gt.latents),
    ] {
        blob::write(&dir.join(name), &blob::encode_f64s(m.as_slice(), ValueWidth::F64))?;
    }
    Ok(())
}

pub fn load_ground_truth(dir: &Path) -> Result<(SyntheticSpec, SyntheticGroundTruth)> {
    let path = dir.join(GROUND_TRUTH);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| parse_err(&path, e))?;
    let spec = sidecar.spec;
    spec.validate().map_err(|source| Error::Invalid { path: path.clone(), source })?;
    if sidecar.noise_ceiling.len() != spec.n_vertices {
        return Err(parse_err(&path, "noise_ceiling length differs from n_vertices"));
    }
    let r = spec.latent_dim;
    let matrix = |name: &str, rows: usize| -> Result<Matrix> {
        let p = dir.join(name);
        let values = blob::read_f64s(&p, rows * r, ValueWidth::F64)?;
        Matrix::from_vec(rows, r, values).map_err(|source| Error::Invalid { path: p, source })
    };
    let gt = SyntheticGroundTruth {
        image_loadings: matrix(IMAGE_LOADINGS, spec.d_img)?,
        text_loadings: matrix(TEXT_LOADINGS, spec.d_text)?,
        voxel_loadings: matrix(VOXEL_LOADINGS, spec.n_vertices)?,
        latents: matrix(LATENTS, spec.n_samples)?,
        noise_ceiling: sidecar.noise_ceiling,
    };
    Ok((spec, gt))
}
