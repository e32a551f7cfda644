//! The dataset directory format.
//!
//! ```text
//! manifest.json         DatasetManifest as JSON
//! features.bin          n x d_img       floats
//! text_embeddings.bin   n x d_text      floats
//! voxels.bin            n x n_vertices  floats
//! noise_ceiling.bin     n_vertices      floats
//! roi_labels.bin        n_vertices      u32
//! ```
//!
//! Everything is little-endian and row-major; floats use the manifest's
//! `value_width` (32 or 64 bits). File sizes must match exactly.

use std::fs;
use std::path::Path;

use vem_core::dataset::{Dataset, DatasetManifest};
use vem_core::linalg::Matrix;

use crate::blob;
use crate::error::{io_err, parse_err, Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const FEATURES: &str = "features.bin";
pub const TEXT_EMBEDDINGS: &str = "text_embeddings.bin";
pub const VOXELS: &str = "voxels.bin";
pub const NOISE_CEILING: &str = "noise_ceiling.bin";
pub const ROI_LABELS: &str = "roi_labels.bin";

/// All files of a dataset directory, manifest first.
pub const FILES: [&str; 6] = [MANIFEST, FEATURES, TEXT_EMBEDDINGS, VOXELS, NOISE_CEILING, ROI_LABELS];

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| parse_err(&path, e))?;
    manifest.validate().map_err(|source| Error::Invalid { path, source })?;
    Ok(manifest)
}

pub fn manifest_json(manifest: &DatasetManifest) -> String {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    text
}

/// Reads and validates a dataset directory. 32-bit files are widened.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let n = manifest.n_samples;
    let width = manifest.value_width;
    let matrix = |name: &str, cols: usize| -> Result<Matrix> {
        let path = dir.join(name);
        let values = blob::read_f64s(&path, n * cols, width)?;
        Matrix::from_vec(n, cols, values).map_err(|source| Error::Invalid { path, source })
    };
    let image_features = matrix(FEATURES, manifest.d_img)?;
    let text_embeddings = matrix(TEXT_EMBEDDINGS, manifest.d_text)?;
    let voxel_targets = matrix(VOXELS, manifest.n_vertices)?;

    let nc_path = dir.join(NOISE_CEILING);
    let noise_ceiling = blob::read_f64s(&nc_path, manifest.n_vertices, width)?;
    if let Some(j) = noise_ceiling.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(parse_err(&nc_path, format!("value {} at vertex {j} is outside [0, 1]", noise_ceiling[j])));
    }
    let roi_path = dir.join(ROI_LABELS);
    let roi_labels = blob::read_u32s(&roi_path, manifest.n_vertices)?;
    if let Some(j) = roi_labels.iter().position(|&l| l as usize >= manifest.roi_names.len()) {
        return Err(parse_err(
            &roi_path,
            format!("label {} at vertex {j} has no entry in roi_names", roi_labels[j]),
        ));
    }
    Dataset::new(manifest, image_features, text_embeddings, voxel_targets, noise_ceiling, roi_labels).map_err(|source| {
        Error::Invalid {
            path: dir.to_path_buf(),
            source,
        }
    })
}

/// Writes `ds` as a dataset directory, creating it if needed. Values are
/// stored at the manifest's width.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let width = ds.manifest.value_width;
    blob::write(&dir.join(MANIFEST), manifest_json(&ds.manifest).as_bytes())?;
    blob::write(&dir.join(FEATURES), &blob::encode_f64s(ds.image_features.as_slice(), width))?;
    blob::write(&dir.join(TEXT_EMBEDDINGS), &blob::encode_f64s(ds.text_embeddings.as_slice(), width))?;
    blob::write(&dir.join(VOXELS), &blob::encode_f64s(ds.voxel_targets.as_slice(), width))?;
    blob::write(&dir.join(NOISE_CEILING), &blob::encode_f64s(&ds.noise_ceiling, width))?;
    blob::write(&dir.join(ROI_LABELS), &blob::encode_u32s(&ds.roi_labels))?;
    Ok(())
}
