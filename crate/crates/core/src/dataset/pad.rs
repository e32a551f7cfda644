use alloc::format;
use alloc::string::ToString;
use alloc::vec;

use crate::dataset::{Dataset, UNKNOWN_ROI};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Scatters the vertices of `ds` into a wider vertex space.
///
/// Vertex `j` of the input lands at column `vertex_map[j]`. Columns that no
/// input vertex maps to hold zeros, get noise ceiling 0 and the
/// [`UNKNOWN_ROI`] label (appended to the ROI list if missing).
pub fn pad_vertices(ds: &Dataset, target_vertex_count: usize, vertex_map: &[usize]) -> Result<Dataset> {
    let v = ds.n_vertices();
    if vertex_map.len() != v {
        return Err(Error::Validation(format!(
            "vertex map has {} entries for {v} vertices",
            vertex_map.len()
        )));
    }
    if target_vertex_count < v {
        return Err(Error::Precondition(format!(
            "target vertex count {target_vertex_count} is below the current {v}"
        )));
    }
    let mut seen = vec![false; target_vertex_count];
    for (j, &dst) in vertex_map.iter().enumerate() {
        if dst >= target_vertex_count {
            return Err(Error::Validation(format!(
                "vertex {j} maps to {dst}, outside 0..{target_vertex_count}"
            )));
        }
        if core::mem::replace(&mut seen[dst], true) {
            return Err(Error::Validation(format!("vertex map is not injective at target {dst}")));
        }
    }

    let mut manifest = ds.manifest.clone();
    let has_gaps = seen.iter().any(|s| !s);
    let unknown = match manifest.roi_names.iter().position(|n| n == UNKNOWN_ROI) {
        Some(i) => i,
        None if has_gaps => {
            manifest.roi_names.push(UNKNOWN_ROI.to_string());
            manifest.roi_names.len() - 1
        }
        None => 0,
    } as u32;
    manifest.n_vertices = target_vertex_count;

    let n = ds.n_samples();
    let mut voxels = Matrix::zeros(n, target_vertex_count);
    for i in 0..n {
        let src = ds.voxel_targets.row(i);
        let dst = voxels.row_mut(i);
        for (j, &col) in vertex_map.iter().enumerate() {
            dst[col] = src[j];
        }
    }
    let mut noise_ceiling = vec![0.0; target_vertex_count];
    let mut roi_labels = vec![unknown; target_vertex_count];
    for (j, &col) in vertex_map.iter().enumerate() {
        noise_ceiling[col] = ds.noise_ceiling[j];
        roi_labels[col] = ds.roi_labels[j];
    }
    Dataset::new(
        manifest,
        ds.image_features.clone(),
        ds.text_embeddings.clone(),
        voxels,
        noise_ceiling,
        roi_labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn small() -> Dataset {
        let spec = SyntheticSpec {
            n_samples: 6,
            n_vertices: 2,
            ..SyntheticSpec::default()
        };
        generate_synthetic(&spec).unwrap().0
    }

    #[test]
    fn identity_map_is_a_no_op() {
        let ds = small();
        assert_eq!(pad_vertices(&ds, 2, &[0, 1]).unwrap(), ds);
    }

    #[test]
    fn gaps_are_zero_with_unknown_label() {
        let ds = small();
        let padded = pad_vertices(&ds, 4, &[0, 3]).unwrap();
        assert_eq!(padded.n_vertices(), 4);
        for i in 0..6 {
            assert_eq!(padded.voxel_targets.get(i, 1), 0.0);
            assert_eq!(padded.voxel_targets.get(i, 2), 0.0);
            assert_eq!(padded.voxel_targets.get(i, 3), ds.voxel_targets.get(i, 1));
        }
        assert_eq!(padded.noise_ceiling[1], 0.0);
        assert_eq!(padded.noise_ceiling[2], 0.0);
        let unknown = padded.manifest.roi_names.iter().position(|n| n == UNKNOWN_ROI).unwrap();
        assert_eq!(padded.roi_labels[1] as usize, unknown);
    }

    #[test]
    fn rejects_non_injective_map() {
        let ds = small();
        assert!(matches!(pad_vertices(&ds, 4, &[1, 1]), Err(Error::Validation(_))));
        assert!(matches!(pad_vertices(&ds, 4, &[0, 4]), Err(Error::Validation(_))));
        assert!(matches!(pad_vertices(&ds, 1, &[0, 1]), Err(Error::Precondition(_)) | Err(Error::Validation(_))));
    }
}
