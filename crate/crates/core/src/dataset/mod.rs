//! Aligned image-feature / text-embedding / voxel-target datasets, the
//! train/val/test split, vertex padding and the synthetic latent-linear
//! generator used as a ground-truth oracle.

mod pad;
mod split;
mod synthetic;

pub use pad::pad_vertices;
pub use split::{split_dataset, Split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticGroundTruth, SyntheticSpec};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{dim_check, Error, Result};
use crate::linalg::Matrix;

/// ROI label given to vertices that belong to no region (e.g. padding).
pub const UNKNOWN_ROI: &str = "unknown";

/// Storage width of floating-point values in interchange files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u32", into = "u32"))]
pub enum ValueWidth {
    F32,
    #[default]
    F64,
}

impl ValueWidth {
    pub fn bytes(self) -> usize {
        match self {
            ValueWidth::F32 => 4,
            ValueWidth::F64 => 8,
        }
    }

    /// Rounds `v` to the nearest value representable at this width.
    pub fn quantize(self, v: f64) -> f64 {
        match self {
            ValueWidth::F32 => v as f32 as f64,
            ValueWidth::F64 => v,
        }
    }
}

impl TryFrom<u32> for ValueWidth {
    type Error = String;

    fn try_from(bits: u32) -> core::result::Result<Self, String> {
        match bits {
            32 => Ok(ValueWidth::F32),
            64 => Ok(ValueWidth::F64),
            other => Err(format!("value_width must be 32 or 64, got {other}")),
        }
    }
}

impl From<ValueWidth> for u32 {
    fn from(w: ValueWidth) -> u32 {
        match w {
            ValueWidth::F32 => 32,
            ValueWidth::F64 => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DatasetManifest {
    pub n_samples: usize,
    pub d_img: usize,
    pub d_text: usize,
    pub n_vertices: usize,
    pub value_width: ValueWidth,
    pub roi_names: Vec<String>,
    pub subject_id: String,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_samples", self.n_samples),
            ("d_img", self.d_img),
            ("d_text", self.d_text),
            ("n_vertices", self.n_vertices),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("manifest field {name} must be >= 1")));
            }
        }
        if self.roi_names.is_empty() {
            return Err(Error::Validation("manifest roi_names must not be empty".into()));
        }
        let unique: BTreeSet<&str> = self.roi_names.iter().map(String::as_str).collect();
        if unique.len() != self.roi_names.len() {
            return Err(Error::Validation("manifest roi_names must be unique".into()));
        }
        Ok(())
    }
}

/// Aligned samples plus per-vertex metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// n x d_img inputs to the extractor.
    pub image_features: Matrix,
    /// n x d_text caption embeddings.
    pub text_embeddings: Matrix,
    /// n x n_vertices measured responses.
    pub voxel_targets: Matrix,
    pub noise_ceiling: Vec<f64>,
    /// Index into `manifest.roi_names` for each vertex.
    pub roi_labels: Vec<u32>,
}

impl Dataset {
    /// Assembles and validates a dataset.
    pub fn new(
        manifest: DatasetManifest,
        image_features: Matrix,
        text_embeddings: Matrix,
        voxel_targets: Matrix,
        noise_ceiling: Vec<f64>,
        roi_labels: Vec<u32>,
    ) -> Result<Self> {
        let ds = Self {
            manifest,
            image_features,
            text_embeddings,
            voxel_targets,
            noise_ceiling,
            roi_labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        m.validate()?;
        let n = m.n_samples;
        dim_check("image_features rows", n, self.image_features.rows())?;
        dim_check("image_features cols", m.d_img, self.image_features.cols())?;
        dim_check("text_embeddings rows", n, self.text_embeddings.rows())?;
        dim_check("text_embeddings cols", m.d_text, self.text_embeddings.cols())?;
        dim_check("voxel_targets rows", n, self.voxel_targets.rows())?;
        dim_check("voxel_targets cols", m.n_vertices, self.voxel_targets.cols())?;
        dim_check("noise_ceiling length", m.n_vertices, self.noise_ceiling.len())?;
        dim_check("roi_labels length", m.n_vertices, self.roi_labels.len())?;
        for (name, mat) in [
            ("image_features", &self.image_features),
            ("text_embeddings", &self.text_embeddings),
            ("voxel_targets", &self.voxel_targets),
        ] {
            if !mat.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
        if let Some(j) = self.noise_ceiling.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!(
                "noise_ceiling[{j}] = {} outside [0, 1]",
                self.noise_ceiling[j]
            )));
        }
        if let Some(j) = self
            .roi_labels
            .iter()
            .position(|&l| l as usize >= m.roi_names.len())
        {
            return Err(Error::Validation(format!(
                "roi_labels[{j}] = {} is not a valid roi index",
                self.roi_labels[j]
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.manifest.n_samples
    }

    pub fn n_vertices(&self) -> usize {
        self.manifest.n_vertices
    }

    /// The rows listed in `indices`, as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Precondition("subset needs at least one row".into()));
        }
        let mut manifest = self.manifest.clone();
        manifest.n_samples = indices.len();
        Ok(Self {
            manifest,
            image_features: self.image_features.select_rows(indices)?,
            text_embeddings: self.text_embeddings.select_rows(indices)?,
            voxel_targets: self.voxel_targets.select_rows(indices)?,
            noise_ceiling: self.noise_ceiling.clone(),
            roi_labels: self.roi_labels.clone(),
        })
    }

    /// Rounds every stored value to the manifest's declared width.
    pub fn quantize_to_width(&mut self) {
        let w = self.manifest.value_width;
        for m in [
            &mut self.image_features,
            &mut self.text_embeddings,
            &mut self.voxel_targets,
        ] {
            m.as_mut_slice().iter_mut().for_each(|v| *v = w.quantize(*v));
        }
        self.noise_ceiling.iter_mut().for_each(|v| *v = w.quantize(*v));
    }
}
