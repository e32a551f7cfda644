//! Checkpoint directories.
//!
//! ```text
//! checkpoint.json     schema version, stage, epoch, best score, config,
//!                     rng state, layout and the tensor table
//! <tensor>.bin        one 64-bit little-endian row-major blob per tensor
//! ```
//!
//! The tensor table lists every trainable tensor followed by the PCA output
//! stage (`pca.mean`, `pca.components`, `pca.variances`), each with its shape
//! and SHA-256. Writes go to a temporary sibling directory that is renamed
//! into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vem_core::dataset::ValueWidth;
use vem_core::linalg::{Matrix, PcaModel};
use vem_core::model::{
    block_bias_name, block_weight_name, Activation, AlignmentMatrix, Block, Checkpoint, EncodingModel,
    ExtractorParams, VoxelHead, ALIGN_WEIGHT, HEAD_BIAS, HEAD_WEIGHT,
};
use vem_core::rng::RngState;
use vem_core::trainer::{Stage, TrainConfig};

use crate::blob;
use crate::error::{io_err, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "checkpoint.json";
pub const PCA_MEAN: &str = "pca.mean";
pub const PCA_COMPONENTS: &str = "pca.components";
pub const PCA_VARIANCES: &str = "pca.variances";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    width: u32,
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorLayout {
    input_dim: usize,
    taps: Vec<usize>,
    activations: Vec<Activation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    stage: Stage,
    epoch: usize,
    best_val_m: f64,
    config: TrainConfig,
    rng_state: RngState,
    extractor: ExtractorLayout,
    head_dropout_rate: f64,
    tensors: Vec<TensorEntry>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn named_tensors(model: &EncodingModel) -> Vec<(String, [usize; 2], &[f64])> {
    let mut out = Vec::new();
    for (i, b) in model.extractor.blocks.iter().enumerate() {
        out.push((block_weight_name(i), [b.weight.rows(), b.weight.cols()], b.weight.as_slice()));
        out.push((block_bias_name(i), [1, b.bias.len()], &b.bias[..]));
    }
    let h = &model.head;
    out.push((HEAD_WEIGHT.to_string(), [h.projection_weight.rows(), h.projection_weight.cols()], h.projection_weight.as_slice()));
    out.push((HEAD_BIAS.to_string(), [1, h.projection_bias.len()], &h.projection_bias[..]));
    out.push((ALIGN_WEIGHT.to_string(), [model.align.weight.rows(), model.align.weight.cols()], model.align.weight.as_slice()));
    let pca = &h.output_stage;
    out.push((PCA_MEAN.to_string(), [1, pca.mean.len()], &pca.mean[..]));
    out.push((PCA_COMPONENTS.to_string(), [pca.components.rows(), pca.components.cols()], pca.components.as_slice()));
    out.push((PCA_VARIANCES.to_string(), [1, pca.variances.len()], &pca.variances[..]));
    out
}

fn manifest_text(m: &Manifest) -> String {
    let mut text = serde_json::to_string_pretty(m).expect("checkpoint manifest serializes");
    text.push('\n');
    text
}

fn write_contents(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for (name, shape, data) in named_tensors(&ckpt.model) {
        let bytes = blob::encode_f64s(data, ValueWidth::F64);
        let file = format!("{name}.bin");
        blob::write(&dir.join(&file), &bytes)?;
        entries.push(TensorEntry {
            name,
            shape,
            width: 64,
            file,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let ex = &ckpt.model.extractor;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        stage: ckpt.stage,
        epoch: ckpt.epoch,
        best_val_m: ckpt.best_val_m,
        config: ckpt.config.clone(),
        rng_state: ckpt.rng_state,
        extractor: ExtractorLayout {
            input_dim: ex.input_dim,
            taps: ex.taps.clone(),
            activations: ex.blocks.iter().map(|b| b.activation).collect(),
        },
        head_dropout_rate: ckpt.model.head.dropout_rate,
        tensors: entries,
    };
    blob::write(&dir.join(MANIFEST), manifest_text(&manifest).as_bytes())
}

fn sibling(dir: &Path, tag: &str) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "checkpoint".into());
    dir.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

/// Writes `ckpt` to the directory `dir`, replacing any existing checkpoint
/// there only once the new one is complete.
pub fn save_checkpoint(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    ckpt.model.validate()?;
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = sibling(dir, "tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    if let Err(e) = write_contents(ckpt, &tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        let old = sibling(dir, "old");
        fs::rename(dir, &old).map_err(io_err(dir))?;
        fs::rename(&tmp, dir).map_err(io_err(dir))?;
        fs::remove_dir_all(&old).map_err(io_err(&old))?;
    } else {
        fs::rename(&tmp, dir).map_err(io_err(dir))?;
    }
    Ok(())
}

fn corrupt(path: &Path, detail: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn read_tensor(dir: &Path, entry: &TensorEntry) -> Result<Vec<f64>> {
    if entry.file != format!("{}.bin", entry.name) || entry.file.contains(['/', '\\']) || entry.file.starts_with('.') {
        return Err(corrupt(&dir.join(MANIFEST), format!("bad file name {:?} for tensor {}", entry.file, entry.name)));
    }
    let path = dir.join(&entry.file);
    if entry.width != 64 {
        return Err(corrupt(&path, format!("tensor {} has width {}, expected 64", entry.name, entry.width)));
    }
    let count = entry.shape[0] * entry.shape[1];
    let bytes = blob::read_exact_size(&path, count, 8).map_err(|e| match e {
        Error::SizeMismatch { expected, actual, .. } => {
            corrupt(&path, format!("tensor {} has {actual} bytes, expected {expected}", entry.name))
        }
        other => other,
    })?;
    if hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
        return Err(corrupt(&path, format!("checksum mismatch for tensor {}", entry.name)));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(corrupt(&path, format!("tensor {} holds non-finite values", entry.name)));
    }
    Ok(values)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| corrupt(&path, format!("unreadable manifest: {e}")))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path,
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| corrupt(&path, format!("unreadable manifest: {e}")))?;

    let mut tensors = std::collections::BTreeMap::new();
    for entry in &manifest.tensors {
        if tensors.insert(entry.name.clone(), (entry.shape, read_tensor(dir, entry)?)).is_some() {
            return Err(corrupt(&path, format!("tensor {} listed twice", entry.name)));
        }
    }
    let mut take = |name: &str| -> Result<([usize; 2], Vec<f64>)> {
        tensors.remove(name).ok_or_else(|| corrupt(&path, format!("tensor {name} missing")))
    };
    let mut matrix = |name: &str| -> Result<Matrix> {
        let ([r, c], data) = take(name)?;
        Matrix::from_vec(r, c, data).map_err(|e| corrupt(&path, e.to_string()))
    };

    let layout = &manifest.extractor;
    let mut blocks = Vec::with_capacity(layout.activations.len());
    for (i, &activation) in layout.activations.iter().enumerate() {
        let weight = matrix(&block_weight_name(i))?;
        let bias = matrix(&block_bias_name(i))?.as_slice().to_vec();
        blocks.push(Block { weight, bias, activation });
    }
    let extractor = ExtractorParams {
        input_dim: layout.input_dim,
        blocks,
        taps: layout.taps.clone(),
    };
    let projection_weight = matrix(HEAD_WEIGHT)?;
    let projection_bias = matrix(HEAD_BIAS)?.as_slice().to_vec();
    let align = AlignmentMatrix {
        weight: matrix(ALIGN_WEIGHT)?,
    };
    let output_stage = PcaModel {
        mean: matrix(PCA_MEAN)?.as_slice().to_vec(),
        components: matrix(PCA_COMPONENTS)?,
        variances: matrix(PCA_VARIANCES)?.as_slice().to_vec(),
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(corrupt(&path, format!("unexpected tensor {extra}")));
    }
    let model = EncodingModel {
        extractor,
        head: VoxelHead {
            projection_weight,
            projection_bias,
            dropout_rate: manifest.head_dropout_rate,
            output_stage,
        },
        align,
    };
    model.validate().map_err(|e| corrupt(&path, e.to_string()))?;
    Ok(Checkpoint {
        stage: manifest.stage,
        epoch: manifest.epoch,
        model,
        config: manifest.config,
        best_val_m: manifest.best_val_m,
        rng_state: manifest.rng_state,
    })
}
