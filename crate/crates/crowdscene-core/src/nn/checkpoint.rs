//! Checkpoint persistence: one CSTF container holding every parameter
//! tensor flattened in canonical order, plus a JSON sidecar describing the
//! architecture, tensor layout, normalization statistics and training
//! provenance. The sidecar lives next to the tensor file with a `.json`
//! extension.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::arch::{NamedTensor, NetSpec, Vgg15Params};
use super::tensor::Tensor;
use super::train::{NormStats, TrainConfig};
use crate::cstf::{self, CstfError, CstfTensor};
use crate::dsp::FeatureKind;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("tensor container: {0}")]
    Cstf(#[from] CstfError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sidecar json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    /// Which frontend the model was trained on.
    pub kind: FeatureKind,
    pub arch: NetSpec,
    pub tensors: Vec<TensorInfo>,
    /// Train-split standardization applied before patching.
    pub norm: Option<NormStats>,
    pub train: Option<TrainConfig>,
    /// Epoch the saved parameters come from (best by training loss).
    pub epoch: Option<usize>,
    pub train_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: Vgg15Params<f32>,
    pub meta: CheckpointMeta,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint(
    path: &Path,
    params: &Vgg15Params<f32>,
    kind: FeatureKind,
    norm: Option<&NormStats>,
    train: Option<&TrainConfig>,
    epoch: Option<usize>,
    train_loss: Option<f64>,
) -> Result<(), CheckpointError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut flat = Vec::with_capacity(params.total_parameters());
    let mut infos = Vec::with_capacity(params.tensors.len());
    for t in &params.tensors {
        infos.push(TensorInfo {
            name: t.name.clone(),
            shape: t.tensor.shape.clone(),
            offset: flat.len(),
            trainable: t.trainable,
        });
        flat.extend_from_slice(&t.tensor.data);
    }
    let total = flat.len();
    cstf::write_file(path, &CstfTensor::new(vec![total], flat))?;

    let meta = CheckpointMeta {
        format_version: CHECKPOINT_FORMAT_VERSION,
        kind,
        arch: params.spec.clone(),
        tensors: infos,
        norm: norm.cloned(),
        train: train.cloned(),
        epoch,
        train_loss,
    };
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let meta: CheckpointMeta =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(CheckpointError::Inconsistent(format!(
            "unsupported format version {}",
            meta.format_version
        )));
    }
    let flat = cstf::read_file(path)?;
    let mut tensors = Vec::with_capacity(meta.tensors.len());
    for info in &meta.tensors {
        let numel: usize = info.shape.iter().product();
        let end = info.offset + numel;
        if end > flat.data.len() {
            return Err(CheckpointError::Inconsistent(format!(
                "tensor {} [{}..{}] exceeds payload of {} values",
                info.name,
                info.offset,
                end,
                flat.data.len()
            )));
        }
        tensors.push(NamedTensor {
            name: info.name.clone(),
            tensor: Tensor::from_vec(&info.shape, flat.data[info.offset..end].to_vec()),
            trainable: info.trainable,
        });
    }
    let expected: usize = meta.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if expected != flat.data.len() {
        return Err(CheckpointError::Inconsistent(format!(
            "payload holds {} values, sidecar describes {}",
            flat.data.len(),
            expected
        )));
    }
    Ok(Checkpoint {
        params: Vgg15Params {
            spec: meta.arch.clone(),
            tensors,
        },
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::vgg15;

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cstf");
        let params = Vgg15Params::<f32>::build(vgg15(1), 5);
        let norm = NormStats {
            mean: vec![0.5; 128],
            std: vec![2.0; 128],
        };
        save_checkpoint(
            &path,
            &params,
            FeatureKind::Mel,
            Some(&norm),
            Some(&TrainConfig::default()),
            Some(3),
            Some(123.5),
        )
        .unwrap();
        assert!(sidecar_path(&path).exists());

        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.meta.kind, FeatureKind::Mel);
        assert_eq!(loaded.meta.epoch, Some(3));
        assert_eq!(loaded.params.tensors.len(), params.tensors.len());
        for (a, b) in loaded.params.tensors.iter().zip(&params.tensors) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable, b.trainable);
            let bits_a: Vec<u32> = a.tensor.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.tensor.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "{} changed", a.name);
        }
        assert_eq!(loaded.meta.norm.unwrap().mean, norm.mean);
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cstf");
        let params = Vgg15Params::<f32>::build(vgg15(1), 5);
        save_checkpoint(&path, &params, FeatureKind::Gam, None, None, None, None).unwrap();
        // Corrupt: drop the last tensor from the payload but keep the sidecar.
        let flat = crate::cstf::read_file(&path).unwrap();
        let shorter = CstfTensor::new(
            vec![flat.data.len() - 10],
            flat.data[..flat.data.len() - 10].to_vec(),
        );
        crate::cstf::write_file(&path, &shorter).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Inconsistent(_))
        ));
    }
}
