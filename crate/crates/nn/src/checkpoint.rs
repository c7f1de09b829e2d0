//! Model checkpoints: a JSON manifest plus one tensor file per parameter.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/params/<name>.srgt
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use surge_core::gridding::NormStats;
use surge_core::tensor_file::{read_tensor, write_tensor, RawTensor};

use crate::error::NnError;
use crate::models::{Architecture, ModelParameters};
use crate::tensor::Tensor4;
use crate::trainer::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub architecture: Architecture,
    pub fingerprint: String,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    pub train_config_hash: Option<String>,
    pub best_epoch: Option<usize>,
    pub norm: Option<NormStats>,
    pub parameters: Vec<ParamEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub params: ModelParameters<f32>,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
    pub norm: Option<NormStats>,
}

impl ModelCheckpoint {
    pub fn new(params: ModelParameters<f32>, seed: u64) -> Self {
        Self { params, seed, train_config: None, best_epoch: None, norm: None }
    }

    pub fn architecture(&self) -> Architecture {
        self.params.architecture
    }

    pub fn manifest(&self) -> CheckpointManifest {
        let arch = self.params.architecture;
        CheckpointManifest {
            format_version: CHECKPOINT_VERSION,
            architecture: arch,
            fingerprint: arch.fingerprint(),
            seed: self.seed,
            train_config: self.train_config.clone(),
            train_config_hash: self.train_config.as_ref().map(TrainConfig::hash),
            best_epoch: self.best_epoch,
            norm: self.norm,
            parameters: arch
                .param_specs()
                .into_iter()
                .map(|s| ParamEntry {
                    file: format!("params/{}.srgt", s.name),
                    name: s.name,
                    dims: s.dims,
                })
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), NnError> {
        let manifest = self.manifest();
        fs::create_dir_all(dir.join("params"))?;
        for (entry, t) in manifest.parameters.iter().zip(&self.params.tensors) {
            write_tensor(&dir.join(&entry.file), &RawTensor::new(entry.dims.clone(), t.data.clone()))?;
        }
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let m: CheckpointManifest = serde_json::from_str(&text)?;
        if m.format_version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                m.format_version
            )));
        }
        m.architecture.validate()?;
        let fingerprint = m.architecture.fingerprint();
        if m.fingerprint != fingerprint {
            return Err(NnError::Checkpoint(format!(
                "fingerprint mismatch: manifest {} but architecture hashes to {fingerprint}",
                m.fingerprint
            )));
        }
        if let (Some(cfg), Some(hash)) = (&m.train_config, &m.train_config_hash) {
            if &cfg.hash() != hash {
                return Err(NnError::Checkpoint("training config hash mismatch".into()));
            }
        }
        let specs = m.architecture.param_specs();
        if specs.len() != m.parameters.len() {
            return Err(NnError::Checkpoint(format!(
                "manifest lists {} parameters, architecture has {}",
                m.parameters.len(),
                specs.len()
            )));
        }
        let mut tensors = Vec::with_capacity(specs.len());
        for (spec, entry) in specs.iter().zip(&m.parameters) {
            if spec.name != entry.name || spec.dims != entry.dims {
                return Err(NnError::Checkpoint(format!(
                    "manifest entry {} {:?} does not match architecture parameter {} {:?}",
                    entry.name, entry.dims, spec.name, spec.dims
                )));
            }
            let raw = read_tensor(&dir.join(&entry.file))?;
            if raw.dims != entry.dims {
                return Err(NnError::Checkpoint(format!(
                    "{} holds dims {:?}, manifest says {:?}",
                    entry.file, raw.dims, entry.dims
                )));
            }
            tensors.push(Tensor4::from_vec(spec.shape4(), raw.data)?);
        }
        Ok(Self {
            params: ModelParameters::from_tensors(m.architecture, tensors)?,
            seed: m.seed,
            train_config: m.train_config,
            best_epoch: m.best_epoch,
            norm: m.norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UNetConfig;

    fn sample() -> ModelCheckpoint {
        let arch = Architecture::Unet(UNetConfig::new(2, 2, 3, 1));
        let mut ck = ModelCheckpoint::new(ModelParameters::init(arch, 9).unwrap(), 9);
        ck.train_config = Some(TrainConfig { epochs: 4, ..TrainConfig::default() });
        ck.best_epoch = Some(3);
        ck.norm = Some(NormStats::default());
        ck
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ck = sample();
        ck.save(dir.path()).unwrap();
        assert_eq!(ModelCheckpoint::load(dir.path()).unwrap(), ck);
    }

    #[test]
    fn tampered_fingerprint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().save(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let mut m: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m.fingerprint = "0".repeat(64);
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        assert!(matches!(ModelCheckpoint::load(dir.path()), Err(NnError::Checkpoint(_))));
    }

    #[test]
    fn wrong_tensor_dims_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ck = sample();
        ck.save(dir.path()).unwrap();
        let entry = &ck.manifest().parameters[0];
        write_tensor(&dir.path().join(&entry.file), &RawTensor::new(vec![1], vec![0.0])).unwrap();
        assert!(matches!(ModelCheckpoint::load(dir.path()), Err(NnError::Checkpoint(_))));
    }

    #[test]
    fn corrupted_tensor_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ck = sample();
        ck.save(dir.path()).unwrap();
        let path = dir.path().join(&ck.manifest().parameters[1].file);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(ModelCheckpoint::load(dir.path()), Err(NnError::Format(_))));
    }
}
