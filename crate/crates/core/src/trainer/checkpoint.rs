use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::CorrectiveParams;
use crate::model::{InputMap, ModelSpec, OutputMap, StableNodeModel};
use crate::nets::{LyapunovSpec, MlpSpec};
use crate::params::{ParamRecord, ParamStore};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Maps {
    pub phi: InputMap,
    pub psi: OutputMap,
}

/// On-disk model: architecture descriptors plus every parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub n_x: usize,
    pub n_z: usize,
    pub corrective: CorrectiveParams,
    pub maps: Maps,
    pub nominal: MlpSpec,
    pub lyapunov: LyapunovSpec,
    pub params: BTreeMap<String, ParamRecord>,
    pub attractors: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model(model: &StableNodeModel) -> Self {
        let s = &model.spec;
        Checkpoint {
            version: CHECKPOINT_VERSION,
            n_x: s.n_x,
            n_z: s.n_z,
            corrective: s.corrective,
            maps: Maps {
                phi: s.phi.clone(),
                psi: s.psi.clone(),
            },
            nominal: s.nominal.clone(),
            lyapunov: s.lyapunov.clone(),
            params: model.params.to_records(),
            attractors: s.attractors().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<StableNodeModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {}, expected {CHECKPOINT_VERSION}",
                self.version
            )));
        }
        if self.attractors != self.lyapunov.attractors {
            return Err(Error::config("checkpoint attractors disagree with the Lyapunov descriptor"));
        }
        let spec = ModelSpec {
            n_x: self.n_x,
            n_z: self.n_z,
            phi: self.maps.phi,
            nominal: self.nominal,
            lyapunov: self.lyapunov,
            psi: self.maps.psi,
            corrective: self.corrective,
        };
        StableNodeModel::from_parts(spec, ParamStore::from_records(&self.params)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save_model(model: &StableNodeModel, path: &Path) -> Result<()> {
    write_atomic(path, Checkpoint::from_model(model).to_json()?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<StableNodeModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    ck.into_model()
}
