use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stablenode::field::CorrectiveParams;
use stablenode::nets::lyapunov::{DEFAULT_DELTA, DEFAULT_GAMMA, DEFAULT_SMOOTHING};
use stablenode::nets::LyapunovMode;
use stablenode::trainer::TrainConfig;
use stablenode::{ModelSpec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub layers: usize,
    pub hidden: Vec<usize>,
}

/// Architecture of a fresh model. Dimensions come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub nominal_hidden: Vec<usize>,
    pub lyapunov_hidden: Vec<usize>,
    pub lyapunov_mode: LyapunovMode,
    /// Output-space attractors; defaults to the data's annotation, else the
    /// mean demo endpoint.
    pub attractors: Option<Vec<Vec<f64>>>,
    pub gamma: f64,
    pub delta: f64,
    pub smoothing: f64,
    /// Coupling-layer output map; identity when absent.
    pub coupling: Option<CouplingConfig>,
    /// Hidden widths of an MLP input map; identity when absent.
    pub input_hidden: Option<Vec<usize>>,
    pub corrective: CorrectiveParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            nominal_hidden: vec![16, 16],
            lyapunov_hidden: vec![16, 16],
            lyapunov_mode: LyapunovMode::Single,
            attractors: None,
            gamma: DEFAULT_GAMMA,
            delta: DEFAULT_DELTA,
            smoothing: DEFAULT_SMOOTHING,
            coupling: None,
            input_hidden: None,
            corrective: CorrectiveParams::default(),
        }
    }
}

impl ModelConfig {
    pub fn build(&self, dim: usize, attractors: Vec<Vec<f64>>) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(dim, &self.nominal_hidden, &self.lyapunov_hidden, self.lyapunov_mode, attractors)?
            .with_corrective(self.corrective)?;
        spec.lyapunov.gamma = self.gamma;
        spec.lyapunov.delta = self.delta;
        spec.lyapunov.smoothing = self.smoothing;
        if let Some(c) = &self.coupling {
            spec = spec.with_coupling(c.layers, &c.hidden)?;
        }
        if let Some(h) = &self.input_hidden {
            spec = spec.with_input_mlp(h)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// The `train` configuration file. Relative paths resolve against the
/// file's own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of demonstration CSVs.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Name of a bundled dataset, used when `data` is absent.
    #[serde(default)]
    pub bundled: Option<String>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Trained model path, default `model.json`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Training report path, default next to the model as `<stem>.report.json`.
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Rewrites relative paths as relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        for p in [&mut self.data, &mut self.out, &mut self.report, &mut self.checkpoint_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
