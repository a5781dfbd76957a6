//! Training loop: windowed batches, rollout, loss, gradient, Adam.

mod adam;
mod checkpoint;
mod eval;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ad::{Graph, Tensor};
use crate::dataset::{make_windows, DemoSet, WindowBatch, DEFAULT_BATCH, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::field::CorrectiveParams;
use crate::metrics::{training_loss, LossMode, DEFAULT_ANCHOR_WEIGHT};
use crate::model::{BoundModel, StableNodeModel};
use crate::odeint::{adjoint_gradients, integrate, Record, SolverConfig};

pub use adam::{adam_step, AdamConfig, AdamState, StepOutcome};
pub use checkpoint::{load_model, save_model, write_atomic, Checkpoint, Maps, CHECKPOINT_VERSION};
pub use eval::{evaluate, rollout, rollout_batch, DemoEval, EvalReport, HORIZON_FACTOR};

/// Consecutive failed iterations tolerated before training aborts.
pub const MAX_CONSECUTIVE_FAILURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Reverse mode through the recorded solver steps.
    Tape,
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub adam: AdamConfig,
    /// Windows per batch (N_B).
    pub batch: usize,
    /// Samples per window (N_S).
    pub window: usize,
    pub solver: SolverConfig,
    /// Replaces the model's corrective constants when set.
    pub corrective: Option<CorrectiveParams>,
    pub loss: LossMode,
    /// Weight k of the initial-point anchor.
    pub anchor_weight: f64,
    pub gradient: GradientMode,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
    /// Evaluate on the training demos after the last iteration.
    pub evaluate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 500,
            adam: AdamConfig::default(),
            batch: DEFAULT_BATCH,
            window: DEFAULT_WINDOW,
            solver: SolverConfig::default(),
            corrective: None,
            loss: LossMode::AhdComposite,
            anchor_weight: DEFAULT_ANCHOR_WEIGHT,
            gradient: GradientMode::Tape,
            seed: 0,
            checkpoint_every: 0,
            evaluate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.solver.validate()?;
        if let Some(c) = &self.corrective {
            c.validate()?;
        }
        if self.batch == 0 || self.window < 2 {
            return Err(Error::config("batch must be ≥ 1 and window ≥ 2"));
        }
        if !(self.anchor_weight >= 0.0) {
            return Err(Error::config("anchor weight must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEvent {
    pub iteration: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Batch loss of every completed iteration, before its update.
    pub losses: Vec<f64>,
    pub wall_time_s: f64,
    pub events: Vec<TrainEvent>,
    pub checkpoints: Vec<PathBuf>,
    pub evaluation: Option<EvalReport>,
}

/// Per-iteration progress passed to observers.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub iteration: usize,
    pub loss: Option<f64>,
}

/// Mean training loss over the windows of `batch` for output-space states
/// `zs` on the batch grid.
fn batch_loss(batch: &WindowBatch, zs: &[Tensor], cfg: &TrainConfig) -> Result<Tensor> {
    let mut total: Option<Tensor> = None;
    for (b, target) in batch.targets.iter().enumerate() {
        let l = training_loss(&batch.gather(zs, b)?, target, cfg.anchor_weight, cfg.loss)?;
        total = Some(match total {
            None => l,
            Some(t) => t.add(&l)?,
        });
    }
    total.expect("nonempty batch").scale(1.0 / batch.targets.len() as f64)
}

/// Loss value and parameter gradients for one batch.
pub fn batch_gradients(
    model: &StableNodeModel,
    batch: &WindowBatch,
    cfg: &TrainConfig,
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    match cfg.gradient {
        GradientMode::Tape => {
            let g = Graph::new();
            let bm = model.bind(&g)?;
            let x0 = bm.encode(&batch.y0)?;
            let sol = integrate(&bm, &x0, 0.0, &batch.grid, &cfg.solver, Record::Tape)?;
            let zs = sol.states.iter().map(|x| bm.decode(x)).collect::<Result<Vec<_>>>()?;
            let loss = batch_loss(batch, &zs, cfg)?;
            let value = loss.item()?;
            let grads = g.backward(&loss)?.into_params();
            Ok((value, grads))
        }
        GradientMode::Adjoint => {
            let out = adjoint_gradients(
                model,
                |g, p| BoundModel::with(&model.spec, g.clone(), p.clone())?.encode(&batch.y0),
                0.0,
                &batch.grid,
                |g, p, xs| {
                    let bm = BoundModel::with(&model.spec, g.clone(), p.clone())?;
                    let zs = xs.iter().map(|x| bm.decode(x)).collect::<Result<Vec<_>>>()?;
                    batch_loss(batch, &zs, cfg)
                },
                &cfg.solver,
            )?;
            Ok((out.loss, out.grads))
        }
    }
}

/// Seed of the batch drawn at `iteration`.
pub fn batch_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(iteration as u64)
}

pub fn fit(model: StableNodeModel, demos: &DemoSet, cfg: &TrainConfig) -> Result<(StableNodeModel, TrainReport)> {
    fit_with(model, demos, cfg, None, |_| {})
}

/// [`fit`] with optional checkpoints under `checkpoint_dir` and a progress callback.
pub fn fit_with(
    mut model: StableNodeModel,
    demos: &DemoSet,
    cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    mut observe: impl FnMut(Progress),
) -> Result<(StableNodeModel, TrainReport)> {
    cfg.validate()?;
    if demos.dim != model.spec.n_z {
        return Err(Error::config(format!(
            "demos are {}-dimensional but the model outputs {} dimensions",
            demos.dim, model.spec.n_z
        )));
    }
    if let Some(c) = cfg.corrective {
        model.spec.corrective = c;
    }
    let start = Instant::now();
    let mut report = TrainReport {
        losses: Vec::with_capacity(cfg.iterations),
        wall_time_s: 0.0,
        events: Vec::new(),
        checkpoints: Vec::new(),
        evaluation: None,
    };
    let mut state = AdamState::default();
    let mut failures = 0usize;
    for it in 0..cfg.iterations {
        let batch = make_windows(demos, cfg.window, cfg.batch, batch_seed(cfg.seed, it))?;
        match batch_gradients(&model, &batch, cfg) {
            Ok((loss, grads)) if loss.is_finite() => {
                failures = 0;
                let (next, outcome) = adam_step(&model.params, &grads, &mut state, &cfg.adam)?;
                if outcome == StepOutcome::SkippedNonFinite {
                    report.events.push(TrainEvent {
                        iteration: it,
                        message: "non-finite gradient, update skipped".into(),
                    });
                }
                model.params = next;
                report.losses.push(loss);
                observe(Progress {
                    iteration: it,
                    loss: Some(loss),
                });
            }
            other => {
                let message = match other {
                    Err(e @ (Error::NonFinite { .. } | Error::MaxSteps { .. })) => format!("solver failure, iteration skipped: {e}"),
                    Err(e) => return Err(e),
                    Ok((loss, _)) => format!("non-finite loss {loss}, iteration skipped"),
                };
                report.events.push(TrainEvent { iteration: it, message });
                observe(Progress {
                    iteration: it,
                    loss: None,
                });
                failures += 1;
                if failures > MAX_CONSECUTIVE_FAILURES {
                    return Err(Error::Training(format!(
                        "{failures} consecutive failed iterations (last at {it})"
                    )));
                }
            }
        }
        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 {
                let path = dir.join(format!("checkpoint_{:06}.json", it + 1));
                save_model(&model, &path)?;
                report.checkpoints.push(path);
            }
        }
    }
    if cfg.evaluate && cfg.iterations > 0 {
        report.evaluation = Some(evaluate(&model, demos, &cfg.solver)?);
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((model, report))
}
