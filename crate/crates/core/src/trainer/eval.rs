use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::dataset::DemoSet;
use crate::error::Result;
use crate::metrics::{ahd, discrete_frechet, dtw, Dtw};
use crate::model::StableNodeModel;
use crate::odeint::{integrate, Record, SolverConfig};

/// How far past the demo duration the convergence rollout runs.
pub const HORIZON_FACTOR: f64 = 3.0;

/// Rolls out from output-space initial points `y0: [B, d]` and returns the
/// output-space states at `times` (relative to the start), detached.
pub fn rollout_batch(model: &StableNodeModel, y0: &Tensor, times: &[f64], solver: &SolverConfig) -> Result<Vec<Tensor>> {
    let bm = model.frozen()?;
    let x0 = bm.detached(|b| Ok(b.encode(&y0.detach())?.detach()))?;
    let sol = integrate(&bm, &x0, 0.0, times, solver, Record::Off)?;
    sol.states
        .iter()
        .map(|x| bm.detached(|b| Ok(b.decode(x)?.detach())))
        .collect()
}

/// Single-start rollout as a list of points.
pub fn rollout(model: &StableNodeModel, y0: &[f64], times: &[f64], solver: &SolverConfig) -> Result<Vec<Vec<f64>>> {
    let states = rollout_batch(model, &Tensor::row(y0.to_vec()), times, solver)?;
    Ok(states.iter().map(Tensor::to_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEval {
    pub name: String,
    pub dtw: Option<Dtw>,
    pub frechet: Option<f64>,
    pub ahd: Option<f64>,
    /// Output-space distance from the extended-horizon end state to the
    /// demo's attractor (the nearest one when unannotated).
    pub convergence_distance: Option<f64>,
    /// V at the extended-horizon end state.
    pub terminal_v: Option<f64>,
    /// Whether that end state lies in {V ≤ 1/(sα)}.
    pub in_level_set: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub demos: Vec<DemoEval>,
    pub mean_dtw: f64,
    pub mean_frechet: f64,
    pub mean_ahd: f64,
    pub failures: usize,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Rolls out from every demo's first point over its own timestamps and over
/// a horizon extended to [`HORIZON_FACTOR`] × duration. Solver failures are
/// recorded per demo.
pub fn evaluate(model: &StableNodeModel, demos: &DemoSet, solver: &SolverConfig) -> Result<EvalReport> {
    let level = model.spec.corrective.level();
    let attractors = model.spec.attractors();
    let mut out = Vec::with_capacity(demos.len());
    for d in &demos.demos {
        let traj = &d.trajectory;
        let t0 = traj.times[0];
        let times: Vec<f64> = traj.times.iter().map(|t| t - t0).collect();
        let mut e = DemoEval {
            name: d.name.clone(),
            dtw: None,
            frechet: None,
            ahd: None,
            convergence_distance: None,
            terminal_v: None,
            in_level_set: None,
            error: None,
        };
        let result: Result<()> = (|| {
            let pts = rollout(model, &traj.points[0], &times, solver)?;
            e.dtw = Some(dtw(&pts, &traj.points)?);
            e.frechet = Some(discrete_frechet(&pts, &traj.points)?);
            let a = Tensor::new(vec![pts.len(), demos.dim], pts.concat())?;
            e.ahd = Some(ahd(&a, &traj.to_tensor())?.item()?);

            let horizon = HORIZON_FACTOR * traj.duration();
            let bm = model.frozen()?;
            let x0 = bm.detached(|b| Ok(b.encode(&Tensor::row(traj.points[0].clone()))?.detach()))?;
            let sol = integrate(&bm, &x0, 0.0, &[horizon], solver, Record::Off)?;
            let x_end = &sol.states[0];
            let (z_end, v_end) = bm.detached(|b| Ok((b.decode(x_end)?.to_vec(), b.lyapunov(x_end)?.item()?)))?;
            let dist_to = |a: &Vec<f64>| a.iter().zip(&z_end).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            e.convergence_distance = match d.attractor.and_then(|i| demos.attractors.get(i)) {
                Some(a) => Some(dist_to(a)),
                None => attractors.iter().map(dist_to).reduce(f64::min),
            };
            e.terminal_v = Some(v_end);
            e.in_level_set = Some(v_end <= level);
            Ok(())
        })();
        if let Err(err) = result {
            e.error = Some(err.to_string());
        }
        out.push(e);
    }
    Ok(EvalReport {
        mean_dtw: mean(out.iter().filter_map(|e| e.dtw.map(|d| d.normalized))),
        mean_frechet: mean(out.iter().filter_map(|e| e.frechet)),
        mean_ahd: mean(out.iter().filter_map(|e| e.ahd)),
        failures: out.iter().filter(|e| e.error.is_some()).count(),
        demos: out,
    })
}
