//! ODE integration: fixed-step Euler/RK4, adaptive Dormand–Prince 5(4) and
//! adjoint gradients.
//!
//! All solvers integrate a batch `[B, n]` with one shared step sequence.
//! When recording, every accepted step is built from graph primitives so the
//! sampled states can be differentiated.

mod adjoint;
mod dopri5;
mod fixed;

use serde::{Deserialize, Serialize};

use crate::ad::{Graph, Tensor};
use crate::error::{Error, Result};

pub use adjoint::{adjoint_gradients, AdjointOutput, ParamField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
    Dopri5,
}

pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    /// Step for the fixed-step methods.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Attempted steps (accepted and rejected) before giving up.
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Dopri5,
            dt: 0.01,
            rtol: 1e-5,
            atol: 1e-6,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl SolverConfig {
    pub fn dopri5(rtol: f64, atol: f64) -> Self {
        SolverConfig {
            method: Method::Dopri5,
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn fixed(method: Method, dt: f64) -> Self {
        SolverConfig {
            method,
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Euler | Method::Rk4 if !(self.dt > 0.0 && self.dt.is_finite()) => {
                Err(Error::config(format!("fixed-step dt must be positive, got {}", self.dt)))
            }
            Method::Dopri5 if !(self.rtol > 0.0 && self.atol > 0.0) => {
                Err(Error::config("dopri5 needs positive rtol and atol"))
            }
            _ if self.max_steps == 0 => Err(Error::config("max_steps must be positive")),
            _ => Ok(()),
        }
    }
}

/// Autonomous vector field over batches of rows.
pub trait VectorField {
    /// f(x); may record on a graph.
    fn eval(&self, x: &Tensor) -> Result<Tensor>;

    /// f(x) as a detached tensor, leaving no trace on any graph.
    fn eval_detached(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.eval(&x.detach())?.detach())
    }

    /// Graph the field records on, used to discard rejected steps.
    fn graph(&self) -> Option<&Graph> {
        None
    }
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    f: F,
    graph: Option<Graph>,
}

impl<F: Fn(&Tensor) -> Result<Tensor>> FnField<F> {
    pub fn new(f: F) -> Self {
        FnField { f, graph: None }
    }

    /// Declares the graph `f` records on.
    pub fn on(f: F, graph: &Graph) -> Self {
        FnField {
            f,
            graph: Some(graph.clone()),
        }
    }
}

impl<F: Fn(&Tensor) -> Result<Tensor>> VectorField for FnField<F> {
    fn eval(&self, x: &Tensor) -> Result<Tensor> {
        (self.f)(x)
    }

    fn eval_detached(&self, x: &Tensor) -> Result<Tensor> {
        let mark = self.graph.as_ref().map(Graph::mark);
        let out = (self.f)(&x.detach()).map(|t| t.detach());
        if let (Some(g), Some(m)) = (&self.graph, mark) {
            g.truncate(m);
        }
        out
    }

    fn graph(&self) -> Option<&Graph> {
        self.graph.as_ref()
    }
}

impl VectorField for crate::model::BoundModel<'_> {
    fn eval(&self, x: &Tensor) -> Result<Tensor> {
        self.f_hat(x)
    }

    fn eval_detached(&self, x: &Tensor) -> Result<Tensor> {
        self.f_hat_detached(x)
    }

    fn graph(&self) -> Option<&Graph> {
        Some(&self.graph)
    }
}

/// Whether the solve is recorded for reverse-mode differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    Tape,
    Off,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// States at the requested sample times.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Tensor>,
    pub stats: SolveStats,
}

/// Integrates from `(t0, x0)` and returns states at `times`, which must be
/// strictly increasing with `times[0] ≥ t0`.
pub fn integrate(
    field: &impl VectorField,
    x0: &Tensor,
    t0: f64,
    times: &[f64],
    cfg: &SolverConfig,
    record: Record,
) -> Result<Solution> {
    cfg.validate()?;
    check_times(t0, times)?;
    if x0.shape().len() != 2 {
        return Err(Error::shape("integrate", &[x0.shape()]));
    }
    if !x0.all_finite() {
        return Err(Error::NonFinite { t: t0 });
    }
    let x0 = match record {
        Record::Tape => x0.clone(),
        Record::Off => x0.detach(),
    };
    let eval = Evaluator { field, record };
    match cfg.method {
        Method::Euler | Method::Rk4 => fixed::integrate(&eval, &x0, t0, times, cfg),
        Method::Dopri5 => dopri5::integrate(&eval, &x0, t0, times, cfg),
    }
}

fn check_times(t0: f64, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config("no sample times"));
    }
    if !t0.is_finite() || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::config("sample times must be finite"));
    }
    if times[0] < t0 {
        return Err(Error::config(format!("first sample time {} precedes t0 = {t0}", times[0])));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("sample times must be strictly increasing"));
    }
    Ok(())
}

struct Evaluator<'a, F> {
    field: &'a F,
    record: Record,
}

impl<F: VectorField> Evaluator<'_, F> {
    fn eval(&self, x: &Tensor) -> Result<Tensor> {
        match self.record {
            Record::Tape => self.field.eval(x),
            Record::Off => self.field.eval_detached(x),
        }
    }

    fn eval_plain(&self, x: &Tensor) -> Result<Tensor> {
        self.field.eval_detached(x)
    }

    fn mark(&self) -> Option<(Graph, usize)> {
        match self.record {
            Record::Tape => self.field.graph().map(|g| (g.clone(), g.mark())),
            Record::Off => None,
        }
    }
}

/// `base + Σ h·cᵢ·kᵢ`, skipping zero coefficients.
fn lincomb(base: &Tensor, h: f64, terms: &[(f64, &Tensor)]) -> Result<Tensor> {
    let mut acc = base.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            acc = acc.add(&k.scale(h * c)?)?;
        }
    }
    Ok(acc)
}
