//! Gradients by the adjoint method: a no-grad forward solve, then the
//! augmented system [x, a, g] integrated backward in time with the loss
//! sensitivities added to `a` at each sample time.

use std::collections::BTreeMap;

use super::{integrate, FnField, Record, SolveStats, SolverConfig};
use crate::ad::{Gradients, Graph, Tensor};
use crate::error::{Error, Result};
use crate::model::{BoundModel, StableNodeModel};
use crate::params::{Bound, ParamStore};

/// A vector field whose parameters can be bound into any graph.
pub trait ParamField {
    fn params(&self) -> &ParamStore;

    /// f(x) with parameters `p`, recorded on `graph`.
    fn eval_on(&self, graph: &Graph, p: &Bound, x: &Tensor) -> Result<Tensor>;
}

impl ParamField for StableNodeModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn eval_on(&self, graph: &Graph, p: &Bound, x: &Tensor) -> Result<Tensor> {
        BoundModel::with(&self.spec, graph.clone(), p.clone())?.f_hat(x)
    }
}

#[derive(Debug, Clone)]
pub struct AdjointOutput {
    pub loss: f64,
    /// dloss/dθ for every parameter, zero where the loss does not depend on it.
    pub grads: BTreeMap<String, Tensor>,
    /// Forward states at the sample times (detached).
    pub states: Vec<Tensor>,
    pub forward: SolveStats,
    pub backward: SolveStats,
}

fn flat_param_grads(store: &ParamStore, grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::with_capacity(store.numel());
    for (name, t) in store.iter() {
        match grads.get(name) {
            Some(g) => out.extend_from_slice(g.data()),
            None => out.extend(std::iter::repeat_n(0.0, t.numel())),
        }
    }
    out
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// `init` builds the initial latent state from the bound parameters (φ(y) or
/// a constant); `loss` maps the latent states at `times` to a scalar.
pub fn adjoint_gradients<F: ParamField>(
    field: &F,
    init: impl Fn(&Graph, &Bound) -> Result<Tensor>,
    t0: f64,
    times: &[f64],
    loss: impl Fn(&Graph, &Bound, &[Tensor]) -> Result<Tensor>,
    cfg: &SolverConfig,
) -> Result<AdjointOutput> {
    let store = field.params();
    let n_params = store.numel();

    let x0 = init(&Graph::new(), &store.detached())?.detach();
    let shape = x0.shape().to_vec();
    let n_state = x0.numel();
    let forward_field = FnField::new(|x: &Tensor| {
        let g = Graph::new();
        Ok(field.eval_on(&g, &store.detached(), x)?.detach())
    });
    let sol = integrate(&forward_field, &x0, t0, times, cfg, Record::Off)?;

    // loss value, its sensitivities to each sampled state and its direct parameter gradients
    let gl = Graph::new();
    let pl = store.bind(&gl)?;
    let inputs: Vec<Tensor> = sol.states.iter().map(|s| gl.input(s)).collect();
    let root = loss(&gl, &pl, &inputs)?;
    let loss_value = root.item()?;
    let mut total = vec![0.0; n_params];
    let jumps: Vec<Vec<f64>> = if root.is_attached() {
        let grads = gl.backward(&root)?;
        add_into(&mut total, &flat_param_grads(store, &grads));
        inputs
            .iter()
            .map(|x| grads.wrt(x).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n_state]))
            .collect()
    } else {
        vec![vec![0.0; n_state]; inputs.len()]
    };

    let augmented = FnField::new(|s: &Tensor| {
        let data = s.data();
        let x = Tensor::new(shape.clone(), data[..n_state].to_vec())?;
        let a = Tensor::new(shape.clone(), data[n_state..2 * n_state].to_vec())?;
        let g = Graph::new();
        let p = store.bind(&g)?;
        let xin = g.input(&x);
        let f = field.eval_on(&g, &p, &xin)?;
        let mut out = Vec::with_capacity(data.len());
        out.extend(f.data().iter().map(|v| -v));
        if f.is_attached() {
            let grads = g.backward(&f.mul(&a)?.sum()?)?;
            match grads.wrt(&xin) {
                Some(da) => out.extend_from_slice(da.data()),
                None => out.extend(std::iter::repeat_n(0.0, n_state)),
            }
            out.extend(flat_param_grads(store, &grads));
        } else {
            out.extend(std::iter::repeat_n(0.0, n_state + n_params));
        }
        Tensor::new(vec![1, out.len()], out)
    });

    let mut a = jumps.last().cloned().unwrap_or_default();
    let mut backward = SolveStats::default();
    let mut integrated = vec![0.0; n_params];
    for k in (0..times.len()).rev() {
        let t_hi = times[k];
        let t_lo = if k == 0 { t0 } else { times[k - 1] };
        if t_hi > t_lo {
            let mut s = Vec::with_capacity(2 * n_state + n_params);
            s.extend_from_slice(sol.states[k].data());
            s.extend_from_slice(&a);
            s.extend(std::iter::repeat_n(0.0, n_params));
            let s0 = Tensor::new(vec![1, s.len()], s)?;
            // τ = −t runs forward from −t_hi to −t_lo
            let seg = integrate(&augmented, &s0, -t_hi, &[-t_lo], cfg, Record::Off)?;
            backward.accepted += seg.stats.accepted;
            backward.rejected += seg.stats.rejected;
            backward.evals += seg.stats.evals;
            let end = seg.states[0].data();
            a = end[n_state..2 * n_state].to_vec();
            add_into(&mut integrated, &end[2 * n_state..]);
        }
        if k > 0 {
            add_into(&mut a, &jumps[k - 1]);
        }
    }
    add_into(&mut total, &integrated);

    // through the initial map
    let gi = Graph::new();
    let pi = store.bind(&gi)?;
    let x0g = init(&gi, &pi)?;
    if x0g.is_attached() {
        let a0 = Tensor::new(shape.clone(), a)?;
        let grads = gi.backward(&x0g.mul(&a0)?.sum()?)?;
        add_into(&mut total, &flat_param_grads(store, &grads));
    }

    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: t0 });
    }
    let grads = store
        .unflatten(&total)?
        .iter()
        .map(|(n, t)| (n.clone(), t.clone()))
        .collect();
    Ok(AdjointOutput {
        loss: loss_value,
        grads,
        states: sol.states,
        forward: sol.stats,
        backward,
    })
}
