//! Central-difference gradient checking.

use super::{Graph, Tensor};
use crate::error::{Error, Result};

/// A scalar function with a claimed gradient.
pub trait ScalarFunction {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Wraps a graph-building closure; the gradient comes from the backward pass.
pub struct TapeFunction<F> {
    shape: Vec<usize>,
    f: F,
}

impl<F> TapeFunction<F>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    pub fn new(shape: impl Into<Vec<usize>>, f: F) -> Self {
        TapeFunction { shape: shape.into(), f }
    }
}

impl<F> ScalarFunction for TapeFunction<F>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.f)(&Tensor::new(self.shape.clone(), x.to_vec())?)?.item()
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = Graph::new();
        let xt = g.input(&Tensor::new(self.shape.clone(), x.to_vec())?);
        let root = (self.f)(&xt)?;
        if !root.is_attached() {
            return Ok(vec![0.0; x.len()]);
        }
        let grads = g.backward(&root)?;
        Ok(grads.wrt(&xt).expect("input on graph").to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub passed: bool,
    /// Set when evaluation produced a non-finite value.
    pub failure: Option<String>,
}

/// Compares claimed gradients with central differences, component by component.
///
/// Relative error is `|a − n| / max(|a|, |n|, r / tol)`, where `r` is the
/// rounding noise of the difference quotient, `2ε·max|f(x ± h)| / h`.
/// Components too small for the difference to resolve are thereby held to
/// an absolute bound at the noise level instead of a relative one.
pub fn grad_check(f: &impl ScalarFunction, x: &[f64], step: f64, tol: f64) -> Result<GradCheckReport> {
    if !(step > 0.0) || !(tol > 0.0) {
        return Err(Error::config("grad_check step and tol must be positive"));
    }
    let fail = |msg: String| GradCheckReport {
        max_rel_error: f64::INFINITY,
        worst_index: None,
        passed: false,
        failure: Some(msg),
    };
    let analytic = f.gradient(x)?;
    if analytic.len() != x.len() {
        return Err(Error::shape("grad_check", &[&[x.len()], &[analytic.len()]]));
    }
    if let Some(i) = analytic.iter().position(|v| !v.is_finite()) {
        return Ok(fail(format!("non-finite analytic gradient at component {i}")));
    }
    let mut worst = 0.0_f64;
    let mut worst_index = None;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let fp = f.value(&probe)?;
        probe[i] = x[i] - step;
        let fm = f.value(&probe)?;
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Ok(fail(format!("non-finite function value perturbing component {i}")));
        }
        let numeric = (fp - fm) / (2.0 * step);
        // rounding in fp − fm limits what the difference can resolve
        let noise = 2.0 * f64::EPSILON * fp.abs().max(fm.abs()) / step;
        let denom = analytic[i].abs().max(numeric.abs()).max(noise / tol).max(1e-10);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst || worst_index.is_none() {
            worst = worst.max(rel);
            worst_index = Some(i);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        worst_index,
        passed: worst <= tol,
        failure: None,
    })
}
