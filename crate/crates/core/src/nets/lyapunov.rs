//! Lyapunov candidates with one or several attractors.
//!
//! Every attractor term is made positive definite around its attractor x*:
//!
//! ```text
//! Vᵢ(x) = relu_smooth(gᵢ(x) − gᵢ(x*); d) + δ‖x − x*‖²
//! ```
//!
//! and the terms are combined according to [`LyapunovMode`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::icnn::{IcnnActivation, IcnnSpec};
use crate::ad::{jvp_many, Graph, Tensor};
use crate::error::{Error, Result};
use crate::params::{Bound, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovMode {
    /// One attractor, V = V₁.
    Single,
    /// Two attractors, V = σ·V₁ + (1 − σ)·V₂ with
    /// σ = sigmoid(γ(‖x − x₂*‖² − ‖x − x₁*‖²)).
    SigmoidBlend,
    /// Any number of attractors, V = ∏ Vᵢ.
    Product,
}

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_SMOOTHING: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    pub mode: LyapunovMode,
    /// Attractors in output space; mapped to latent space by the output map inverse.
    pub attractors: Vec<Vec<f64>>,
    /// One ICNN per attractor.
    pub terms: Vec<IcnnSpec>,
    pub gamma: f64,
    pub delta: f64,
    pub smoothing: f64,
}

impl LyapunovSpec {
    /// ICNN terms of shape `[n_x, hidden..., 1]` named `V{i}`.
    pub fn new(mode: LyapunovMode, attractors: Vec<Vec<f64>>, n_x: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = vec![n_x];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let terms = (0..attractors.len())
            .map(|i| IcnnSpec::new(format!("V{i}"), widths.clone(), IcnnActivation::Softplus))
            .collect::<Result<Vec<_>>>()?;
        let spec = LyapunovSpec {
            mode,
            attractors,
            terms,
            gamma: DEFAULT_GAMMA,
            delta: DEFAULT_DELTA,
            smoothing: DEFAULT_SMOOTHING,
        };
        spec.validate(n_x)?;
        Ok(spec)
    }

    pub fn validate(&self, n_x: usize) -> Result<()> {
        let k = self.attractors.len();
        if k == 0 {
            return Err(Error::config("lyapunov needs at least one attractor"));
        }
        match self.mode {
            LyapunovMode::Single if k != 1 => {
                return Err(Error::config(format!("single mode takes exactly one attractor, got {k}")))
            }
            LyapunovMode::SigmoidBlend if k != 2 => {
                return Err(Error::config(format!("sigmoid_blend takes exactly two attractors, got {k}")))
            }
            _ => {}
        }
        if self.terms.len() != k {
            return Err(Error::config(format!("{} ICNN terms for {k} attractors", self.terms.len())));
        }
        for t in &self.terms {
            t.validate()?;
            if t.input_dim() != n_x || t.output_dim() != 1 {
                return Err(Error::config(format!(
                    "ICNN `{}` must map ℝ^{n_x} → ℝ, has widths {:?}",
                    t.name, t.widths
                )));
            }
        }
        if !(self.delta > 0.0) || !(self.gamma > 0.0) || !(self.smoothing > 0.0) {
            return Err(Error::config("lyapunov delta, gamma and smoothing must be positive"));
        }
        Ok(())
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        for t in &self.terms {
            t.init(store, rng)?;
        }
        Ok(())
    }

    fn check_attractors(&self, latent: &[Tensor]) -> Result<()> {
        if latent.len() != self.attractors.len() {
            return Err(Error::config(format!(
                "{:?} mode configured with {} attractors, given {}",
                self.mode,
                self.attractors.len(),
                latent.len()
            )));
        }
        Ok(())
    }

    fn term(&self, p: &Bound, i: usize, x: &Tensor, x_star: &Tensor) -> Result<Tensor> {
        let icnn = &self.terms[i];
        let shifted = icnn.value(p, x)?.sub(&icnn.value(p, x_star)?)?.relu_smooth(self.smoothing)?;
        let quad = x.sub(x_star)?.row_sq_norm()?.scale(self.delta)?;
        shifted.add(&quad)
    }

    /// V over the rows of `x: [B, n]`, shape `[B, 1]`. `latent` holds `[1, n]` attractors.
    pub fn value(&self, p: &Bound, x: &Tensor, latent: &[Tensor]) -> Result<Tensor> {
        self.check_attractors(latent)?;
        match self.mode {
            LyapunovMode::Single => self.term(p, 0, x, &latent[0]),
            LyapunovMode::Product => {
                let mut v = self.term(p, 0, x, &latent[0])?;
                for (i, xs) in latent.iter().enumerate().skip(1) {
                    v = v.mul(&self.term(p, i, x, xs)?)?;
                }
                Ok(v)
            }
            LyapunovMode::SigmoidBlend => {
                let d1 = x.sub(&latent[0])?.row_sq_norm()?;
                let d2 = x.sub(&latent[1])?.row_sq_norm()?;
                let sigma = d2.sub(&d1)?.scale(self.gamma)?.sigmoid()?;
                let v1 = self.term(p, 0, x, &latent[0])?;
                let v2 = self.term(p, 1, x, &latent[1])?;
                // σV₁ + (1 − σ)V₂ = V₂ + σ(V₁ − V₂)
                v2.add(&sigma.mul(&v1.sub(&v2)?)?)
            }
        }
    }

    /// (V, ∇V) with ∇V assembled from one forward-mode pass per coordinate.
    /// Both are graph-attached when `x` or the parameters are.
    pub fn value_and_grad(&self, graph: &Graph, p: &Bound, x: &Tensor, latent: &[Tensor]) -> Result<(Tensor, Tensor)> {
        let (b, n) = x.dims2();
        let directions: Vec<Tensor> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; b * n];
                for r in 0..b {
                    e[r * n + i] = 1.0;
                }
                Tensor::new(x.shape().to_vec(), e)
            })
            .collect::<Result<_>>()?;
        let (v, partials) = jvp_many(graph, |x| self.value(p, x, latent), x, &directions)?;
        let grad = Tensor::concat(&partials, 1)?;
        Ok((v, grad))
    }

    /// V at each latent attractor: exactly zero in single and product modes,
    /// a small positive residual under the sigmoid blend.
    pub fn attractor_residuals(&self, p: &Bound, latent: &[Tensor]) -> Result<Vec<f64>> {
        latent.iter().map(|xs| self.value(p, xs, latent)?.item()).collect()
    }
}
