use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, MlpSpec};
use crate::ad::Tensor;
use crate::error::{Error, Result};
use crate::params::{Bound, ParamStore};

/// Stack of affine coupling layers z = ψ(x).
///
/// Each layer keeps a passive block of ⌊n/2⌋ coordinates and maps the active
/// block of ⌈n/2⌉ coordinates to `active ⊙ exp(s(passive)) + t(passive)`.
/// Even layers take the first coordinates as passive, odd layers the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingStack {
    pub name: String,
    pub dim: usize,
    pub layers: Vec<CouplingLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingLayer {
    pub scale: MlpSpec,
    pub shift: MlpSpec,
}

impl CouplingStack {
    pub fn new(name: impl Into<String>, dim: usize, layers: usize, hidden: &[usize]) -> Result<Self> {
        let name = name.into();
        if dim < 2 {
            return Err(Error::config(format!(
                "coupling stack `{name}` needs dimension ≥ 2, got {dim}; use the identity map instead"
            )));
        }
        let (np, na) = (dim / 2, dim - dim / 2);
        let mut widths = vec![np];
        widths.extend_from_slice(hidden);
        widths.push(na);
        let layers = (0..layers)
            .map(|k| {
                Ok(CouplingLayer {
                    scale: MlpSpec::new(format!("{name}.s{k}"), widths.clone(), Activation::Tanh)?,
                    shift: MlpSpec::new(format!("{name}.t{k}"), widths.clone(), Activation::Tanh)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let stack = CouplingStack { name, dim, layers };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::config(format!("coupling stack `{}` needs dimension ≥ 2", self.name)));
        }
        if self.layers.is_empty() {
            return Err(Error::config(format!("coupling stack `{}` has no layers", self.name)));
        }
        let (np, na) = self.halves();
        for l in &self.layers {
            for net in [&l.scale, &l.shift] {
                net.validate()?;
                if net.input_dim() != np || net.output_dim() != na {
                    return Err(Error::config(format!(
                        "coupling net `{}` must map {np} → {na} coordinates, has widths {:?}",
                        net.name, net.widths
                    )));
                }
            }
        }
        Ok(())
    }

    /// (passive, active) block sizes.
    pub fn halves(&self) -> (usize, usize) {
        (self.dim / 2, self.dim - self.dim / 2)
    }

    /// Random s/t nets with the output layer scaled by `gain`; `gain = 0` gives the identity map.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng, gain: f64) -> Result<()> {
        for l in &self.layers {
            l.scale.init_scaled(store, rng, gain)?;
            l.shift.init_scaled(store, rng, gain)?;
        }
        Ok(())
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.dim {
            return Err(Error::shape(format!("coupling {}", self.name), &[x.shape(), &[self.dim]]));
        }
        Ok(())
    }

    /// (passive, active) blocks of `x` for layer `k`.
    fn split(&self, k: usize, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let (np, na) = self.halves();
        if k.is_multiple_of(2) {
            Ok((x.slice(1, 0, np)?, x.slice(1, np, na)?))
        } else {
            Ok((x.slice(1, na, np)?, x.slice(1, 0, na)?))
        }
    }

    fn join(&self, k: usize, passive: Tensor, active: Tensor) -> Result<Tensor> {
        if k.is_multiple_of(2) {
            Tensor::concat(&[passive, active], 1)
        } else {
            Tensor::concat(&[active, passive], 1)
        }
    }

    /// z = ψ(x) over the rows of `x: [B, dim]`.
    pub fn forward(&self, p: &Bound, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut h = x.clone();
        for (k, l) in self.layers.iter().enumerate() {
            let (passive, active) = self.split(k, &h)?;
            let s = l.scale.forward(p, &passive)?;
            let t = l.shift.forward(p, &passive)?;
            let active = active.mul(&s.exp()?)?.add(&t)?;
            h = self.join(k, passive, active)?;
        }
        Ok(h)
    }

    /// x = ψ⁻¹(z), inverting layer by layer in reverse order.
    pub fn inverse(&self, p: &Bound, z: &Tensor) -> Result<Tensor> {
        self.check(z)?;
        let mut h = z.clone();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let (passive, active) = self.split(k, &h)?;
            let s = l.scale.forward(p, &passive)?;
            let t = l.shift.forward(p, &passive)?;
            let active = active.sub(&t)?.mul(&s.neg()?.exp()?)?;
            h = self.join(k, passive, active)?;
        }
        Ok(h)
    }
}
