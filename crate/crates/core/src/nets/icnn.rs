use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};
use crate::params::{Bound, ParamStore};

/// Convex, nondecreasing activation used on every ICNN layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IcnnActivation {
    Softplus,
    ReluSmooth { d: f64 },
}

impl IcnnActivation {
    fn apply(self, x: &Tensor) -> Result<Tensor> {
        match self {
            IcnnActivation::Softplus => x.softplus(),
            IcnnActivation::ReluSmooth { d } => x.relu_smooth(d),
        }
    }
}

/// Input-convex network g: ℝⁿ → ℝ.
///
/// z₁ = σ(x W₀ + b₀), zₖ₊₁ = σ(zₖ softplus(Uₖ) + x Wₖ + bₖ), g = z_last.
/// The pass-through weights `Uₖ` are stored raw; softplus keeps the effective
/// weights nonnegative, so g is convex for any raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcnnSpec {
    pub name: String,
    pub widths: Vec<usize>,
    pub activation: IcnnActivation,
}

impl IcnnSpec {
    pub fn new(name: impl Into<String>, widths: Vec<usize>, activation: IcnnActivation) -> Result<Self> {
        let spec = IcnnSpec {
            name: name.into(),
            widths,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::config(format!("icnn `{}` widths invalid: {:?}", self.name, self.widths)));
        }
        if let IcnnActivation::ReluSmooth { d } = self.activation {
            if !(d > 0.0) {
                return Err(Error::config(format!("icnn `{}` smoothing width must be positive", self.name)));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn direct_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.name)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.name)
    }

    pub fn pass_name(&self, layer: usize) -> String {
        format!("{}.u{layer}", self.name)
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let n = self.input_dim();
        let bound = 1.0 / (n as f64).sqrt();
        for l in 0..self.layers() {
            let o = self.widths[l + 1];
            store.init_uniform(&self.direct_name(l), &[n, o], bound, rng)?;
            store.init_uniform(&self.bias_name(l), &[1, o], bound, rng)?;
            if l > 0 {
                let h = self.widths[l];
                // softplus(raw) ≈ 1/h so each layer roughly averages the previous one
                let center = (1.0 / h as f64).exp_m1().ln();
                let data: Vec<f64> = (0..h * o).map(|_| center + rng.random_range(-0.5..0.5)).collect();
                store.insert(self.pass_name(l), Tensor::new(vec![h, o], data)?)?;
            }
        }
        Ok(())
    }

    /// g over the rows of `x: [B, n]`, shape `[B, widths.last()]`.
    pub fn value(&self, p: &Bound, x: &Tensor) -> Result<Tensor> {
        let (_, cols) = x.dims2();
        if x.shape().len() != 2 || cols != self.input_dim() {
            return Err(Error::shape(format!("icnn {}", self.name), &[x.shape(), &[self.input_dim()]]));
        }
        let mut z = x.matmul(p.get(&self.direct_name(0))?)?.add(p.get(&self.bias_name(0))?)?;
        z = self.activation.apply(&z)?;
        for l in 1..self.layers() {
            let u = p.get(&self.pass_name(l))?.softplus()?;
            let pre = z
                .matmul(&u)?
                .add(&x.matmul(p.get(&self.direct_name(l))?)?)?
                .add(p.get(&self.bias_name(l))?)?;
            z = self.activation.apply(&pre)?;
        }
        Ok(z)
    }
}
