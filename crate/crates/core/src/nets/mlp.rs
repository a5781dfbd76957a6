use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};
use crate::params::{Bound, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    pub(crate) fn apply(self, x: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => x.softplus(),
        }
    }
}

/// Fully connected network; hidden layers use `activation`, the last layer is affine.
///
/// Weights are stored as `[fan_in, fan_out]` under `{name}.w{i}`, biases as
/// `[1, fan_out]` under `{name}.b{i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub name: String,
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(name: impl Into<String>, widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let spec = MlpSpec {
            name: name.into(),
            widths,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::config(format!(
                "mlp `{}` needs at least two nonzero widths, got {:?}",
                self.name, self.widths
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.name)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.name)
    }

    /// Uniform(±1/√fan_in) weights and biases.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        self.init_scaled(store, rng, 1.0)
    }

    /// Like [`MlpSpec::init`] with the output layer scaled by `last_gain`.
    pub fn init_scaled(&self, store: &mut ParamStore, rng: &mut impl Rng, last_gain: f64) -> Result<()> {
        for l in 0..self.layers() {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let mut bound = 1.0 / (i as f64).sqrt();
            if l + 1 == self.layers() {
                bound *= last_gain;
            }
            store.init_uniform(&self.weight_name(l), &[i, o], bound, rng)?;
            store.init_uniform(&self.bias_name(l), &[1, o], bound, rng)?;
        }
        Ok(())
    }

    pub fn init_zero(&self, store: &mut ParamStore) -> Result<()> {
        for l in 0..self.layers() {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            store.init_const(&self.weight_name(l), &[i, o], 0.0)?;
            store.init_const(&self.bias_name(l), &[1, o], 0.0)?;
        }
        Ok(())
    }

    /// Forward pass over the rows of `x: [B, widths[0]]`.
    pub fn forward(&self, p: &Bound, x: &Tensor) -> Result<Tensor> {
        let (_, cols) = x.dims2();
        if x.shape().len() != 2 || cols != self.input_dim() {
            return Err(Error::shape(format!("mlp {}", self.name), &[x.shape(), &[self.input_dim()]]));
        }
        let mut h = x.clone();
        for l in 0..self.layers() {
            h = h.matmul(p.get(&self.weight_name(l))?)?.add(p.get(&self.bias_name(l))?)?;
            if l + 1 < self.layers() {
                h = self.activation.apply(&h)?;
            }
        }
        Ok(h)
    }
}
