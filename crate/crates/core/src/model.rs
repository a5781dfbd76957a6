//! The StableNODE model: input map φ, nominal field f, Lyapunov candidate V,
//! output map ψ and the corrective constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::field::{CorrectiveParams, FieldParts};
use crate::nets::{Activation, CouplingStack, LyapunovMode, LyapunovSpec, MlpSpec};
use crate::params::{Bound, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InputMap {
    Identity,
    Mlp(MlpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputMap {
    Identity,
    Coupling(CouplingStack),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Latent dimension.
    pub n_x: usize,
    /// Output (and observation) dimension.
    pub n_z: usize,
    pub phi: InputMap,
    pub nominal: MlpSpec,
    pub lyapunov: LyapunovSpec,
    pub psi: OutputMap,
    pub corrective: CorrectiveParams,
}

impl ModelSpec {
    /// Identity maps, `n`-dimensional latent space, tanh nominal field and
    /// softplus ICNN terms.
    pub fn new(
        n: usize,
        nominal_hidden: &[usize],
        lyapunov_hidden: &[usize],
        mode: LyapunovMode,
        attractors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut widths = vec![n];
        widths.extend_from_slice(nominal_hidden);
        widths.push(n);
        let spec = ModelSpec {
            n_x: n,
            n_z: n,
            phi: InputMap::Identity,
            nominal: MlpSpec::new("f", widths, Activation::Tanh)?,
            lyapunov: LyapunovSpec::new(mode, attractors, n, lyapunov_hidden)?,
            psi: OutputMap::Identity,
            corrective: CorrectiveParams::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_corrective(mut self, c: CorrectiveParams) -> Result<Self> {
        c.validate()?;
        self.corrective = c;
        Ok(self)
    }

    pub fn with_coupling(mut self, layers: usize, hidden: &[usize]) -> Result<Self> {
        self.psi = OutputMap::Coupling(CouplingStack::new("psi", self.n_x, layers, hidden)?);
        self.validate()?;
        Ok(self)
    }

    pub fn with_input_mlp(mut self, hidden: &[usize]) -> Result<Self> {
        let mut widths = vec![self.n_z];
        widths.extend_from_slice(hidden);
        widths.push(self.n_x);
        self.phi = InputMap::Mlp(MlpSpec::new("phi", widths, Activation::Tanh)?);
        self.validate()?;
        Ok(self)
    }

    pub fn attractors(&self) -> &[Vec<f64>] {
        &self.lyapunov.attractors
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_z == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        self.corrective.validate()?;
        self.nominal.validate()?;
        if self.nominal.input_dim() != self.n_x || self.nominal.output_dim() != self.n_x {
            return Err(Error::config(format!(
                "nominal field must map ℝ^{0} → ℝ^{0}, has widths {1:?}",
                self.n_x, self.nominal.widths
            )));
        }
        self.lyapunov.validate(self.n_x)?;
        match &self.phi {
            InputMap::Identity if self.n_x != self.n_z => {
                return Err(Error::config("identity input map needs n_x = n_z"));
            }
            InputMap::Mlp(m) => {
                m.validate()?;
                if m.input_dim() != self.n_z || m.output_dim() != self.n_x {
                    return Err(Error::config(format!("input map widths {:?} do not match dimensions", m.widths)));
                }
            }
            _ => {}
        }
        match &self.psi {
            OutputMap::Identity if self.n_x != self.n_z => {
                return Err(Error::config("identity output map needs n_x = n_z"));
            }
            OutputMap::Coupling(c) => {
                c.validate()?;
                if c.dim != self.n_x || self.n_x != self.n_z {
                    return Err(Error::config("coupling output map needs n_x = n_z = stack dimension"));
                }
            }
            _ => {}
        }
        for (i, a) in self.attractors().iter().enumerate() {
            if a.len() != self.n_z {
                return Err(Error::config(format!(
                    "attractor {i} has dimension {}, expected {}",
                    a.len(),
                    self.n_z
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("attractor {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Fresh random parameters.
    pub fn init_params(&self, seed: u64) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        self.nominal.init(&mut store, &mut rng)?;
        self.lyapunov.init(&mut store, &mut rng)?;
        if let InputMap::Mlp(m) = &self.phi {
            m.init(&mut store, &mut rng)?;
        }
        if let OutputMap::Coupling(c) = &self.psi {
            c.init(&mut store, &mut rng, 0.1)?;
        }
        Ok(store)
    }

    /// Checks that `store` holds exactly the parameters this spec uses, with matching shapes.
    pub fn check_params(&self, store: &ParamStore) -> Result<()> {
        let reference = self.init_params(0)?;
        for (name, t) in reference.iter() {
            let got = store.get(name)?;
            if got.shape() != t.shape() {
                return Err(Error::shape(format!("parameter {name}"), &[t.shape(), got.shape()]));
            }
        }
        if let Some(extra) = store.names().find(|n| !reference.contains(n)) {
            return Err(Error::config(format!("unexpected parameter `{extra}`")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StableNodeModel {
    pub spec: ModelSpec,
    pub params: ParamStore,
}

impl StableNodeModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let params = spec.init_params(seed)?;
        Ok(StableNodeModel { spec, params })
    }

    pub fn from_parts(spec: ModelSpec, params: ParamStore) -> Result<Self> {
        spec.validate()?;
        spec.check_params(&params)?;
        Ok(StableNodeModel { spec, params })
    }

    /// Parameters registered as trainable leaves of `graph`.
    pub fn bind(&self, graph: &Graph) -> Result<BoundModel<'_>> {
        BoundModel::with(&self.spec, graph.clone(), self.params.bind(graph)?)
    }

    /// Detached parameters on a private scratch graph.
    pub fn frozen(&self) -> Result<BoundModel<'_>> {
        BoundModel::with(&self.spec, Graph::new(), self.params.detached())
    }

    pub fn latent_attractors(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.frozen()?.latent.iter().map(Tensor::to_vec).collect())
    }
}

/// A model whose parameters are resolved against one graph. The latent
/// attractors ψ⁻¹(Z_e) are computed once at bind time from the bound
/// parameters, so gradients reach ψ through them.
pub struct BoundModel<'m> {
    pub spec: &'m ModelSpec,
    pub graph: Graph,
    pub params: Bound,
    pub latent: Vec<Tensor>,
}

impl<'m> BoundModel<'m> {
    /// Binds `spec` to parameters already resolved against `graph`.
    pub fn with(spec: &'m ModelSpec, graph: Graph, params: Bound) -> Result<Self> {
        let mut m = BoundModel {
            spec,
            graph,
            params,
            latent: Vec::new(),
        };
        m.latent = spec
            .attractors()
            .iter()
            .map(|z| m.decode_inverse(&Tensor::row(z.clone())))
            .collect::<Result<_>>()?;
        Ok(m)
    }

    pub fn corrective(&self) -> &CorrectiveParams {
        &self.spec.corrective
    }

    /// x = φ(y).
    pub fn encode(&self, y: &Tensor) -> Result<Tensor> {
        match &self.spec.phi {
            InputMap::Identity => Ok(y.clone()),
            InputMap::Mlp(m) => m.forward(&self.params, y),
        }
    }

    /// z = ψ(x).
    pub fn decode(&self, x: &Tensor) -> Result<Tensor> {
        match &self.spec.psi {
            OutputMap::Identity => Ok(x.clone()),
            OutputMap::Coupling(c) => c.forward(&self.params, x),
        }
    }

    /// x = ψ⁻¹(z).
    pub fn decode_inverse(&self, z: &Tensor) -> Result<Tensor> {
        match &self.spec.psi {
            OutputMap::Identity => Ok(z.clone()),
            OutputMap::Coupling(c) => c.inverse(&self.params, z),
        }
    }

    pub fn nominal(&self, x: &Tensor) -> Result<Tensor> {
        self.spec.nominal.forward(&self.params, x)
    }

    /// V(x), `[B, 1]`.
    pub fn lyapunov(&self, x: &Tensor) -> Result<Tensor> {
        self.spec.lyapunov.value(&self.params, x, &self.latent)
    }

    pub fn parts(&self, x: &Tensor) -> Result<FieldParts> {
        let f = self.nominal(x)?;
        let (v, grad_v) = self.spec.lyapunov.value_and_grad(&self.graph, &self.params, x, &self.latent)?;
        Ok(FieldParts { f, v, grad_v })
    }

    /// f̂(x) = f(x) + u(x).
    pub fn f_hat(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.parts(x)?.stabilize(&self.spec.corrective)?.2)
    }

    /// f̂ with nothing left on the graph.
    pub fn f_hat_detached(&self, x: &Tensor) -> Result<Tensor> {
        let mark = self.graph.mark();
        let out = self.f_hat(&x.detach()).map(|t| t.detach());
        self.graph.truncate(mark);
        out
    }

    /// Evaluates `f` and detaches its result, discarding any nodes it recorded.
    pub fn detached<T>(&self, f: impl FnOnce(&Self) -> Result<T>) -> Result<T> {
        let mark = self.graph.mark();
        let out = f(self);
        self.graph.truncate(mark);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(mode: LyapunovMode, attractors: Vec<Vec<f64>>) -> ModelSpec {
        ModelSpec::new(2, &[16], &[16], mode, attractors).unwrap()
    }

    #[test]
    fn identity_latent_attractors() {
        let m = StableNodeModel::new(simple(LyapunovMode::Single, vec![vec![0.0, 0.0]]), 1).unwrap();
        assert_eq!(m.latent_attractors().unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn coupling_latent_attractors_map_back() {
        let spec = simple(LyapunovMode::SigmoidBlend, vec![vec![0.0, 0.0], vec![0.0, -0.2]])
            .with_coupling(3, &[8])
            .unwrap();
        let mut params = spec.init_params(3).unwrap();
        // stronger coupling than the default init
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut fresh = ParamStore::new();
        if let OutputMap::Coupling(c) = &spec.psi {
            c.init(&mut fresh, &mut rng, 1.0).unwrap();
        }
        for (n, t) in fresh.iter() {
            params.set(n, t.clone()).unwrap();
        }
        let m = StableNodeModel::from_parts(spec, params).unwrap();
        let latent = m.latent_attractors().unwrap();
        assert_ne!(latent[0], latent[1]);
        let b = m.frozen().unwrap();
        for (x, z) in latent.iter().zip(m.spec.attractors()) {
            let back = b.decode(&Tensor::row(x.clone())).unwrap();
            for (a, e) in back.data().iter().zip(z) {
                assert!((a - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn detached_eval_leaves_graph_empty() {
        let m = StableNodeModel::new(simple(LyapunovMode::Single, vec![vec![0.0, 0.0]]), 1).unwrap();
        let b = m.frozen().unwrap();
        let before = b.graph.len();
        let v = b.f_hat_detached(&Tensor::row([0.3, 0.4])).unwrap();
        assert!(!v.is_attached());
        assert_eq!(b.graph.len(), before);
    }

    #[test]
    fn bad_dimensions_rejected() {
        assert!(ModelSpec::new(2, &[4], &[4], LyapunovMode::Single, vec![vec![0.0]]).is_err());
        let spec = simple(LyapunovMode::Single, vec![vec![0.0, 0.0]]);
        let mut wrong = spec.init_params(0).unwrap();
        wrong.insert("extra", Tensor::scalar(1.0)).unwrap();
        assert!(StableNodeModel::from_parts(spec, wrong).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = simple(LyapunovMode::Product, vec![vec![0.0, 0.0], vec![1.0, 0.0]])
            .with_coupling(2, &[4])
            .unwrap()
            .with_input_mlp(&[4])
            .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
