//! Named parameter storage and binding into graphs.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::ad::{Graph, Tensor};
use crate::error::{Error, Result};

/// Serialized form of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Parameters keyed by name. Iteration order is by name, never by insertion.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::DuplicateParam(name));
        }
        self.entries.insert(name, value.detach());
        Ok(())
    }

    /// Replaces an existing entry, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self.entries.get_mut(name).ok_or_else(|| Error::MissingParam(name.to_string()))?;
        if slot.shape() != value.shape() {
            return Err(Error::shape(format!("set {name}"), &[slot.shape(), value.shape()]));
        }
        *slot = value.detach();
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Registers every entry as a trainable leaf of `graph`.
    pub fn bind(&self, graph: &Graph) -> Result<Bound> {
        let mut map = BTreeMap::new();
        for (name, t) in &self.entries {
            map.insert(name.clone(), graph.param(name, t)?);
        }
        Ok(Bound { map })
    }

    /// Attaches every entry as a constant leaf of `graph` (no parameter gradients).
    pub fn bind_frozen(&self, graph: &Graph) -> Bound {
        let map = self.entries.iter().map(|(n, t)| (n.clone(), graph.input(t))).collect();
        Bound { map }
    }

    /// Plain detached tensors.
    pub fn detached(&self) -> Bound {
        Bound {
            map: self.entries.clone(),
        }
    }

    /// Flattens values in name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries.values().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Inverse of [`ParamStore::flatten`].
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamStore> {
        if flat.len() != self.numel() {
            return Err(Error::shape("unflatten", &[&[self.numel()], &[flat.len()]]));
        }
        let mut off = 0;
        let mut entries = BTreeMap::new();
        for (name, t) in &self.entries {
            let n = t.numel();
            entries.insert(name.clone(), Tensor::new(t.shape().to_vec(), flat[off..off + n].to_vec())?);
            off += n;
        }
        Ok(ParamStore { entries })
    }

    pub fn to_records(&self) -> BTreeMap<String, ParamRecord> {
        self.entries
            .iter()
            .map(|(n, t)| {
                (
                    n.clone(),
                    ParamRecord {
                        shape: t.shape().to_vec(),
                        data: t.to_vec(),
                    },
                )
            })
            .collect()
    }

    pub fn from_records(records: &BTreeMap<String, ParamRecord>) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for (n, r) in records {
            store.insert(n.clone(), Tensor::new(r.shape.clone(), r.data.clone())?)?;
        }
        Ok(store)
    }

    /// Uniform(−bound, bound) initialization.
    pub fn init_uniform(&mut self, name: &str, shape: &[usize], bound: f64, rng: &mut impl Rng) -> Result<()> {
        let n = shape.iter().product();
        let data: Vec<f64> = if bound > 0.0 {
            let dist = Uniform::new_inclusive(-bound, bound).map_err(|e| Error::config(e.to_string()))?;
            (0..n).map(|_| dist.sample(rng)).collect()
        } else {
            vec![0.0; n]
        };
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn init_const(&mut self, name: &str, shape: &[usize], value: f64) -> Result<()> {
        self.insert(name, Tensor::full(shape.to_vec(), value))
    }
}

/// Parameters resolved against one graph (or detached).
#[derive(Debug, Clone)]
pub struct Bound {
    map: BTreeMap<String, Tensor>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.map.get(name).ok_or_else(|| Error::MissingParam(name.to_string()))
    }
}
