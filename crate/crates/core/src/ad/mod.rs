//! Reverse-mode automatic differentiation over small dense `f64` tensors.
//!
//! A [`Graph`] is an append-only list of nodes. Any primitive applied to a
//! graph-attached [`Tensor`] records a node; primitives over detached tensors
//! just compute values. [`jvp`] builds forward-mode tangents out of the same
//! primitives, so directional derivatives can themselves be differentiated by
//! [`Graph::backward`].

mod check;
mod jvp;
pub mod ops;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

pub use check::{grad_check, GradCheckReport, ScalarFunction, TapeFunction};
pub use jvp::{jvp, jvp_many};
pub use ops::Primitive;

use crate::error::{Error, Result};
use ops::View;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf,
    Op(Primitive),
}

#[derive(Debug)]
struct Node {
    kind: NodeKind,
    inputs: Vec<usize>,
    value: Rc<Vec<f64>>,
    shape: Vec<usize>,
    aux: Vec<usize>,
    serial: u64,
}

#[derive(Debug, Default)]
struct GraphInner {
    nodes: Vec<Node>,
    next_serial: u64,
    params: BTreeMap<String, usize>,
    backward_done: bool,
}

/// Shared handle to a computation graph. Cloning shares the same graph.
#[derive(Clone, Default)]
pub struct Graph(Rc<RefCell<GraphInner>>);

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({} nodes)", self.len())
    }
}

#[derive(Clone)]
struct NodeRef {
    graph: Graph,
    id: usize,
    serial: u64,
}

/// A dense row-major tensor of rank 0, 1 or 2, optionally attached to a graph.
#[derive(Clone)]
pub struct Tensor {
    data: Rc<Vec<f64>>,
    shape: Vec<usize>,
    node: Option<NodeRef>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Tensor");
        d.field("shape", &self.shape).field("data", &self.data);
        if let Some(n) = &self.node {
            d.field("node", &n.id);
        }
        d.finish()
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: impl Into<Vec<f64>>) -> Result<Self> {
        let shape = shape.into();
        let data = data.into();
        if shape.len() > 2 || ops::numel(&shape) != data.len() {
            return Err(Error::Shape {
                op: "tensor".into(),
                shapes: vec![shape, vec![data.len()]],
            });
        }
        Ok(Tensor {
            data: Rc::new(data),
            shape,
            node: None,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            data: Rc::new(vec![v]),
            shape: vec![],
            node: None,
        }
    }

    pub fn vector(data: impl Into<Vec<f64>>) -> Self {
        let data = data.into();
        Tensor {
            shape: vec![data.len()],
            data: Rc::new(data),
            node: None,
        }
    }

    /// A single row `[1, n]`.
    pub fn row(data: impl Into<Vec<f64>>) -> Self {
        let data = data.into();
        Tensor {
            shape: vec![1, data.len()],
            data: Rc::new(data),
            node: None,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: impl Into<Vec<f64>>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        Tensor {
            data: Rc::new(vec![0.0; ops::numel(&shape)]),
            shape,
            node: None,
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, v: f64) -> Self {
        let shape = shape.into();
        Tensor {
            data: Rc::new(vec![v; ops::numel(&shape)]),
            shape,
            node: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.to_vec()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Rows and columns after left-padding to rank 2.
    pub fn dims2(&self) -> (usize, usize) {
        ops::as_2d(&self.shape)
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::shape("item", &[&self.shape]))
        }
    }

    pub fn is_attached(&self) -> bool {
        self.node.is_some()
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.node.as_ref().map(|n| &n.graph)
    }

    pub fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|n| n.id)
    }

    /// Same values, no graph.
    pub fn detach(&self) -> Tensor {
        Tensor {
            data: Rc::clone(&self.data),
            shape: self.shape.clone(),
            node: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn apply(&self, op: Primitive) -> Result<Tensor> {
        apply_primitive(op, &[self])
    }

    fn apply2(&self, op: Primitive, other: &Tensor) -> Result<Tensor> {
        apply_primitive(op, &[self, other])
    }

    pub fn add(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::Add, o)
    }
    pub fn sub(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::Sub, o)
    }
    pub fn mul(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::Mul, o)
    }
    pub fn div(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::Div, o)
    }
    pub fn matmul(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::MatMul, o)
    }
    pub fn pairwise_dist(&self, o: &Tensor) -> Result<Tensor> {
        self.apply2(Primitive::PairwiseDist, o)
    }
    pub fn exp(&self) -> Result<Tensor> {
        self.apply(Primitive::Exp)
    }
    pub fn log(&self) -> Result<Tensor> {
        self.apply(Primitive::Log)
    }
    pub fn tanh(&self) -> Result<Tensor> {
        self.apply(Primitive::Tanh)
    }
    pub fn sigmoid(&self) -> Result<Tensor> {
        self.apply(Primitive::Sigmoid)
    }
    pub fn softplus(&self) -> Result<Tensor> {
        self.apply(Primitive::Softplus)
    }
    pub fn square(&self) -> Result<Tensor> {
        self.apply(Primitive::Square)
    }
    pub fn sqrt(&self) -> Result<Tensor> {
        self.apply(Primitive::Sqrt)
    }
    pub fn neg(&self) -> Result<Tensor> {
        self.apply(Primitive::Neg)
    }
    pub fn scale(&self, c: f64) -> Result<Tensor> {
        self.apply(Primitive::Scale(c))
    }
    pub fn offset(&self, c: f64) -> Result<Tensor> {
        self.apply(Primitive::Offset(c))
    }
    pub fn relu_smooth(&self, d: f64) -> Result<Tensor> {
        self.apply(Primitive::ReluSmooth(d))
    }
    pub fn ramp(&self, d: f64) -> Result<Tensor> {
        self.apply(Primitive::Ramp(d))
    }
    pub fn sum(&self) -> Result<Tensor> {
        self.apply(Primitive::Sum)
    }
    pub fn mean(&self) -> Result<Tensor> {
        self.apply(Primitive::Mean)
    }
    /// Sum along `axis` keeping the reduced dimension.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.apply(Primitive::SumAxis(axis))
    }
    /// Minimum along `axis` keeping the reduced dimension.
    pub fn min_over_axis(&self, axis: usize) -> Result<Tensor> {
        self.apply(Primitive::MinOverAxis(axis))
    }
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        self.apply(Primitive::Slice { axis, start, len })
    }
    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Tensor> {
        self.apply(Primitive::Reshape(shape.into()))
    }

    /// Splits along `axis` into consecutive pieces of the given sizes.
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &len in sizes {
            out.push(self.slice(axis, start, len)?);
            start += len;
        }
        let (r, c) = self.dims2();
        let total = if axis == 0 { r } else { c };
        if start != total {
            return Err(Error::shape("split", &[&self.shape, sizes]));
        }
        Ok(out)
    }

    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let refs: Vec<&Tensor> = parts.iter().collect();
        apply_primitive(Primitive::Concat(axis), &refs)
    }

    /// Squared Euclidean norm of each row, `[B, 1]`.
    pub fn row_sq_norm(&self) -> Result<Tensor> {
        self.square()?.sum_axis(1)
    }
}

/// Applies one primitive. Records a node when any input is graph-attached.
pub fn apply_primitive(kind: Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    let mut graph: Option<&Graph> = None;
    for t in inputs {
        if let Some(n) = &t.node {
            match graph {
                None => graph = Some(&n.graph),
                Some(g) if *g == n.graph => {}
                Some(_) => return Err(Error::GraphMismatch),
            }
        }
    }
    let views: Vec<View> = inputs
        .iter()
        .map(|t| View {
            data: &t.data,
            shape: &t.shape,
        })
        .collect();
    let fwd = ops::forward(&kind, &views)?;
    let data = Rc::new(fwd.data);
    let node = match graph {
        None => None,
        Some(g) => {
            let mut ids = Vec::with_capacity(inputs.len());
            for t in inputs {
                ids.push(match &t.node {
                    Some(n) => g.check(n)?,
                    None => g.push_leaf(Rc::clone(&t.data), t.shape.clone()),
                });
            }
            let id = g.push(NodeKind::Op(kind), ids, Rc::clone(&data), fwd.shape.clone(), fwd.aux);
            let serial = g.0.borrow().nodes[id].serial;
            Some(NodeRef {
                graph: g.clone(),
                id,
                serial,
            })
        }
    };
    Ok(Tensor {
        data,
        shape: fwd.shape,
        node,
    })
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    params: BTreeMap<String, Tensor>,
    nodes: Vec<Option<Vec<f64>>>,
    serials: Vec<u64>,
}

impl Gradients {
    /// ∂root/∂param by parameter name (zeros when the root does not depend on it).
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }

    /// ∂root/∂t for any tensor on the same graph, zeros if unreachable.
    pub fn wrt(&self, t: &Tensor) -> Option<Tensor> {
        let n = t.node.as_ref()?;
        if self.serials.get(n.id) != Some(&n.serial) {
            return None;
        }
        let data = self.nodes[n.id].clone().unwrap_or_else(|| vec![0.0; t.numel()]);
        Some(Tensor {
            data: Rc::new(data),
            shape: t.shape.clone(),
            node: None,
        })
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.0.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push_leaf(&self, value: Rc<Vec<f64>>, shape: Vec<usize>) -> usize {
        self.push(NodeKind::Leaf, Vec::new(), value, shape, Vec::new())
    }

    fn push(&self, kind: NodeKind, inputs: Vec<usize>, value: Rc<Vec<f64>>, shape: Vec<usize>, aux: Vec<usize>) -> usize {
        let mut g = self.0.borrow_mut();
        let serial = g.next_serial;
        g.next_serial += 1;
        g.nodes.push(Node {
            kind,
            inputs,
            value,
            shape,
            aux,
            serial,
        });
        g.nodes.len() - 1
    }

    fn check(&self, n: &NodeRef) -> Result<usize> {
        let g = self.0.borrow();
        match g.nodes.get(n.id) {
            Some(node) if node.serial == n.serial => Ok(n.id),
            _ => Err(Error::StaleNode(n.id)),
        }
    }

    fn handle(&self, id: usize) -> Tensor {
        let g = self.0.borrow();
        let node = &g.nodes[id];
        Tensor {
            data: Rc::clone(&node.value),
            shape: node.shape.clone(),
            node: Some(NodeRef {
                graph: self.clone(),
                id,
                serial: node.serial,
            }),
        }
    }

    fn attach(&self, t: &Tensor) -> Tensor {
        let id = self.push_leaf(Rc::clone(&t.data), t.shape.clone());
        self.handle(id)
    }

    /// Registers a named trainable leaf.
    pub fn param(&self, name: &str, value: &Tensor) -> Result<Tensor> {
        if self.0.borrow().params.contains_key(name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        let t = self.attach(value);
        let id = t.node_id().expect("attached");
        self.0.borrow_mut().params.insert(name.to_string(), id);
        Ok(t)
    }

    /// Attaches a non-trainable leaf (an input whose gradient may still be queried).
    pub fn input(&self, value: &Tensor) -> Tensor {
        self.attach(value)
    }

    /// Number of nodes; pass to [`Graph::truncate`] to discard everything recorded afterwards.
    pub fn mark(&self) -> usize {
        self.len()
    }

    /// Drops nodes recorded after `mark`. Handles to dropped nodes become stale.
    pub fn truncate(&self, mark: usize) {
        let mut g = self.0.borrow_mut();
        if mark < g.nodes.len() {
            g.nodes.truncate(mark);
            g.params.retain(|_, id| *id < mark);
        }
    }

    pub fn clear_grads(&self) {
        self.0.borrow_mut().backward_done = false;
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: &Tensor) -> Result<Gradients> {
        let node = root.node.as_ref().ok_or(Error::DetachedRoot)?;
        if node.graph != *self {
            return Err(Error::GraphMismatch);
        }
        if root.numel() != 1 {
            return Err(Error::NonScalarRoot(root.shape.clone()));
        }
        let root_id = self.check(node)?;
        if self.0.borrow().backward_done {
            return Err(Error::BackwardTwice);
        }
        let g = self.0.borrow();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root_id + 1];
        grads[root_id] = Some(vec![1.0]);
        for id in (0..=root_id).rev() {
            let Some(gout) = grads[id].take() else { continue };
            let n = &g.nodes[id];
            if let NodeKind::Op(op) = &n.kind {
                let views: Vec<View> = n
                    .inputs
                    .iter()
                    .map(|&i| View {
                        data: &g.nodes[i].value,
                        shape: &g.nodes[i].shape,
                    })
                    .collect();
                let out = View {
                    data: &n.value,
                    shape: &n.shape,
                };
                let contribs = ops::vjp(op, &views, out, &n.aux, &gout);
                for (&i, c) in n.inputs.iter().zip(contribs) {
                    match &mut grads[i] {
                        Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, v)| *a += v),
                        slot @ None => *slot = Some(c),
                    }
                }
            }
            grads[id] = Some(gout);
        }
        let mut params = BTreeMap::new();
        for (name, &id) in &g.params {
            let data = grads
                .get(id)
                .and_then(|v| v.clone())
                .unwrap_or_else(|| vec![0.0; g.nodes[id].value.len()]);
            params.insert(
                name.clone(),
                Tensor {
                    data: Rc::new(data),
                    shape: g.nodes[id].shape.clone(),
                    node: None,
                },
            );
        }
        grads.resize(g.nodes.len(), None);
        let serials = g.nodes.iter().map(|n| n.serial).collect();
        drop(g);
        self.0.borrow_mut().backward_done = true;
        Ok(Gradients {
            params,
            nodes: grads,
            serials,
        })
    }

    /// Re-evaluates every recorded node from the stored leaves.
    pub fn replay(&self) -> Result<Vec<Vec<f64>>> {
        let g = self.0.borrow();
        let mut values: Vec<Rc<Vec<f64>>> = Vec::with_capacity(g.nodes.len());
        for n in &g.nodes {
            let v = match &n.kind {
                NodeKind::Leaf => Rc::clone(&n.value),
                NodeKind::Op(op) => {
                    let views: Vec<View> = n
                        .inputs
                        .iter()
                        .map(|&i| View {
                            data: &values[i],
                            shape: &g.nodes[i].shape,
                        })
                        .collect();
                    Rc::new(ops::forward(op, &views)?.data)
                }
            };
            values.push(v);
        }
        Ok(values.into_iter().map(|v| v.to_vec()).collect())
    }

    /// Stored node values, in recording order.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.0.borrow().nodes.iter().map(|n| n.value.to_vec()).collect()
    }

    pub(crate) fn node_parts(&self, id: usize) -> (Option<Primitive>, Vec<usize>, Vec<usize>) {
        let g = self.0.borrow();
        let n = &g.nodes[id];
        let op = match &n.kind {
            NodeKind::Op(op) => Some(op.clone()),
            NodeKind::Leaf => None,
        };
        (op, n.inputs.clone(), n.aux.clone())
    }

    pub(crate) fn tensor(&self, id: usize) -> Tensor {
        self.handle(id)
    }

    pub(crate) fn check_tensor(&self, t: &Tensor) -> Result<usize> {
        match &t.node {
            Some(n) if n.graph == *self => self.check(n),
            Some(_) => Err(Error::GraphMismatch),
            None => Err(Error::DetachedRoot),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn add_elementwise() {
        let a = Tensor::vector([1.0, 2.0]);
        let b = Tensor::vector([3.0, 4.0]);
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn exp_of_zero() {
        assert_eq!(Tensor::vector([0.0]).exp().unwrap().data(), &[1.0]);
    }

    #[test]
    fn identity_matmul() {
        let i2 = Tensor::matrix(2, 2, [1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = Tensor::matrix(2, 1, [5.0, 7.0]).unwrap();
        let out = i2.matmul(&v).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.data(), &[5.0, 7.0]);
    }

    #[test]
    fn shape_mismatch_names_kind_and_shapes() {
        let a = Tensor::vector([1.0, 2.0, 3.0]);
        let b = Tensor::vector([1.0, 2.0]);
        match a.add(&b) {
            Err(Error::Shape { op, shapes }) => {
                assert_eq!(op, "add");
                assert_eq!(shapes, vec![vec![3], vec![2]]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
        let m = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(m.matmul(&m), Err(Error::Shape { .. })));
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!("einsum".parse::<Primitive>(), Err(Error::UnknownPrimitive(_))));
    }

    #[test]
    fn detached_inputs_stay_detached() {
        let a = Tensor::vector([1.0]);
        assert!(!a.exp().unwrap().is_attached());
        let g = Graph::new();
        let x = g.input(&a);
        let y = x.add(&a).unwrap();
        assert!(y.is_attached());
    }

    #[test]
    fn broadcasting_rows_and_columns() {
        let m = Tensor::matrix(2, 3, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let row = Tensor::row([10.0, 20.0, 30.0]);
        let col = Tensor::matrix(2, 1, [100.0, 200.0]).unwrap();
        assert_eq!(m.add(&row).unwrap().data(), &[11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
        assert_eq!(m.mul(&col).unwrap().data(), &[100.0, 200.0, 300.0, 800.0, 1000.0, 1200.0]);
        assert_eq!(m.scale(2.0).unwrap().shape(), &[2, 3]);
    }

    #[test]
    fn square_gradient() {
        let g = Graph::new();
        let x = g.param("x", &Tensor::scalar(3.0)).unwrap();
        let y = x.square().unwrap();
        let grads = g.backward(&y).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[6.0]);
    }

    #[test]
    fn softplus_gradient_at_zero() {
        let g = Graph::new();
        let x = g.param("x", &Tensor::scalar(0.0)).unwrap();
        let y = x.softplus().unwrap();
        let grads = g.backward(&y).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[0.5]);
    }

    #[test]
    fn backward_rejects_bad_roots() {
        let g = Graph::new();
        let x = g.param("x", &Tensor::vector([1.0, 2.0])).unwrap();
        assert!(matches!(g.backward(&x), Err(Error::NonScalarRoot(_))));
        assert!(matches!(g.backward(&Tensor::scalar(1.0)), Err(Error::DetachedRoot)));
        let s = x.sum().unwrap();
        g.backward(&s).unwrap();
        assert!(matches!(g.backward(&s), Err(Error::BackwardTwice)));
        g.clear_grads();
        assert!(g.backward(&s).is_ok());
    }

    #[test]
    fn mixing_graphs_rejected() {
        let g1 = Graph::new();
        let g2 = Graph::new();
        let a = g1.input(&Tensor::scalar(1.0));
        let b = g2.input(&Tensor::scalar(1.0));
        assert!(matches!(a.add(&b), Err(Error::GraphMismatch)));
    }

    #[test]
    fn truncate_invalidates_handles() {
        let g = Graph::new();
        let x = g.input(&Tensor::scalar(2.0));
        let mark = g.mark();
        let y = x.exp().unwrap();
        g.truncate(mark);
        let z = x.square().unwrap(); // reuses the slot
        assert!(matches!(y.add(&z), Err(Error::StaleNode(_))));
    }

    #[test]
    fn matmul_gradient_matches_outer_product() {
        let w = Tensor::matrix(2, 3, [0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap();
        let v = Tensor::matrix(3, 1, [1.0, 2.0, -1.0]).unwrap();
        let g = Graph::new();
        let wp = g.param("w", &w).unwrap();
        let root = wp.matmul(&v).unwrap().sum().unwrap();
        let gw = g.backward(&root).unwrap().get("w").unwrap().to_vec();
        assert_eq!(gw, vec![1.0, 2.0, -1.0, 1.0, 2.0, -1.0]);
    }

    #[test]
    fn min_over_axis_routes_to_first_min() {
        let g = Graph::new();
        let x = g.param("x", &Tensor::matrix(1, 3, [2.0, 1.0, 1.0]).unwrap()).unwrap();
        let m = x.min_over_axis(1).unwrap().sum().unwrap();
        let gx = g.backward(&m).unwrap().get("x").unwrap().to_vec();
        assert_eq!(gx, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn replay_is_bit_identical() {
        let g = Graph::new();
        let x = g.param("x", &Tensor::matrix(2, 2, [0.3, -1.2, 2.5, 0.7]).unwrap()).unwrap();
        let y = x.tanh().unwrap().matmul(&x).unwrap().softplus().unwrap();
        let _ = y.relu_smooth(0.1).unwrap().mean().unwrap();
        let replayed = g.replay().unwrap();
        let stored = g.values();
        assert_eq!(replayed.len(), stored.len());
        for (a, b) in replayed.iter().zip(&stored) {
            let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pairwise_dist_values() {
        let a = Tensor::matrix(2, 2, [0.0, 0.0, 3.0, 4.0]).unwrap();
        let b = Tensor::matrix(1, 2, [0.0, 0.0]).unwrap();
        assert_eq!(a.pairwise_dist(&b).unwrap().data(), &[0.0, 5.0]);
    }

    #[test]
    fn gradient_wrt_input() {
        let g = Graph::new();
        let x = g.input(&Tensor::vector([1.0, -2.0]));
        let y = x.square().unwrap().sum().unwrap();
        let grads = g.backward(&y).unwrap();
        assert_eq!(grads.wrt(&x).unwrap().data(), &[2.0, -4.0]);
        assert!(grads.params().is_empty());
    }

    #[test]
    fn split_and_concat_invert() {
        let m = Tensor::matrix(2, 3, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let parts = m.split(1, &[1, 2]).unwrap();
        assert_eq!(parts[1].data(), &[2.0, 3.0, 5.0, 6.0]);
        let back = Tensor::concat(&parts, 1).unwrap();
        assert_eq!(back.data(), m.data());
        assert!(m.split(1, &[1, 1]).is_err());
        assert!(close(m.mean().unwrap().item().unwrap(), 3.5, 1e-15));
    }
}
