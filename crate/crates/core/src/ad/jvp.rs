//! Forward-mode directional derivatives assembled from recorded primitives.
//!
//! `f` is traced once on the graph; every node it created is then revisited in
//! order and its tangent is built with ordinary primitives. The tangents are
//! regular graph nodes, so a later `backward` differentiates through them.

use super::ops::{self, Primitive};
use super::{Graph, Tensor};
use crate::error::{Error, Result};

/// D f(x)[v]. Returns `(f(x), tangent)`.
pub fn jvp<F>(graph: &Graph, f: F, x: &Tensor, v: &Tensor) -> Result<(Tensor, Tensor)>
where
    F: FnOnce(&Tensor) -> Result<Tensor>,
{
    let (y, mut t) = jvp_many(graph, f, x, std::slice::from_ref(v))?;
    Ok((y, t.pop().expect("one tangent")))
}

/// Directional derivatives along several directions sharing one primal trace.
///
/// `f` must build its result from its argument (and from tensors that do not
/// depend on `x`); values derived from `x` before the call are treated as
/// constants.
pub fn jvp_many<F>(graph: &Graph, f: F, x: &Tensor, directions: &[Tensor]) -> Result<(Tensor, Vec<Tensor>)>
where
    F: FnOnce(&Tensor) -> Result<Tensor>,
{
    for v in directions {
        if v.shape() != x.shape() {
            return Err(Error::shape("jvp", &[x.shape(), v.shape()]));
        }
    }
    let x = match x.graph() {
        Some(g) if g == graph => x.clone(),
        Some(_) => return Err(Error::GraphMismatch),
        None => graph.input(x),
    };
    let x_id = graph.check_tensor(&x)?;
    let start = graph.mark();
    let y = f(&x)?;
    let end = graph.mark();
    let y_id = match y.graph() {
        Some(_) => graph.check_tensor(&y)?,
        // result does not touch the graph at all: derivative is zero
        None => {
            let zeros = directions.iter().map(|_| Tensor::zeros(y.shape().to_vec())).collect();
            return Ok((y, zeros));
        }
    };

    let mut out = Vec::with_capacity(directions.len());
    for v in directions {
        let mut tangents: Vec<Option<Tensor>> = vec![None; end - start];
        let lookup = |tangents: &Vec<Option<Tensor>>, id: usize| -> Option<Tensor> {
            if id == x_id {
                Some(v.clone())
            } else if id >= start && id < end {
                tangents[id - start].clone()
            } else {
                None
            }
        };
        for id in start..end {
            let (op, inputs, aux) = graph.node_parts(id);
            let Some(op) = op else { continue };
            let tin: Vec<Option<Tensor>> = inputs.iter().map(|&i| lookup(&tangents, i)).collect();
            if tin.iter().all(Option::is_none) {
                continue;
            }
            let prim: Vec<Tensor> = inputs.iter().map(|&i| graph.tensor(i)).collect();
            let yv = graph.tensor(id);
            tangents[id - start] = Some(tangent_rule(&op, &prim, &yv, &aux, &tin)?);
        }
        let t = match lookup(&tangents, y_id) {
            Some(t) => t,
            None => Tensor::zeros(y.shape().to_vec()),
        };
        out.push(t);
    }
    Ok((y, out))
}

fn broadcast_to(t: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if t.shape() == shape {
        Ok(t.clone())
    } else {
        t.add(&Tensor::zeros(shape.to_vec()))
    }
}

fn tangent_rule(op: &Primitive, x: &[Tensor], y: &Tensor, aux: &[usize], t: &[Option<Tensor>]) -> Result<Tensor> {
    let t0 = || t[0].clone().expect("unary tangent present");
    let out_shape = y.shape();
    let sum_opt = |a: Option<Tensor>, b: Option<Tensor>| -> Result<Tensor> {
        match (a, b) {
            (Some(a), Some(b)) => broadcast_to(&a.add(&b)?, out_shape),
            (Some(a), None) | (None, Some(a)) => broadcast_to(&a, out_shape),
            (None, None) => unreachable!("at least one tangent"),
        }
    };
    match op {
        Primitive::Add => sum_opt(t[0].clone(), t[1].clone()),
        Primitive::Sub => sum_opt(t[0].clone(), t[1].as_ref().map(|b| b.neg()).transpose()?),
        Primitive::Mul => sum_opt(
            t[0].as_ref().map(|ta| ta.mul(&x[1])).transpose()?,
            t[1].as_ref().map(|tb| x[0].mul(tb)).transpose()?,
        ),
        Primitive::Div => sum_opt(
            t[0].as_ref().map(|ta| ta.div(&x[1])).transpose()?,
            t[1].as_ref().map(|tb| y.mul(tb)?.div(&x[1])?.neg()).transpose()?,
        ),
        Primitive::MatMul => sum_opt(
            t[0].as_ref().map(|ta| ta.matmul(&x[1])).transpose()?,
            t[1].as_ref().map(|tb| x[0].matmul(tb)).transpose()?,
        ),
        Primitive::Exp => y.mul(&t0()),
        Primitive::Log => t0().div(&x[0]),
        Primitive::Tanh => {
            let tt = t0();
            tt.sub(&tt.mul(&y.square()?)?)
        }
        Primitive::Sigmoid => t0().mul(&y.sub(&y.square()?)?),
        Primitive::Softplus => t0().mul(&x[0].sigmoid()?),
        Primitive::Square => x[0].mul(&t0())?.scale(2.0),
        Primitive::Sqrt => t0().div(y)?.scale(0.5),
        Primitive::Neg => t0().neg(),
        Primitive::Scale(c) => t0().scale(*c),
        Primitive::Offset(_) => Ok(t0()),
        Primitive::ReluSmooth(d) => t0().mul(&x[0].ramp(*d)?),
        Primitive::Ramp(d) => {
            // piecewise linear: slope is constant on each piece
            let slope: Vec<f64> = x[0]
                .data()
                .iter()
                .map(|&v| if v > 0.0 && v < *d { 1.0 / d } else { 0.0 })
                .collect();
            t0().mul(&Tensor::new(x[0].shape().to_vec(), slope)?)
        }
        Primitive::Sum => t0().sum(),
        Primitive::Mean => t0().mean(),
        Primitive::SumAxis(a) => t0().sum_axis(*a),
        Primitive::MinOverAxis(a) => {
            let mut mask = vec![0.0; x[0].numel()];
            for &i in aux {
                mask[i] = 1.0;
            }
            t0().mul(&Tensor::new(x[0].shape().to_vec(), mask)?)?.sum_axis(*a)
        }
        Primitive::Concat(a) => {
            let parts = x
                .iter()
                .zip(t)
                .map(|(xi, ti)| ti.clone().unwrap_or_else(|| Tensor::zeros(xi.shape().to_vec())))
                .collect::<Vec<_>>();
            Tensor::concat(&parts, *a)
        }
        Primitive::Slice { axis, start, len } => t0().slice(*axis, *start, *len),
        Primitive::Reshape(s) => t0().reshape(s.clone()),
        Primitive::PairwiseDist => Err(Error::NoTangentRule(op.name().to_string())),
    }
    .and_then(|r| {
        debug_assert_eq!(ops::numel(r.shape()), ops::numel(out_shape));
        Ok(r)
    })
}
