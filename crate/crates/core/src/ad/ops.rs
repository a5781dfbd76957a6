//! Primitive kinds with their forward kernels and vector-Jacobian products.
//!
//! Tensors are rank 0, 1 or 2. Elementwise binary primitives broadcast after
//! left-padding both shapes to rank 2; a dimension broadcasts when it is 1.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Softplus,
    Square,
    Sqrt,
    Neg,
    Scale(f64),
    Offset(f64),
    /// 0 below zero, y²/(2d) on (0, d), y − d/2 above.
    ReluSmooth(f64),
    /// Derivative of `ReluSmooth(d)`: clamp(y/d, 0, 1).
    Ramp(f64),
    Sum,
    Mean,
    SumAxis(usize),
    MinOverAxis(usize),
    Concat(usize),
    Slice {
        axis: usize,
        start: usize,
        len: usize,
    },
    Reshape(Vec<usize>),
    /// Euclidean distances between the rows of `[m, n]` and `[k, n]` inputs.
    PairwiseDist,
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::MatMul => "matmul",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Softplus => "softplus",
            Primitive::Square => "square",
            Primitive::Sqrt => "sqrt",
            Primitive::Neg => "neg",
            Primitive::Scale(_) => "scale",
            Primitive::Offset(_) => "offset",
            Primitive::ReluSmooth(_) => "relu_smooth",
            Primitive::Ramp(_) => "ramp",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::SumAxis(_) => "sum_axis",
            Primitive::MinOverAxis(_) => "min_over_axis",
            Primitive::Concat(_) => "concat",
            Primitive::Slice { .. } => "split",
            Primitive::Reshape(_) => "reshape",
            Primitive::PairwiseDist => "pairwise_dist",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::Add
            | Primitive::Sub
            | Primitive::Mul
            | Primitive::Div
            | Primitive::MatMul
            | Primitive::PairwiseDist => Some(2),
            Primitive::Concat(_) => None,
            _ => Some(1),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Scale(c) | Primitive::Offset(c) => write!(f, "{}:{c}", self.name()),
            Primitive::ReluSmooth(d) | Primitive::Ramp(d) => write!(f, "{}:{d}", self.name()),
            Primitive::SumAxis(a) | Primitive::MinOverAxis(a) | Primitive::Concat(a) => {
                write!(f, "{}:{a}", self.name())
            }
            Primitive::Slice { axis, start, len } => write!(f, "split:{axis}:{start}:{len}"),
            Primitive::Reshape(s) => write!(f, "reshape:{s:?}"),
            _ => f.write_str(self.name()),
        }
    }
}

/// Parses `name` or `name:arg[:arg...]`, e.g. `scale:2`, `relu_smooth:0.1`,
/// `min_over_axis:1`, `split:1:0:2`, `reshape:3x2`.
impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let bad = || Error::UnknownPrimitive(s.to_string());
        let float = |i: usize| -> Result<f64> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(bad)
        };
        let int = |i: usize, default: Option<usize>| -> Result<usize> {
            match args.get(i) {
                Some(a) => a.parse().map_err(|_| bad()),
                None => default.ok_or_else(bad),
            }
        };
        let prim = match name {
            "add" => Primitive::Add,
            "sub" => Primitive::Sub,
            "mul" => Primitive::Mul,
            "div" => Primitive::Div,
            "matmul" => Primitive::MatMul,
            "exp" => Primitive::Exp,
            "log" => Primitive::Log,
            "tanh" => Primitive::Tanh,
            "sigmoid" => Primitive::Sigmoid,
            "softplus" => Primitive::Softplus,
            "square" => Primitive::Square,
            "sqrt" => Primitive::Sqrt,
            "neg" => Primitive::Neg,
            "scale" => Primitive::Scale(float(0)?),
            "offset" => Primitive::Offset(float(0)?),
            "relu_smooth" => Primitive::ReluSmooth(float(0)?),
            "ramp" => Primitive::Ramp(float(0)?),
            "sum" => Primitive::Sum,
            "mean" => Primitive::Mean,
            "sum_axis" => Primitive::SumAxis(int(0, None)?),
            "min_over_axis" => Primitive::MinOverAxis(int(0, Some(1))?),
            "concat" => Primitive::Concat(int(0, Some(1))?),
            "split" | "slice" => Primitive::Slice {
                axis: int(0, None)?,
                start: int(1, None)?,
                len: int(2, None)?,
            },
            "reshape" => {
                let dims = args
                    .first()
                    .ok_or_else(bad)?
                    .split('x')
                    .filter(|d| !d.is_empty())
                    .map(|d| d.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Primitive::Reshape(dims)
            }
            "pairwise_dist" => Primitive::PairwiseDist,
            _ => return Err(bad()),
        };
        Ok(prim)
    }
}

/// Borrowed view of one operand.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub shape: &'a [usize],
}

pub(crate) struct Forward {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    /// Saved argmin indices for `MinOverAxis`.
    pub aux: Vec<usize>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Left-pads to rank 2.
pub(crate) fn as_2d(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (1, shape[0]),
        _ => (shape[0], shape[1]),
    }
}

fn broadcast_shape(op: &Primitive, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let err = || Error::shape(op.name(), &[a, b]);
    if a.len() > 2 || b.len() > 2 {
        return Err(err());
    }
    let (ar, ac) = as_2d(a);
    let (br, bc) = as_2d(b);
    let dim = |x: usize, y: usize| -> Result<usize> {
        if x == y || y == 1 {
            Ok(x)
        } else if x == 1 {
            Ok(y)
        } else {
            Err(err())
        }
    };
    let r = dim(ar, br)?;
    let c = dim(ac, bc)?;
    Ok(match a.len().max(b.len()) {
        0 => vec![],
        1 => vec![c],
        _ => vec![r, c],
    })
}

fn binary_map(a: View, b: View, out: &[usize], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (r, c) = as_2d(out);
    let (ar, ac) = as_2d(a.shape);
    let (br, bc) = as_2d(b.shape);
    if a.shape == b.shape {
        return a.data.iter().zip(b.data).map(|(&x, &y)| f(x, y)).collect();
    }
    let mut v = Vec::with_capacity(r * c);
    for i in 0..r {
        let ia = if ar == 1 { 0 } else { i };
        let ib = if br == 1 { 0 } else { i };
        for j in 0..c {
            let x = a.data[ia * ac + if ac == 1 { 0 } else { j }];
            let y = b.data[ib * bc + if bc == 1 { 0 } else { j }];
            v.push(f(x, y));
        }
    }
    v
}

/// Sums an output-shaped gradient down to an operand's (broadcast) shape.
fn reduce_to(g: &[f64], out: &[usize], target: &[usize]) -> Vec<f64> {
    if out == target {
        return g.to_vec();
    }
    let (r, c) = as_2d(out);
    let (tr, tc) = as_2d(target);
    let mut acc = vec![0.0; tr * tc];
    for i in 0..r {
        let ti = if tr == 1 { 0 } else { i };
        for j in 0..c {
            let tj = if tc == 1 { 0 } else { j };
            acc[ti * tc + tj] += g[i * c + j];
        }
    }
    acc
}

/// Value of `b` (possibly broadcast) at each position of the output.
fn expand(b: View, out: &[usize]) -> Vec<f64> {
    if b.shape == out {
        return b.data.to_vec();
    }
    let (r, c) = as_2d(out);
    let (br, bc) = as_2d(b.shape);
    let mut v = Vec::with_capacity(r * c);
    for i in 0..r {
        let ib = if br == 1 { 0 } else { i };
        for j in 0..c {
            v.push(b.data[ib * bc + if bc == 1 { 0 } else { j }]);
        }
    }
    v
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn relu_smooth(y: f64, d: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y < d {
        y * y / (2.0 * d)
    } else {
        y - d / 2.0
    }
}

pub(crate) fn ramp(y: f64, d: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y < d {
        y / d
    } else {
        1.0
    }
}

fn require_rank2<'a>(op: &Primitive, views: &[View<'a>]) -> Result<()> {
    if views.iter().all(|v| v.shape.len() == 2) {
        Ok(())
    } else {
        let shapes: Vec<&[usize]> = views.iter().map(|v| v.shape).collect();
        Err(Error::shape(op.name(), &shapes))
    }
}

pub(crate) fn forward(op: &Primitive, inputs: &[View]) -> Result<Forward> {
    let shapes: Vec<&[usize]> = inputs.iter().map(|v| v.shape).collect();
    if let Some(n) = op.arity() {
        if inputs.len() != n {
            return Err(Error::shape(op.name(), &shapes));
        }
    } else if inputs.is_empty() {
        return Err(Error::shape(op.name(), &shapes));
    }
    if inputs.iter().any(|v| v.shape.len() > 2) {
        return Err(Error::shape(op.name(), &shapes));
    }
    let unary = |f: &dyn Fn(f64) -> f64| Forward {
        data: inputs[0].data.iter().map(|&x| f(x)).collect(),
        shape: inputs[0].shape.to_vec(),
        aux: Vec::new(),
    };
    let plain = |data: Vec<f64>, shape: Vec<usize>| Forward {
        data,
        shape,
        aux: Vec::new(),
    };
    let fwd = match op {
        Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => {
            let (a, b) = (inputs[0], inputs[1]);
            let out = broadcast_shape(op, a.shape, b.shape)?;
            let data = match op {
                Primitive::Add => binary_map(a, b, &out, |x, y| x + y),
                Primitive::Sub => binary_map(a, b, &out, |x, y| x - y),
                Primitive::Mul => binary_map(a, b, &out, |x, y| x * y),
                _ => binary_map(a, b, &out, |x, y| x / y),
            };
            plain(data, out)
        }
        Primitive::MatMul => {
            require_rank2(op, inputs)?;
            let (a, b) = (inputs[0], inputs[1]);
            let (m, k) = (a.shape[0], a.shape[1]);
            let (k2, n) = (b.shape[0], b.shape[1]);
            if k != k2 {
                return Err(Error::shape(op.name(), &shapes));
            }
            plain(matmul(a.data, b.data, m, k, n), vec![m, n])
        }
        Primitive::Exp => unary(&f64::exp),
        Primitive::Log => unary(&f64::ln),
        Primitive::Tanh => unary(&f64::tanh),
        Primitive::Sigmoid => unary(&sigmoid),
        Primitive::Softplus => unary(&softplus),
        Primitive::Square => unary(&|x| x * x),
        Primitive::Sqrt => unary(&f64::sqrt),
        Primitive::Neg => unary(&|x| -x),
        Primitive::Scale(c) => unary(&|x| c * x),
        Primitive::Offset(c) => unary(&|x| x + c),
        Primitive::ReluSmooth(d) | Primitive::Ramp(d) => {
            if !(*d > 0.0) {
                return Err(Error::config(format!("{} width must be positive, got {d}", op.name())));
            }
            if matches!(op, Primitive::ReluSmooth(_)) {
                unary(&|y| relu_smooth(y, *d))
            } else {
                unary(&|y| ramp(y, *d))
            }
        }
        Primitive::Sum => plain(vec![inputs[0].data.iter().sum()], vec![]),
        Primitive::Mean => {
            let n = inputs[0].data.len();
            if n == 0 {
                return Err(Error::shape(op.name(), &shapes));
            }
            plain(vec![inputs[0].data.iter().sum::<f64>() / n as f64], vec![])
        }
        Primitive::SumAxis(axis) => {
            require_rank2(op, inputs)?;
            let (r, c) = (inputs[0].shape[0], inputs[0].shape[1]);
            let d = inputs[0].data;
            match axis {
                0 => plain(
                    (0..c).map(|j| (0..r).map(|i| d[i * c + j]).sum()).collect(),
                    vec![1, c],
                ),
                1 => plain(d.chunks(c.max(1)).map(|row| row.iter().sum()).collect(), vec![r, 1]),
                _ => return Err(Error::shape(op.name(), &shapes)),
            }
        }
        Primitive::MinOverAxis(axis) => {
            require_rank2(op, inputs)?;
            let (r, c) = (inputs[0].shape[0], inputs[0].shape[1]);
            if r == 0 || c == 0 {
                return Err(Error::shape(op.name(), &shapes));
            }
            let d = inputs[0].data;
            let (outer, inner, at): (usize, usize, Box<dyn Fn(usize, usize) -> usize>) = match axis {
                0 => (c, r, Box::new(move |o, i| i * c + o)),
                1 => (r, c, Box::new(move |o, i| o * c + i)),
                _ => return Err(Error::shape(op.name(), &shapes)),
            };
            let mut data = Vec::with_capacity(outer);
            let mut aux = Vec::with_capacity(outer);
            for o in 0..outer {
                // strict `<` keeps the first minimal index on ties
                let mut best = at(o, 0);
                for i in 1..inner {
                    let idx = at(o, i);
                    if d[idx] < d[best] {
                        best = idx;
                    }
                }
                data.push(d[best]);
                aux.push(best);
            }
            let shape = if *axis == 0 { vec![1, c] } else { vec![r, 1] };
            Forward { data, shape, aux }
        }
        Primitive::Concat(axis) => {
            require_rank2(op, inputs)?;
            match axis {
                0 => {
                    let c = inputs[0].shape[1];
                    if inputs.iter().any(|v| v.shape[1] != c) {
                        return Err(Error::shape(op.name(), &shapes));
                    }
                    let r: usize = inputs.iter().map(|v| v.shape[0]).sum();
                    let mut data = Vec::with_capacity(r * c);
                    for v in inputs {
                        data.extend_from_slice(v.data);
                    }
                    plain(data, vec![r, c])
                }
                1 => {
                    let r = inputs[0].shape[0];
                    if inputs.iter().any(|v| v.shape[0] != r) {
                        return Err(Error::shape(op.name(), &shapes));
                    }
                    let c: usize = inputs.iter().map(|v| v.shape[1]).sum();
                    let mut data = Vec::with_capacity(r * c);
                    for i in 0..r {
                        for v in inputs {
                            let w = v.shape[1];
                            data.extend_from_slice(&v.data[i * w..(i + 1) * w]);
                        }
                    }
                    plain(data, vec![r, c])
                }
                _ => return Err(Error::shape(op.name(), &shapes)),
            }
        }
        Primitive::Slice { axis, start, len } => {
            require_rank2(op, inputs)?;
            let (r, c) = (inputs[0].shape[0], inputs[0].shape[1]);
            let d = inputs[0].data;
            match axis {
                0 if start + len <= r => plain(d[start * c..(start + len) * c].to_vec(), vec![*len, c]),
                1 if start + len <= c => {
                    let mut data = Vec::with_capacity(r * len);
                    for i in 0..r {
                        data.extend_from_slice(&d[i * c + start..i * c + start + len]);
                    }
                    plain(data, vec![r, *len])
                }
                _ => return Err(Error::shape(op.name(), &shapes)),
            }
        }
        Primitive::Reshape(shape) => {
            if shape.len() > 2 || numel(shape) != inputs[0].data.len() {
                let mut s = shapes.clone();
                s.push(shape);
                return Err(Error::shape(op.name(), &s));
            }
            plain(inputs[0].data.to_vec(), shape.clone())
        }
        Primitive::PairwiseDist => {
            require_rank2(op, inputs)?;
            let (a, b) = (inputs[0], inputs[1]);
            let (m, n) = (a.shape[0], a.shape[1]);
            let (k, n2) = (b.shape[0], b.shape[1]);
            if n != n2 {
                return Err(Error::shape(op.name(), &shapes));
            }
            let mut data = Vec::with_capacity(m * k);
            for i in 0..m {
                let ai = &a.data[i * n..(i + 1) * n];
                for j in 0..k {
                    let bj = &b.data[j * n..(j + 1) * n];
                    let s: f64 = ai.iter().zip(bj).map(|(x, y)| (x - y) * (x - y)).sum();
                    data.push(s.sqrt());
                }
            }
            plain(data, vec![m, k])
        }
    };
    Ok(fwd)
}

pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// Gradient contributions for each input given the upstream gradient `g`.
pub(crate) fn vjp(op: &Primitive, inputs: &[View], out: View, aux: &[usize], g: &[f64]) -> Vec<Vec<f64>> {
    let x = inputs[0];
    let elementwise = |f: &dyn Fn(usize) -> f64| -> Vec<Vec<f64>> { vec![(0..g.len()).map(|i| g[i] * f(i)).collect()] };
    match op {
        Primitive::Add => vec![reduce_to(g, out.shape, x.shape), reduce_to(g, out.shape, inputs[1].shape)],
        Primitive::Sub => {
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            vec![reduce_to(g, out.shape, x.shape), reduce_to(&neg, out.shape, inputs[1].shape)]
        }
        Primitive::Mul | Primitive::Div => {
            let a = expand(x, out.shape);
            let b = expand(inputs[1], out.shape);
            let (ga, gb): (Vec<f64>, Vec<f64>) = if matches!(op, Primitive::Mul) {
                (
                    g.iter().zip(&b).map(|(g, b)| g * b).collect(),
                    g.iter().zip(&a).map(|(g, a)| g * a).collect(),
                )
            } else {
                (
                    g.iter().zip(&b).map(|(g, b)| g / b).collect(),
                    g.iter().zip(a.iter().zip(&b)).map(|(g, (a, b))| -g * a / (b * b)).collect(),
                )
            };
            vec![reduce_to(&ga, out.shape, x.shape), reduce_to(&gb, out.shape, inputs[1].shape)]
        }
        Primitive::MatMul => {
            let b = inputs[1];
            let (m, k) = (x.shape[0], x.shape[1]);
            let n = b.shape[1];
            // ga = g·bᵀ, gb = aᵀ·g
            let mut ga = vec![0.0; m * k];
            for i in 0..m {
                for p in 0..k {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += g[i * n + j] * b.data[p * n + j];
                    }
                    ga[i * k + p] = s;
                }
            }
            let mut gb = vec![0.0; k * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = x.data[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        gb[p * n + j] += aip * g[i * n + j];
                    }
                }
            }
            vec![ga, gb]
        }
        Primitive::Exp => elementwise(&|i| out.data[i]),
        Primitive::Log => elementwise(&|i| 1.0 / x.data[i]),
        Primitive::Tanh => elementwise(&|i| 1.0 - out.data[i] * out.data[i]),
        Primitive::Sigmoid => elementwise(&|i| out.data[i] * (1.0 - out.data[i])),
        Primitive::Softplus => elementwise(&|i| sigmoid(x.data[i])),
        Primitive::Square => elementwise(&|i| 2.0 * x.data[i]),
        Primitive::Sqrt => elementwise(&|i| 0.5 / out.data[i]),
        Primitive::Neg => elementwise(&|_| -1.0),
        Primitive::Scale(c) => elementwise(&|_| *c),
        Primitive::Offset(_) => vec![g.to_vec()],
        Primitive::ReluSmooth(d) => elementwise(&|i| ramp(x.data[i], *d)),
        Primitive::Ramp(d) => elementwise(&|i| {
            let y = x.data[i];
            if y > 0.0 && y < *d {
                1.0 / d
            } else {
                0.0
            }
        }),
        Primitive::Sum => vec![vec![g[0]; x.data.len()]],
        Primitive::Mean => {
            let n = x.data.len() as f64;
            vec![vec![g[0] / n; x.data.len()]]
        }
        Primitive::SumAxis(_) => vec![expand(View { data: g, shape: out.shape }, x.shape)],
        Primitive::MinOverAxis(_) => {
            let mut gx = vec![0.0; x.data.len()];
            for (o, &idx) in aux.iter().enumerate() {
                gx[idx] += g[o];
            }
            vec![gx]
        }
        Primitive::Concat(axis) => {
            let mut grads: Vec<Vec<f64>> = inputs.iter().map(|v| Vec::with_capacity(v.data.len())).collect();
            if *axis == 0 {
                let mut off = 0;
                for (gi, v) in grads.iter_mut().zip(inputs) {
                    gi.extend_from_slice(&g[off..off + v.data.len()]);
                    off += v.data.len();
                }
            } else {
                let (r, c) = (out.shape[0], out.shape[1]);
                for i in 0..r {
                    let mut off = i * c;
                    for (gi, v) in grads.iter_mut().zip(inputs) {
                        let w = v.shape[1];
                        gi.extend_from_slice(&g[off..off + w]);
                        off += w;
                    }
                }
            }
            grads
        }
        Primitive::Slice { axis, start, len } => {
            let (r, c) = (x.shape[0], x.shape[1]);
            let mut gx = vec![0.0; r * c];
            if *axis == 0 {
                gx[start * c..(start + len) * c].copy_from_slice(g);
            } else {
                for i in 0..r {
                    gx[i * c + start..i * c + start + len].copy_from_slice(&g[i * len..(i + 1) * len]);
                }
            }
            vec![gx]
        }
        Primitive::Reshape(_) => vec![g.to_vec()],
        Primitive::PairwiseDist => {
            let b = inputs[1];
            let (m, n) = (x.shape[0], x.shape[1]);
            let k = b.shape[0];
            let mut ga = vec![0.0; m * n];
            let mut gb = vec![0.0; k * n];
            for i in 0..m {
                for j in 0..k {
                    let d = out.data[i * k + j];
                    let gij = g[i * k + j];
                    // zero distance: take the zero subgradient
                    if d == 0.0 || gij == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        let diff = (x.data[i * n + p] - b.data[j * n + p]) / d * gij;
                        ga[i * n + p] += diff;
                        gb[j * n + p] -= diff;
                    }
                }
            }
            vec![ga, gb]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kinds() {
        assert_eq!("add".parse::<Primitive>().unwrap(), Primitive::Add);
        assert_eq!("scale:2".parse::<Primitive>().unwrap(), Primitive::Scale(2.0));
        assert_eq!("min_over_axis".parse::<Primitive>().unwrap(), Primitive::MinOverAxis(1));
        assert_eq!(
            "split:1:0:2".parse::<Primitive>().unwrap(),
            Primitive::Slice { axis: 1, start: 0, len: 2 }
        );
        assert_eq!("reshape:3x2".parse::<Primitive>().unwrap(), Primitive::Reshape(vec![3, 2]));
        assert!(matches!("conv2d".parse::<Primitive>(), Err(Error::UnknownPrimitive(_))));
        assert!(matches!("scale".parse::<Primitive>(), Err(Error::UnknownPrimitive(_))));
    }

    #[test]
    fn display_round_trips() {
        for p in [
            Primitive::Scale(0.25),
            Primitive::ReluSmooth(0.1),
            Primitive::SumAxis(0),
            Primitive::Slice { axis: 0, start: 1, len: 3 },
            Primitive::Softplus,
        ] {
            assert_eq!(p.to_string().parse::<Primitive>().unwrap(), p);
        }
    }

    #[test]
    fn relu_smooth_pieces() {
        let d = 0.5;
        assert_eq!(relu_smooth(-1.0, d), 0.0);
        assert_eq!(relu_smooth(0.25, d), 0.0625);
        assert_eq!(relu_smooth(2.0, d), 1.75);
        // C¹ at the knots
        assert!((relu_smooth(d, d) - d / 2.0).abs() < 1e-15);
        assert_eq!(ramp(d, d), 1.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!(sigmoid(-800.0).is_finite());
    }

    #[test]
    fn min_ties_pick_first() {
        let d = [1.0, 0.5, 0.5, 2.0];
        let f = forward(&Primitive::MinOverAxis(1), &[View { data: &d, shape: &[1, 4] }]).unwrap();
        assert_eq!(f.aux, vec![1]);
    }
}
