//! Tape-based reverse-mode differentiation over small dense tensors.
//!
//! Every operation appends a node holding its forward value and the indices of
//! its parents, so parents always precede children and a single reverse sweep
//! over the tape accumulates gradients. [`Tape::spike`] is a Heaviside step in
//! the forward pass whose backward rule is a smooth surrogate derivative.

use crate::error::{Error, Result};
use crate::neuron::heaviside;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch {
                context: "Tensor::new",
                expected: n,
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    SigmoidDerivative,
    Triangular,
}

/// Backward rule of the spike nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub width: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::SigmoidDerivative,
            width: 0.25,
        }
    }
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "surrogate width must be positive, got {width}"
            )));
        }
        Ok(Self { kind, width })
    }

    /// Surrogate for `dH/dx` at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            SurrogateKind::SigmoidDerivative => {
                let k = 1.0 / self.width;
                let s = sigmoid(k * x);
                k * s * (1.0 - s)
            }
            SurrogateKind::Triangular => (1.0 - x.abs() / self.width).max(0.0) / self.width,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`sigmoid`] for values in `(0, 1)`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse of [`softplus`] for positive values.
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// How the operands of a binary elementwise op line up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    /// Left operand has one element.
    LeftScalar,
    RightScalar,
    /// Left operand is a 1-D row repeated along the leading axes of the right.
    LeftRow,
    RightRow,
}

impl Bcast {
    #[inline]
    fn left(self, i: usize, row: usize) -> usize {
        match self {
            Bcast::Same | Bcast::RightScalar | Bcast::RightRow => i,
            Bcast::LeftScalar => 0,
            Bcast::LeftRow => i % row,
        }
    }

    #[inline]
    fn right(self, i: usize, row: usize) -> usize {
        match self {
            Bcast::Same | Bcast::LeftScalar | Bcast::LeftRow => i,
            Bcast::RightScalar => 0,
            Bcast::RightRow => i % row,
        }
    }
}

fn broadcast(op: &'static str, a: &[usize], b: &[usize]) -> Result<(Bcast, Vec<usize>, usize)> {
    let na: usize = a.iter().product();
    let nb: usize = b.iter().product();
    let mismatch = || Error::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    };
    if a == b {
        return Ok((Bcast::Same, a.to_vec(), 1));
    }
    if na == 1 && nb == 1 {
        let shape = if a.len() >= b.len() { a } else { b };
        return Ok((Bcast::LeftScalar, shape.to_vec(), 1));
    }
    if na == 1 {
        return Ok((Bcast::LeftScalar, b.to_vec(), 1));
    }
    if nb == 1 {
        return Ok((Bcast::RightScalar, a.to_vec(), 1));
    }
    if a.len() == 1 && b.len() >= 2 && b[b.len() - 1] == a[0] {
        return Ok((Bcast::LeftRow, b.to_vec(), a[0]));
    }
    if b.len() == 1 && a.len() >= 2 && a[a.len() - 1] == b[0] {
        return Ok((Bcast::RightRow, a.to_vec(), b[0]));
    }
    Err(mismatch())
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var, Bcast, usize),
    Sub(Var, Var, Bcast, usize),
    Mul(Var, Var, Bcast, usize),
    MatMul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    /// `c - x`
    RSub(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Spike(Var, SurrogateSpec),
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    BceLogits(Var, Var),
    Concat(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a computation for one backward sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients indexed by tape node.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zeros when `v` did not contribute.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor {
                shape,
                data: g.clone(),
            },
            None => Tensor::zeros(&shape),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, Bcast, usize)> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (bc, shape, row) = broadcast(name, &ta.shape, &tb.shape)?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|i| f(ta.data[bc.left(i, row)], tb.data[bc.right(i, row)]))
            .collect();
        Ok((Tensor { shape, data }, bc, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, bc, row) = self.binary("add", a, b, |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Add(a, b, bc, row), needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, bc, row) = self.binary("sub", a, b, |x, y| x - y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Sub(a, b, bc, row), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, bc, row) = self.binary("mul", a, b, |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Mul(a, b, bc, row), needs))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape.len() != 2 || tb.shape.len() != 2 || ta.shape[1] != tb.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape.clone(),
                rhs: tb.shape.clone(),
            });
        }
        let (m, k, n) = (ta.shape[0], ta.shape[1], tb.shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let out = &mut data[i * n..(i + 1) * n];
            for p in 0..k {
                let x = ta.data[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &tb.data[p * n..(p + 1) * n];
                for (o, &y) in out.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor {
                shape: vec![m, n],
                data,
            },
            Op::MatMul(a, b),
            needs,
        ))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ta = &self.nodes[a.0].value;
        let t = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().map(|&x| f(x)).collect(),
        };
        let needs = self.needs(a);
        self.push(t, op, needs)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    /// `a + c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Offset(a), |x| x + c)
    }

    /// `c - a`.
    pub fn rsub(&mut self, c: f64, a: Var) -> Var {
        self.unary(a, Op::RSub(a), |x| c - x)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    /// Heaviside forward (`H(0) = 1`), surrogate derivative backward.
    pub fn spike(&mut self, v_minus_th: Var, spec: SurrogateSpec) -> Var {
        self.unary(v_minus_th, Op::Spike(v_minus_th, spec), heaviside)
    }

    fn reduce(&mut self, a: Var, op: Op, f: impl Fn(&[f64]) -> f64) -> Var {
        let v = f(&self.nodes[a.0].value.data);
        let needs = self.needs(a);
        self.push(Tensor::scalar(v), op, needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(a, Op::Sum(a), |d| d.iter().sum())
    }

    pub fn mean(&mut self, a: Var) -> Var {
        self.reduce(a, Op::Mean(a), |d| d.iter().sum::<f64>() / d.len() as f64)
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (&self.nodes[pred.0].value, &self.nodes[target.0].value);
        if tp.shape != tt.shape {
            return Err(Error::ShapeMismatch {
                op: "mse",
                lhs: tp.shape.clone(),
                rhs: tt.shape.clone(),
            });
        }
        let n = tp.data.len() as f64;
        let v = tp
            .data
            .iter()
            .zip(&tt.data)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(v), Op::Mse(pred, target), needs))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against 0/1 targets.
    /// Targets are treated as constants.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Var) -> Result<Var> {
        let (tz, ty) = (&self.nodes[logits.0].value, &self.nodes[targets.0].value);
        if tz.shape != ty.shape {
            return Err(Error::ShapeMismatch {
                op: "bce_with_logits",
                lhs: tz.shape.clone(),
                rhs: ty.shape.clone(),
            });
        }
        let n = tz.data.len() as f64;
        let v = tz
            .data
            .iter()
            .zip(&ty.data)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / n;
        let needs = self.needs(logits);
        Ok(self.push(Tensor::scalar(v), Op::BceLogits(logits, targets), needs))
    }

    /// Joins `[b, n_i]` matrices along columns into `[b, sum n_i]`.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::EmptyInput("concat_cols"))?;
        let rows = self.shape(*first)[0];
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(*first).to_vec(),
                    rhs: s.to_vec(),
                });
            }
            total += s[1];
        }
        let mut data = vec![0.0; rows * total];
        let mut col = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            let w = t.shape[1];
            for r in 0..rows {
                data[r * total + col..r * total + col + w]
                    .copy_from_slice(&t.data[r * w..(r + 1) * w]);
            }
            col += w;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            Tensor {
                shape: vec![rows, total],
                data,
            },
            Op::Concat(parts.to_vec()),
            needs,
        ))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if lv.data.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: lv.shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
            slot => *slot = Some(contrib),
        }
    }

    /// Sums `g` (in the broadcast output shape) back onto one operand.
    fn unbroadcast(g: &[f64], target_len: usize, index: impl Fn(usize) -> usize) -> Vec<f64> {
        if target_len == g.len() {
            return g.to_vec();
        }
        let mut out = vec![0.0; target_len];
        for (i, &gi) in g.iter().enumerate() {
            out[index(i)] += gi;
        }
        out
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value.data;
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b, bc, row) | Op::Sub(a, b, bc, row) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                let (bc, row) = (*bc, *row);
                if self.needs(*a) {
                    let ga = Self::unbroadcast(g, val(*a).len(), |i| bc.left(i, row));
                    self.accumulate(grads, *a, ga);
                }
                if self.needs(*b) {
                    let mut gb = Self::unbroadcast(g, val(*b).len(), |i| bc.right(i, row));
                    if sign < 0.0 {
                        gb.iter_mut().for_each(|x| *x = -*x);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b, bc, row) => {
                let (bc, row) = (*bc, *row);
                let (va, vb) = (val(*a), val(*b));
                if self.needs(*a) {
                    let prod: Vec<f64> =
                        g.iter().enumerate().map(|(i, gi)| gi * vb[bc.right(i, row)]).collect();
                    let ga = Self::unbroadcast(&prod, va.len(), |i| bc.left(i, row));
                    self.accumulate(grads, *a, ga);
                }
                if self.needs(*b) {
                    let prod: Vec<f64> =
                        g.iter().enumerate().map(|(i, gi)| gi * va[bc.left(i, row)]).collect();
                    let gb = Self::unbroadcast(&prod, vb.len(), |i| bc.right(i, row));
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (ta.shape[0], ta.shape[1], tb.shape[1]);
                if self.needs(*a) {
                    // dA = G B^T
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g[i * n + j] * tb.data[p * n + j];
                            }
                            ga[i * k + p] = acc;
                        }
                    }
                    self.accumulate(grads, *a, ga);
                }
                if self.needs(*b) {
                    // dB = A^T G
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let x = ta.data[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[p * n + j] += x * g[i * n + j];
                            }
                        }
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Scale(a, c) => {
                let ga = g.iter().map(|x| x * c).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Offset(a) => self.accumulate(grads, *a, g.to_vec()),
            Op::RSub(a) => self.accumulate(grads, *a, g.iter().map(|x| -x).collect()),
            Op::Sigmoid(a) => {
                let y = &node.value.data;
                let ga = g.iter().zip(y).map(|(gi, s)| gi * s * (1.0 - s)).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let y = &node.value.data;
                let ga = g.iter().zip(y).map(|(gi, t)| gi * (1.0 - t * t)).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Relu(a) => {
                let x = val(*a);
                let ga = g
                    .iter()
                    .zip(x)
                    .map(|(gi, &xi)| if xi > 0.0 { *gi } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Softplus(a) => {
                let x = val(*a);
                let ga = g.iter().zip(x).map(|(gi, &xi)| gi * sigmoid(xi)).collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Spike(a, spec) => {
                let x = val(*a);
                let ga = g
                    .iter()
                    .zip(x)
                    .map(|(gi, &xi)| gi * spec.derivative(xi))
                    .collect();
                self.accumulate(grads, *a, ga);
            }
            Op::Sum(a) => {
                let n = val(*a).len();
                self.accumulate(grads, *a, vec![g[0]; n]);
            }
            Op::Mean(a) => {
                let n = val(*a).len();
                self.accumulate(grads, *a, vec![g[0] / n as f64; n]);
            }
            Op::Mse(p, t) => {
                let (vp, vt) = (val(*p), val(*t));
                let scale = 2.0 * g[0] / vp.len() as f64;
                let diff: Vec<f64> = vp.iter().zip(vt).map(|(a, b)| scale * (a - b)).collect();
                if self.needs(*t) {
                    self.accumulate(grads, *t, diff.iter().map(|d| -d).collect());
                }
                self.accumulate(grads, *p, diff);
            }
            Op::BceLogits(z, y) => {
                let (vz, vy) = (val(*z), val(*y));
                let scale = g[0] / vz.len() as f64;
                let gz = vz
                    .iter()
                    .zip(vy)
                    .map(|(&zi, &yi)| scale * (sigmoid(zi) - yi))
                    .collect();
                self.accumulate(grads, *z, gz);
            }
            Op::Concat(parts) => {
                let rows = node.value.shape[0];
                let total = node.value.shape[1];
                let mut col = 0;
                for &p in parts {
                    let w = self.nodes[p.0].value.shape[1];
                    if self.needs(p) {
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * total + col..r * total + col + w]);
                        }
                        self.accumulate(grads, p, gp);
                    }
                    col += w;
                }
            }
        }
    }
}

/// First-order update rules over a flat list of parameter tensors.
pub mod optim {
    use super::Tensor;

    pub trait Optimizer {
        fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]);
    }

    #[derive(Debug, Clone)]
    pub struct Sgd {
        pub lr: f64,
    }

    impl Optimizer for Sgd {
        fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
            for (p, g) in params.iter_mut().zip(grads) {
                for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                    *x -= self.lr * d;
                }
            }
        }
    }

    #[derive(Debug, Clone)]
    pub struct Adam {
        pub lr: f64,
        pub beta1: f64,
        pub beta2: f64,
        pub eps: f64,
        t: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    }

    impl Default for Adam {
        fn default() -> Self {
            Self::new(1e-3)
        }
    }

    impl Adam {
        pub fn new(lr: f64) -> Self {
            Self {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: Vec::new(),
                v: Vec::new(),
            }
        }
    }

    impl Optimizer for Adam {
        fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
            if self.m.is_empty() {
                self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
                self.v = self.m.clone();
            }
            self.t += 1;
            let c1 = 1.0 - self.beta1.powi(self.t);
            let c2 = 1.0 - self.beta2.powi(self.t);
            for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                let (m, v) = (&mut self.m[i], &mut self.v[i]);
                for (j, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                    m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * d;
                    v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * d * d;
                    let mh = m[j] / c1;
                    let vh = v[j] / c2;
                    *x -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_identical_inputs() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let l = t.mse(x, x).unwrap();
        assert_eq!(t.value(l).item(), 0.0);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = t.leaf(Tensor::matrix(3, 1, vec![1.0, 0.0, -1.0]).unwrap());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.shape(c), &[2, 1]);
        assert_eq!(t.value(c).data(), &[-2.0, -2.0]);
        let l = t.sum(c);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(a).shape(), &[2, 3]);
        assert_eq!(g.get(b).shape(), &[3, 1]);
        assert_eq!(g.get(a).data(), &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(g.get(b).data(), &[5.0, 7.0, 9.0]);
        assert!(matches!(
            t.matmul(b, b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let y = t.sigmoid(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 0.25);
    }

    #[test]
    fn spike_forward_and_surrogates() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![0.5, -0.5, 0.0]));
        let s = t.spike(x, SurrogateSpec::default());
        assert_eq!(t.value(s).data(), &[1.0, 0.0, 1.0]);

        let tri = SurrogateSpec::new(SurrogateKind::Triangular, 1.0).unwrap();
        assert_eq!(tri.derivative(0.0), 1.0);
        assert_eq!(tri.derivative(2.0), 0.0);
        let sig = SurrogateSpec::new(SurrogateKind::SigmoidDerivative, 0.25).unwrap();
        assert_eq!(sig.derivative(0.0), 1.0);
        assert!(SurrogateSpec::new(SurrogateKind::Triangular, 0.0).is_err());

        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let s = t.spike(x, tri);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).item(), 1.0);
    }

    #[test]
    fn sum_of_scaled_vector() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]));
        let y = t.scale(x, 3.0);
        let l = t.sum(y);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).data(), &[3.0; 4]);
    }

    #[test]
    fn diamond_accumulates_both_paths() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(2.0));
        let a = t.scale(x, 3.0);
        let b = t.mul(x, x).unwrap();
        let y = t.add(a, b).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 3.0 + 4.0);
    }

    #[test]
    fn unused_leaf_has_zero_gradient_and_backward_is_repeatable() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        let unused = t.leaf(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap());
        let y = t.tanh(x);
        let l = t.sum(y);
        let g1 = t.backward(l).unwrap();
        let g2 = t.backward(l).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.get(unused), Tensor::zeros(&[2, 2]));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn row_broadcast_gradients_sum_over_rows() {
        let mut t = Tape::new();
        let m = t.leaf(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let r = t.leaf(Tensor::vector(vec![10.0, 20.0]));
        let s = t.leaf(Tensor::scalar(2.0));
        let p = t.mul(r, m).unwrap();
        let q = t.mul(p, s).unwrap();
        let l = t.sum(q);
        assert_eq!(t.value(p).data(), &[10.0, 40.0, 30.0, 80.0, 50.0, 120.0]);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(r).data(), &[2.0 * 9.0, 2.0 * 12.0]);
        assert_eq!(g.get(s).item(), 330.0);
        assert_eq!(g.get(m).data(), &[20.0, 40.0, 20.0, 40.0, 20.0, 40.0]);
        let bad = t.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(matches!(
            t.add(m, bad),
            Err(Error::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn concat_routes_gradients_back() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let c = t.concat_cols(&[a, b]).unwrap();
        assert_eq!(t.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = t.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let p = t.mul(c, w).unwrap();
        let l = t.sum(p);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(a).data(), &[1.0, 4.0]);
        assert_eq!(g.get(b).data(), &[2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn bce_gradient_is_sigmoid_minus_target() {
        let mut t = Tape::new();
        let z = t.leaf(Tensor::vector(vec![0.0, 2.0]));
        let y = t.constant(Tensor::vector(vec![1.0, 0.0]));
        let l = t.bce_with_logits(z, y).unwrap();
        let want = (2f64.ln() + softplus(2.0)) / 2.0;
        assert!((t.value(l).item() - want).abs() < 1e-15);
        let g = t.backward(l).unwrap();
        assert!((g.get(z).data()[0] - (-0.25)).abs() < 1e-15);
        assert!((g.get(z).data()[1] - sigmoid(2.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn reparameterization_inverses() {
        for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-14);
        }
        for y in [1e-3, 0.1, 1.0, 5.0, 50.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        use optim::{Adam, Optimizer, Sgd};
        let mut params = vec![Tensor::vector(vec![1.0, -1.0])];
        let grads = vec![Tensor::vector(vec![0.5, -2.0])];
        let mut adam = Adam::new(0.1);
        adam.step(&mut params, &grads);
        // first step size is lr * sign(g) up to epsilon
        assert!((params[0].data()[0] - 0.9).abs() < 1e-6);
        assert!((params[0].data()[1] + 0.9).abs() < 1e-6);
        let mut sgd = Sgd { lr: 1.0 };
        sgd.step(&mut params, &grads);
        assert!((params[0].data()[0] - 0.4).abs() < 1e-6);
    }
}
