//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so that order is already topological and the reverse
//! pass simply walks the node list backwards, visiting each node once.
//!
//! Non-differentiable points use the zero subgradient: `relu'(0) = 0` and
//! `|x|'(0) = 0`.

use crate::tensor::Tensor;
use crate::NeuralError;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// Adds a `1 x n` row to every row of the left operand.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Abs(Var),
    SliceCols {
        src: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    Sum(Var),
    /// Mean over every element of `(pred - target)^2`.
    Mse(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every recorded node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` when the output does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but returns an explicit zero tensor for
    /// nodes the output does not depend on.
    pub fn get_or_zeros(&self, graph: &Graph, var: Var) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = graph.value(var).shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

fn check_same_shape(op: &str, a: &Tensor, b: &Tensor) -> Result<(), NeuralError> {
    if a.shape() != b.shape() {
        return Err(NeuralError::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(NeuralError::Shape(format!(
                "matmul: {:?} x {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let out = va.matmul(vb);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NeuralError> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(NeuralError::Shape(format!(
                "add_row: {:?} + {:?}",
                va.shape(),
                vr.shape()
            )));
        }
        let mut out = va.clone();
        let cols = out.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += vr.data()[i % cols];
        }
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    /// `a * w + b`, the affine layer used throughout.
    pub fn affine(&mut self, a: Var, w: Var, b: Var) -> Result<Var, NeuralError> {
        let h = self.matmul(a, w)?;
        self.add_row(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        check_same_shape("add", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        check_same_shape("sub", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        check_same_shape("mul", self.value(a), self.value(b))?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(out, Op::OneMinus(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::abs);
        self.push(out, Op::Abs(a))
    }

    /// Columns `start..end` of `src`.
    pub fn slice_cols(&mut self, src: Var, start: usize, end: usize) -> Result<Var, NeuralError> {
        let v = self.value(src);
        if start > end || end > v.cols() {
            return Err(NeuralError::Shape(format!(
                "slice_cols {start}..{end} of {:?}",
                v.shape()
            )));
        }
        let width = end - start;
        let mut data = Vec::with_capacity(v.rows() * width);
        for r in 0..v.rows() {
            data.extend_from_slice(&v.row(r)[start..end]);
        }
        let out = Tensor::from_vec(v.rows(), width, data)?;
        Ok(self.push(out, Op::SliceCols { src, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NeuralError> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).rows(),
            None => return Err(NeuralError::Shape("concat of zero tensors".into())),
        };
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(NeuralError::Shape("concat: row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NeuralError> {
        let (p, t) = (self.value(pred), self.value(target));
        check_same_shape("mse", p, t)?;
        let n = p.len().max(1) as f64;
        let total: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.push(Tensor::scalar(total / n), Op::Mse(pred, target)))
    }

    /// Reverse pass from `output`, seeded with ones (so a non-scalar output
    /// is differentiated through the sum of its entries).
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        let (r, c) = self.value(output).shape();
        grads[output.0] = Some(Tensor::filled(r, c, 1.0));

        for idx in (0..=output.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let mut emit = |var: Var, g: Tensor| match &mut grads[var.0] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    emit(*a, upstream.matmul_transpose_rhs(vb));
                    emit(*b, va.transpose_lhs_matmul(&upstream));
                }
                Op::AddRow(a, row) => {
                    let cols = upstream.cols();
                    let mut gr = Tensor::zeros(1, cols);
                    for rr in 0..upstream.rows() {
                        for (acc, v) in gr.data_mut().iter_mut().zip(upstream.row(rr)) {
                            *acc += v;
                        }
                    }
                    emit(*row, gr);
                    emit(*a, upstream.clone());
                }
                Op::Add(a, b) => {
                    emit(*b, upstream.clone());
                    emit(*a, upstream.clone());
                }
                Op::Sub(a, b) => {
                    emit(*b, upstream.map(|g| -g));
                    emit(*a, upstream.clone());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    emit(*a, upstream.zip_map(vb, |g, y| g * y));
                    emit(*b, upstream.zip_map(va, |g, x| g * x));
                }
                Op::OneMinus(a) => emit(*a, upstream.map(|g| -g)),
                Op::Relu(a) => {
                    let va = self.value(*a);
                    emit(*a, upstream.zip_map(va, |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::Sigmoid(a) => {
                    let out = &node.value;
                    emit(*a, upstream.zip_map(out, |g, s| g * s * (1.0 - s)));
                }
                Op::Tanh(a) => {
                    let out = &node.value;
                    emit(*a, upstream.zip_map(out, |g, t| g * (1.0 - t * t)));
                }
                Op::Abs(a) => {
                    let va = self.value(*a);
                    emit(*a, upstream.zip_map(va, |g, x| g * sign(x)));
                }
                Op::SliceCols { src, start } => {
                    let (rows, cols) = self.value(*src).shape();
                    let mut g = Tensor::zeros(rows, cols);
                    let width = upstream.cols();
                    for rr in 0..rows {
                        for cc in 0..width {
                            g.set(rr, start + cc, upstream.get(rr, cc));
                        }
                    }
                    emit(*src, g);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.value(p).shape();
                        let mut g = Tensor::zeros(rows, cols);
                        for rr in 0..rows {
                            for cc in 0..cols {
                                g.set(rr, cc, upstream.get(rr, offset + cc));
                            }
                        }
                        offset += cols;
                        emit(p, g);
                    }
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.value(*a).shape();
                    emit(*a, Tensor::filled(rows, cols, upstream.get(0, 0)));
                }
                Op::Mse(pred, target) => {
                    let (p, t) = (self.value(*pred), self.value(*target));
                    let scale = 2.0 * upstream.get(0, 0) / p.len().max(1) as f64;
                    let diff = p.zip_map(t, |a, b| scale * (a - b));
                    emit(*target, diff.map(|d| -d));
                    emit(*pred, diff);
                }
            }
            grads[idx] = Some(upstream);
        }
        Gradients { grads }
    }
}
