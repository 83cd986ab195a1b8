//! Recorded computation graph with reverse-mode differentiation.
//!
//! Every vector-Jacobian product is itself built out of graph operations, so
//! the result of [`Graph::grad`] is an ordinary node that can be
//! differentiated again. The gradient penalty of the critic relies on this.

use std::sync::Arc;

use super::kernels::{self, ConvDims, LinDims};
use super::tensor::{broadcast_compatible, broadcast_index_map, Tensor};
use crate::error::{invalid, shape_err, Error, Result};
use crate::scalar::Scalar;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, T),
    AddScalar(Var, T),
    /// Elementwise product with a constant, piecewise-constant mask.
    MaskMul(Var, Arc<[T]>),
    Exp(Var),
    Log(Var),
    /// 1/x, defined as 0 at x = 0.
    Recip(Var),
    Sqrt(Var),
    Sigmoid(Var),
    Softmax(Var),
    SumTo(Var),
    ExpandTo(Var),
    Reshape(Var),
    Conv(Var, Var),
    ConvT(Var, Var),
    ConvW(Var, Var),
    Lin(Var, Var),
    LinT(Var, Var),
    LinW(Var, Var),
    Corr(Var, Arc<[T]>),
    CorrT(Var, Arc<[T]>),
    Concat(Var, Var),
    Slice(Var, usize),
    Pad(Var, usize),
    ArgmaxOneHot(Var),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::MaskMul(..) => "mask_mul",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Recip(..) => "recip",
            Op::Sqrt(..) => "sqrt",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softmax(..) => "softmax",
            Op::SumTo(..) => "sum_to",
            Op::ExpandTo(..) => "expand_to",
            Op::Reshape(..) => "reshape",
            Op::Conv(..) => "conv1d_circular",
            Op::ConvT(..) => "conv1d_transpose",
            Op::ConvW(..) => "conv1d_kernel_grad",
            Op::Lin(..) => "linear",
            Op::LinT(..) => "linear_transpose",
            Op::LinW(..) => "linear_weight_grad",
            Op::Corr(..) => "circular_correlate",
            Op::CorrT(..) => "circular_correlate_transpose",
            Op::Concat(..) => "concat",
            Op::Slice(..) => "slice",
            Op::Pad(..) => "pad",
            Op::ArgmaxOneHot(..) => "hard_argmax",
        }
    }

    fn parents(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Conv(a, b)
            | Op::ConvT(a, b)
            | Op::ConvW(a, b)
            | Op::Lin(a, b)
            | Op::LinT(a, b)
            | Op::LinW(a, b)
            | Op::Concat(a, b) => vec![a, b],
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::MaskMul(a, _)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Recip(a)
            | Op::Sqrt(a)
            | Op::Sigmoid(a)
            | Op::Softmax(a)
            | Op::SumTo(a)
            | Op::ExpandTo(a)
            | Op::Reshape(a)
            | Op::Corr(a, _)
            | Op::CorrT(a, _)
            | Op::Slice(a, _)
            | Op::Pad(a, _)
            | Op::ArgmaxOneHot(a) => vec![a],
        }
    }

    fn twice_differentiable(&self) -> bool {
        !matches!(self, Op::ArgmaxOneHot(_))
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Append-only record of tensor operations.
///
/// Nodes are only ever appended, so every node's parents precede it and the
/// graph is acyclic by construction.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Inserts an input, parameter or constant tensor.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn scalar(&mut self, v: T) -> Var {
        self.leaf(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// The value of a one-element node.
    pub fn item(&self, v: Var) -> T {
        self.value(v).item()
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            ));
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let v = self.value(a).map(f);
        self.push(v, op)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var> {
        self.same_shape(a, b, op.name())?;
        let v = self.value(a).zip_map(self.value(b), f);
        Ok(self.push(v, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::Scale(a, s), |x| x * s)
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::AddScalar(a, s), |x| x + s)
    }

    /// Elementwise product with a constant mask. The mask is treated as
    /// locally constant, which is exact almost everywhere for the piecewise
    /// linear functions built on it.
    pub fn mask_mul(&mut self, a: Var, mask: Arc<[T]>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return shape_err(format!(
                "mask_mul: mask of {} for tensor of {}",
                mask.len(),
                self.value(a).len()
            ));
        }
        let t = self.value(a);
        let data = t.data().iter().zip(mask.iter()).map(|(&x, &m)| x * m).collect();
        let v = Tensor::from_vec(t.shape(), data)?;
        Ok(self.push(v, Op::MaskMul(a, mask)))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), |x| x.ln())
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, Op::Recip(a), |x| {
            if x == T::zero() {
                T::zero()
            } else {
                T::one() / x
            }
        })
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a), |x| x.sqrt())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), kernels::sigmoid)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let row = match t.shape().last() {
            Some(&r) if r > 0 => r,
            _ => return shape_err("softmax needs a non-empty last axis"),
        };
        let v = Tensor::from_vec(t.shape(), kernels::softmax_rows(t.data(), row))?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    /// Sums `a` down to `shape`, which must broadcast to `a`'s shape.
    pub fn sum_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let Some(padded) = broadcast_compatible(shape, src.shape()) else {
            return shape_err(format!("sum_to {:?} from {:?}", shape, src.shape()));
        };
        let map = broadcast_index_map(&padded, src.shape());
        let mut out = vec![T::zero(); shape.iter().product()];
        for (&i, &v) in map.iter().zip(src.data()) {
            out[i] += v;
        }
        let v = Tensor::from_vec(shape, out)?;
        Ok(self.push(v, Op::SumTo(a)))
    }

    /// Broadcasts `a` up to `shape`.
    pub fn expand_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let Some(padded) = broadcast_compatible(src.shape(), shape) else {
            return shape_err(format!("expand_to {:?} from {:?}", shape, src.shape()));
        };
        let map = broadcast_index_map(&padded, shape);
        let data = map.iter().map(|&i| src.data()[i]).collect();
        let v = Tensor::from_vec(shape, data)?;
        Ok(self.push(v, Op::ExpandTo(a)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).reshaped(shape)?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    fn conv_dims(&self, x: Var, w: Var) -> Result<ConvDims> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 3 || ws.len() != 3 {
            return shape_err(format!("conv1d: input {:?}, kernel {:?}", xs, ws));
        }
        let d = ConvDims {
            batch: xs[0],
            cin: xs[1],
            len: xs[2],
            cout: ws[0],
            k: ws[2],
        };
        if ws[1] != d.cin {
            return shape_err(format!("conv1d: {} input channels, kernel expects {}", d.cin, ws[1]));
        }
        if d.k % 2 == 0 || d.k > d.len {
            return shape_err(format!("conv1d: kernel width {} for length {}", d.k, d.len));
        }
        Ok(d)
    }

    /// Circular 1-D convolution without bias: `x[b,cin,L]`, `w[cout,cin,K]`.
    pub fn conv1d(&mut self, x: Var, w: Var) -> Result<Var> {
        let d = self.conv_dims(x, w)?;
        let y = kernels::conv(self.value(x).data(), self.value(w).data(), d);
        let v = Tensor::from_vec(&[d.batch, d.cout, d.len], y)?;
        Ok(self.push(v, Op::Conv(x, w)))
    }

    /// Adjoint of [`Graph::conv1d`] with respect to its input: `g[b,cout,L]`.
    pub fn conv1d_transpose(&mut self, g: Var, w: Var) -> Result<Var> {
        let (gs, ws) = (self.shape(g).to_vec(), self.shape(w).to_vec());
        if gs.len() != 3 || ws.len() != 3 || gs[1] != ws[0] || ws[2] % 2 == 0 || ws[2] > gs[2] {
            return shape_err(format!("conv1d_transpose: {:?} with kernel {:?}", gs, ws));
        }
        let d = ConvDims {
            batch: gs[0],
            cout: gs[1],
            len: gs[2],
            cin: ws[1],
            k: ws[2],
        };
        let y = kernels::conv_t(self.value(g).data(), self.value(w).data(), d);
        let v = Tensor::from_vec(&[d.batch, d.cin, d.len], y)?;
        Ok(self.push(v, Op::ConvT(g, w)))
    }

    /// Adjoint of [`Graph::conv1d`] with respect to its kernel.
    pub fn conv1d_kernel_grad(&mut self, x: Var, g: Var, k: usize) -> Result<Var> {
        let (xs, gs) = (self.shape(x).to_vec(), self.shape(g).to_vec());
        if xs.len() != 3 || gs.len() != 3 || xs[0] != gs[0] || xs[2] != gs[2] || k % 2 == 0 || k > xs[2] {
            return shape_err(format!("conv1d_kernel_grad: {:?} and {:?}", xs, gs));
        }
        let d = ConvDims {
            batch: xs[0],
            cin: xs[1],
            len: xs[2],
            cout: gs[1],
            k,
        };
        let y = kernels::conv_w(self.value(x).data(), self.value(g).data(), d);
        let v = Tensor::from_vec(&[d.cout, d.cin, k], y)?;
        Ok(self.push(v, Op::ConvW(x, g)))
    }

    /// `x[b,n]` times `w[m,n]` transposed, no bias.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return shape_err(format!("linear: input {:?}, weight {:?}", xs, ws));
        }
        let d = LinDims {
            batch: xs[0],
            n_in: xs[1],
            n_out: ws[0],
        };
        let y = kernels::lin(self.value(x).data(), self.value(w).data(), d);
        let v = Tensor::from_vec(&[d.batch, d.n_out], y)?;
        Ok(self.push(v, Op::Lin(x, w)))
    }

    fn matmul(&mut self, g: Var, w: Var) -> Result<Var> {
        let (gs, ws) = (self.shape(g), self.shape(w));
        if gs.len() != 2 || ws.len() != 2 || gs[1] != ws[0] {
            return shape_err(format!("linear_transpose: {:?} with {:?}", gs, ws));
        }
        let d = LinDims {
            batch: gs[0],
            n_out: gs[1],
            n_in: ws[1],
        };
        let y = kernels::lin_t(self.value(g).data(), self.value(w).data(), d);
        let v = Tensor::from_vec(&[d.batch, d.n_in], y)?;
        Ok(self.push(v, Op::LinT(g, w)))
    }

    fn outer_sum(&mut self, x: Var, g: Var) -> Result<Var> {
        let (xs, gs) = (self.shape(x), self.shape(g));
        if xs.len() != 2 || gs.len() != 2 || xs[0] != gs[0] {
            return shape_err(format!("linear_weight_grad: {:?} with {:?}", xs, gs));
        }
        let d = LinDims {
            batch: xs[0],
            n_in: xs[1],
            n_out: gs[1],
        };
        let y = kernels::lin_w(self.value(x).data(), self.value(g).data(), d);
        let v = Tensor::from_vec(&[d.n_out, d.n_in], y)?;
        Ok(self.push(v, Op::LinW(x, g)))
    }

    /// Circular correlation of every row of `x[b,L]` against a fixed
    /// reference: `ρ[b,k] = Σ_i a[i]·x[b,(i+k) mod L]`, `k` zero-based.
    pub fn correlate_rows(&mut self, x: Var, reference: Arc<[T]>) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 2 || xs[1] != reference.len() {
            return shape_err(format!(
                "correlate_rows: {:?} against reference of {}",
                xs,
                reference.len()
            ));
        }
        let b = xs[0];
        let y = kernels::corr(self.value(x).data(), &reference, b);
        let v = Tensor::from_vec(&[b, reference.len()], y)?;
        Ok(self.push(v, Op::Corr(x, reference)))
    }

    fn correlate_rows_t(&mut self, u: Var, reference: Arc<[T]>) -> Result<Var> {
        let b = self.shape(u)[0];
        let y = kernels::corr_t(self.value(u).data(), &reference, b);
        let v = Tensor::from_vec(&[b, reference.len()], y)?;
        Ok(self.push(v, Op::CorrT(u, reference)))
    }

    fn split_last(shape: &[usize]) -> Result<(usize, usize)> {
        match shape.last() {
            Some(&last) => Ok((shape.iter().product::<usize>() / last.max(1), last)),
            None => shape_err("operation needs at least one axis"),
        }
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() || sa.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return shape_err(format!("concat: {:?} and {:?}", sa, sb));
        }
        let (rows, na) = Self::split_last(&sa)?;
        let nb = *sb.last().unwrap();
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(rows * (na + nb));
        for r in 0..rows {
            data.extend_from_slice(&da[r * na..(r + 1) * na]);
            data.extend_from_slice(&db[r * nb..(r + 1) * nb]);
        }
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = na + nb;
        let v = Tensor::from_vec(&shape, data)?;
        Ok(self.push(v, Op::Concat(a, b)))
    }

    /// Elements `start..start+len` of the last axis.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let (rows, n) = Self::split_last(&sa)?;
        if start + len > n {
            return shape_err(format!("slice {}..{} of axis {}", start, start + len, n));
        }
        let da = self.value(a).data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&da[r * n + start..r * n + start + len]);
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = len;
        let v = Tensor::from_vec(&shape, data)?;
        Ok(self.push(v, Op::Slice(a, start)))
    }

    /// Zero-pads the last axis of `a` to `total`, placing it at `offset`.
    fn pad_last(&mut self, a: Var, offset: usize, total: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let (rows, n) = Self::split_last(&sa)?;
        if offset + n > total {
            return shape_err("pad: does not fit");
        }
        let da = self.value(a).data();
        let mut data = vec![T::zero(); rows * total];
        for r in 0..rows {
            data[r * total + offset..r * total + offset + n].copy_from_slice(&da[r * n..(r + 1) * n]);
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = total;
        let v = Tensor::from_vec(&shape, data)?;
        Ok(self.push(v, Op::Pad(a, offset)))
    }

    /// One-hot indicator of the first maximum along the last axis. Its
    /// derivative is zero almost everywhere and it refuses to take part in a
    /// differentiable backward pass.
    pub fn hard_argmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (_, n) = Self::split_last(t.shape())?;
        let mut data = vec![T::zero(); t.len()];
        for (r, row) in t.data().chunks(n).enumerate() {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            data[r * n + best] = T::one();
        }
        let v = Tensor::from_vec(t.shape(), data)?;
        Ok(self.push(v, Op::ArgmaxOneHot(a)))
    }

    /// Gradients of the scalar `output` with respect to each of `inputs`.
    ///
    /// The backward pass is recorded into this graph, so the returned nodes
    /// can themselves be differentiated. With `create_graph` set, every node
    /// on the differentiated path must support that; otherwise
    /// [`Error::NotTwiceDifferentiable`] is returned. Inputs that do not
    /// influence `output` get a zero tensor.
    pub fn grad(&mut self, output: Var, inputs: &[Var], create_graph: bool) -> Result<Vec<Var>> {
        if self.value(output).len() != 1 {
            return shape_err(format!(
                "grad needs a scalar output, got shape {:?}",
                self.shape(output)
            ));
        }
        let end = output.0 + 1;
        let mut from_input = vec![false; end];
        for &v in inputs {
            if v.0 < end {
                from_input[v.0] = true;
            }
        }
        for i in 0..end {
            if !from_input[i] && self.nodes[i].op.parents().iter().any(|p| from_input[p.0]) {
                from_input[i] = true;
            }
        }
        let mut to_output = vec![false; end];
        to_output[output.0] = true;
        for i in (0..end).rev() {
            if to_output[i] {
                for p in self.nodes[i].op.parents() {
                    to_output[p.0] = true;
                }
            }
        }
        let on_path: Vec<bool> = from_input.iter().zip(&to_output).map(|(a, b)| *a && *b).collect();

        let mut adj: Vec<Option<Var>> = vec![None; end];
        if on_path[output.0] {
            let ones = Tensor::full(self.shape(output), T::one());
            adj[output.0] = Some(self.leaf(ones));
        }
        for i in (0..end).rev() {
            let Some(u) = adj[i] else { continue };
            if !on_path[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            if create_graph && !op.twice_differentiable() {
                return Err(Error::NotTwiceDifferentiable(op.name()));
            }
            let wanted = |p: Var| on_path[p.0];
            for (p, g) in self.vjp(Var(i), &op, u, &wanted)? {
                adj[p.0] = Some(match adj[p.0] {
                    Some(prev) => self.add(prev, g)?,
                    None => g,
                });
            }
        }
        inputs
            .iter()
            .map(|&v| match adj.get(v.0).copied().flatten() {
                Some(g) if on_path[v.0] => Ok(g),
                _ => {
                    let z = Tensor::zeros(self.shape(v));
                    Ok(self.leaf(z))
                }
            })
            .collect()
    }

    fn vjp(&mut self, y: Var, op: &Op<T>, u: Var, wanted: &dyn Fn(Var) -> bool) -> Result<Vec<(Var, Var)>> {
        let mut out = Vec::with_capacity(2);
        if !op.parents().into_iter().any(wanted) {
            return Ok(out);
        }
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if wanted(a) {
                    out.push((a, u));
                }
                if wanted(b) {
                    out.push((b, u));
                }
            }
            Op::Sub(a, b) => {
                if wanted(a) {
                    out.push((a, u));
                }
                if wanted(b) {
                    out.push((b, self.neg(u)));
                }
            }
            Op::Mul(a, b) => {
                if wanted(a) {
                    out.push((a, self.mul(u, b)?));
                }
                if wanted(b) {
                    out.push((b, self.mul(u, a)?));
                }
            }
            Op::Neg(a) => out.push((a, self.neg(u))),
            Op::Scale(a, s) => out.push((a, self.scale(u, s))),
            Op::AddScalar(a, _) => out.push((a, u)),
            Op::MaskMul(a, ref m) => out.push((a, self.mask_mul(u, m.clone())?)),
            Op::Exp(a) => out.push((a, self.mul(u, y)?)),
            Op::Log(a) => {
                let r = self.recip(a);
                out.push((a, self.mul(u, r)?));
            }
            Op::Recip(a) => {
                let yy = self.mul(y, y)?;
                let g = self.mul(u, yy)?;
                out.push((a, self.neg(g)));
            }
            Op::Sqrt(a) => {
                let r = self.recip(y);
                let r = self.scale(r, T::lit(0.5));
                out.push((a, self.mul(u, r)?));
            }
            Op::Sigmoid(a) => {
                let ny = self.neg(y);
                let one_minus = self.add_scalar(ny, T::one());
                let d = self.mul(y, one_minus)?;
                out.push((a, self.mul(u, d)?));
            }
            Op::Softmax(a) => {
                let shape = self.shape(y).to_vec();
                let mut row_shape = shape.clone();
                *row_shape.last_mut().unwrap() = 1;
                let uy = self.mul(u, y)?;
                let s = self.sum_to(uy, &row_shape)?;
                let s = self.expand_to(s, &shape)?;
                let c = self.sub(u, s)?;
                out.push((a, self.mul(y, c)?));
            }
            Op::SumTo(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.expand_to(u, &shape)?));
            }
            Op::ExpandTo(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.sum_to(u, &shape)?));
            }
            Op::Reshape(a) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.reshape(u, &shape)?));
            }
            Op::Conv(x, w) => {
                if wanted(x) {
                    out.push((x, self.conv1d_transpose(u, w)?));
                }
                if wanted(w) {
                    let k = self.shape(w)[2];
                    out.push((w, self.conv1d_kernel_grad(x, u, k)?));
                }
            }
            Op::ConvT(g, w) => {
                if wanted(g) {
                    out.push((g, self.conv1d(u, w)?));
                }
                if wanted(w) {
                    let k = self.shape(w)[2];
                    out.push((w, self.conv1d_kernel_grad(u, g, k)?));
                }
            }
            Op::ConvW(x, g) => {
                if wanted(x) {
                    out.push((x, self.conv1d_transpose(g, u)?));
                }
                if wanted(g) {
                    out.push((g, self.conv1d(x, u)?));
                }
            }
            Op::Lin(x, w) => {
                if wanted(x) {
                    out.push((x, self.matmul(u, w)?));
                }
                if wanted(w) {
                    out.push((w, self.outer_sum(x, u)?));
                }
            }
            Op::LinT(g, w) => {
                if wanted(g) {
                    out.push((g, self.matmul_t(u, w)?));
                }
                if wanted(w) {
                    out.push((w, self.outer_sum(u, g)?));
                }
            }
            Op::LinW(x, g) => {
                if wanted(x) {
                    out.push((x, self.matmul(g, u)?));
                }
                if wanted(g) {
                    out.push((g, self.matmul_t(x, u)?));
                }
            }
            Op::Corr(x, ref a) => out.push((x, self.correlate_rows_t(u, a.clone())?)),
            Op::CorrT(x, ref a) => out.push((x, self.correlate_rows(u, a.clone())?)),
            Op::Concat(a, b) => {
                let na = *self.shape(a).last().unwrap();
                let nb = *self.shape(b).last().unwrap();
                if wanted(a) {
                    out.push((a, self.slice_last(u, 0, na)?));
                }
                if wanted(b) {
                    out.push((b, self.slice_last(u, na, nb)?));
                }
            }
            Op::Slice(a, start) => {
                let total = *self.shape(a).last().unwrap();
                out.push((a, self.pad_last(u, start, total)?));
            }
            Op::Pad(a, offset) => {
                let n = *self.shape(a).last().unwrap();
                out.push((a, self.slice_last(u, offset, n)?));
            }
            Op::ArgmaxOneHot(_) => {}
        }
        Ok(out)
    }
}

/// Validates a rank and returns the node's shape.
pub(crate) fn expect_rank<T: Scalar>(g: &Graph<T>, v: Var, rank: usize, what: &str) -> Result<Vec<usize>> {
    let s = g.shape(v).to_vec();
    if s.len() != rank {
        return invalid(format!("{what}: expected rank {rank}, got shape {:?}", s));
    }
    Ok(s)
}
