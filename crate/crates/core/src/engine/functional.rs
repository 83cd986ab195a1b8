//! Composite operations assembled from the graph primitives. Their
//! derivatives come for free from the primitives' vector-Jacobian products.

use std::sync::Arc;

use super::graph::{expect_rank, Graph, Var};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Negative-branch slope of the networks' activation.
pub const LEAKY_SLOPE: f64 = 0.2;

impl<T: Scalar> Graph<T> {
    /// `x` for `x > 0`, `slope·x` otherwise. The derivative at 0 takes the
    /// negative branch.
    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Result<Var> {
        let mask: Arc<[T]> = self
            .value(x)
            .data()
            .iter()
            .map(|&v| if v > T::zero() { T::one() } else { slope })
            .collect();
        self.mask_mul(x, mask)
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        let mask: Arc<[T]> = self
            .value(x)
            .data()
            .iter()
            .map(|&v| if v > T::zero() { T::one() } else { -T::one() })
            .collect();
        self.mask_mul(x, mask)
    }

    /// Elementwise minimum; ties select `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err("minimum: shapes differ");
        }
        let pick_a: Vec<bool> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x <= y)
            .collect();
        let ma: Arc<[T]> = pick_a.iter().map(|&p| if p { T::one() } else { T::zero() }).collect();
        let mb: Arc<[T]> = pick_a.iter().map(|&p| if p { T::zero() } else { T::one() }).collect();
        let ta = self.mask_mul(a, ma)?;
        let tb = self.mask_mul(b, mb)?;
        self.add(ta, tb)
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.sum_to(x, &[])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        let s = self.sum(x)?;
        Ok(self.scale(s, T::one() / T::lit(n as f64)))
    }

    /// Mean over `axis`, keeping it as a length-1 axis.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return shape_err(format!("axis {axis} out of range for {:?}", shape));
        }
        let n = shape[axis];
        let mut target = shape;
        target[axis] = 1;
        let s = self.sum_to(x, &target)?;
        Ok(self.scale(s, T::one() / T::lit(n as f64)))
    }

    /// Population variance over `axis` (divide by the axis length), keeping
    /// it as a length-1 axis. A single element has variance 0.
    pub fn variance_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let m = self.mean_axis(x, axis)?;
        let m = self.expand_to(m, &shape)?;
        let d = self.sub(x, m)?;
        let d2 = self.mul(d, d)?;
        self.mean_axis(d2, axis)
    }

    pub fn squared_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        self.mul(d, d)
    }

    pub fn l1_norm(&mut self, x: Var) -> Result<Var> {
        let a = self.abs(x)?;
        self.sum(a)
    }

    pub fn l2_norm(&mut self, x: Var) -> Result<Var> {
        let sq = self.mul(x, x)?;
        let s = self.sum(sq)?;
        Ok(self.sqrt(s))
    }

    /// Euclidean norm of every row (all axes but the first), shape `[b]`.
    pub fn l2_norm_rows(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.is_empty() {
            return shape_err("l2_norm_rows needs a batch axis");
        }
        let b = shape[0];
        let flat = self.reshape(x, &[b, shape[1..].iter().product()])?;
        let sq = self.mul(flat, flat)?;
        let s = self.sum_to(sq, &[b, 1])?;
        let s = self.reshape(s, &[b])?;
        Ok(self.sqrt(s))
    }

    /// Affine map `x[b,n] → x·Wᵀ + bias`, `w[m,n]`, `bias[m]`.
    pub fn fully_connected(&mut self, x: Var, w: Var, bias: Var) -> Result<Var> {
        let xs = expect_rank(self, x, 2, "fully_connected input")?;
        let ws = expect_rank(self, w, 2, "fully_connected weight")?;
        if self.shape(bias) != [ws[0]] {
            return shape_err(format!("fully_connected bias {:?} for {} outputs", self.shape(bias), ws[0]));
        }
        let y = self.matmul_t(x, w)?;
        let bb = self.reshape(bias, &[1, ws[0]])?;
        let bb = self.expand_to(bb, &[xs[0], ws[0]])?;
        self.add(y, bb)
    }

    /// Circular convolution with a per-output-channel bias. Length is
    /// preserved: `y[b,o,i] = bias[o] + Σ_{c,k} w[o,c,k]·x[b,c,(i+k−K/2) mod L]`.
    pub fn conv1d_circular(&mut self, x: Var, w: Var, bias: Var) -> Result<Var> {
        let y = self.conv1d(x, w)?;
        let ys = self.shape(y).to_vec();
        if self.shape(bias) != [ys[1]] {
            return shape_err(format!("conv1d bias {:?} for {} channels", self.shape(bias), ys[1]));
        }
        let bb = self.reshape(bias, &[1, ys[1], 1])?;
        let bb = self.expand_to(bb, &ys)?;
        self.add(y, bb)
    }
}
