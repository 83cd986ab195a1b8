//! Numeric kernels behind the graph operations. Plain slices in, plain
//! vectors out; shape checking happens in the graph layer.
//!
//! The convolution and affine kernels come in trios. For the circular
//! convolution the trilinear form
//!
//! ```text
//! T(x, w, g) = Σ g[b,o,i] · w[o,c,k] · x[b,c,(i + k - h) mod L],   h = K / 2
//! ```
//!
//! has the forward convolution, the transposed convolution and the kernel
//! gradient as its three partial derivatives, so the vector-Jacobian product
//! of every member of the trio is another member of the trio.

use crate::scalar::Scalar;

/// `y[i] += w * x[(i + s) mod L]`
#[inline]
pub(crate) fn axpy_circ<T: Scalar>(y: &mut [T], x: &[T], w: T, s: isize) {
    let n = y.len();
    debug_assert_eq!(n, x.len());
    if n == 0 {
        return;
    }
    let s = s.rem_euclid(n as isize) as usize;
    let (y_head, y_tail) = y.split_at_mut(n - s);
    for (yi, &xi) in y_head.iter_mut().zip(&x[s..]) {
        *yi += w * xi;
    }
    for (yi, &xi) in y_tail.iter_mut().zip(&x[..s]) {
        *yi += w * xi;
    }
}

/// `Σ_i g[i] * x[(i + s) mod L]`
#[inline]
pub(crate) fn dot_circ<T: Scalar>(g: &[T], x: &[T], s: isize) -> T {
    let n = g.len();
    debug_assert_eq!(n, x.len());
    if n == 0 {
        return T::zero();
    }
    let s = s.rem_euclid(n as isize) as usize;
    let mut acc = T::zero();
    for (&gi, &xi) in g[..n - s].iter().zip(&x[s..]) {
        acc += gi * xi;
    }
    for (&gi, &xi) in g[n - s..].iter().zip(&x[..s]) {
        acc += gi * xi;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub len: usize,
    pub k: usize,
}

impl ConvDims {
    fn half(&self) -> isize {
        (self.k / 2) as isize
    }
}

/// y[b,o,i] = Σ_{c,k} w[o,c,k] · x[b,c,(i+k-h) mod L]
pub(crate) fn conv<T: Scalar>(x: &[T], w: &[T], d: ConvDims) -> Vec<T> {
    let ConvDims { batch, cin, cout, len, k } = d;
    let mut y = vec![T::zero(); batch * cout * len];
    for b in 0..batch {
        for o in 0..cout {
            let yrow = &mut y[(b * cout + o) * len..(b * cout + o + 1) * len];
            for c in 0..cin {
                let xrow = &x[(b * cin + c) * len..(b * cin + c + 1) * len];
                for t in 0..k {
                    let wv = w[(o * cin + c) * k + t];
                    if wv != T::zero() {
                        axpy_circ(yrow, xrow, wv, t as isize - d.half());
                    }
                }
            }
        }
    }
    y
}

/// x̄[b,c,j] = Σ_{o,k} w[o,c,k] · g[b,o,(j-k+h) mod L]
pub(crate) fn conv_t<T: Scalar>(g: &[T], w: &[T], d: ConvDims) -> Vec<T> {
    let ConvDims { batch, cin, cout, len, k } = d;
    let mut xb = vec![T::zero(); batch * cin * len];
    for b in 0..batch {
        for c in 0..cin {
            let xrow = &mut xb[(b * cin + c) * len..(b * cin + c + 1) * len];
            for o in 0..cout {
                let grow = &g[(b * cout + o) * len..(b * cout + o + 1) * len];
                for t in 0..k {
                    let wv = w[(o * cin + c) * k + t];
                    if wv != T::zero() {
                        axpy_circ(xrow, grow, wv, d.half() - t as isize);
                    }
                }
            }
        }
    }
    xb
}

/// w̄[o,c,k] = Σ_{b,i} g[b,o,i] · x[b,c,(i+k-h) mod L]
pub(crate) fn conv_w<T: Scalar>(x: &[T], g: &[T], d: ConvDims) -> Vec<T> {
    let ConvDims { batch, cin, cout, len, k } = d;
    let mut wb = vec![T::zero(); cout * cin * k];
    for b in 0..batch {
        for o in 0..cout {
            let grow = &g[(b * cout + o) * len..(b * cout + o + 1) * len];
            for c in 0..cin {
                let xrow = &x[(b * cin + c) * len..(b * cin + c + 1) * len];
                for t in 0..k {
                    wb[(o * cin + c) * k + t] += dot_circ(grow, xrow, t as isize - d.half());
                }
            }
        }
    }
    wb
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LinDims {
    pub batch: usize,
    pub n_in: usize,
    pub n_out: usize,
}

/// y[b,m] = Σ_n W[m,n] x[b,n]
pub(crate) fn lin<T: Scalar>(x: &[T], w: &[T], d: LinDims) -> Vec<T> {
    let mut y = vec![T::zero(); d.batch * d.n_out];
    for b in 0..d.batch {
        let xr = &x[b * d.n_in..(b + 1) * d.n_in];
        for m in 0..d.n_out {
            let wr = &w[m * d.n_in..(m + 1) * d.n_in];
            y[b * d.n_out + m] = wr.iter().zip(xr).map(|(&a, &b)| a * b).sum();
        }
    }
    y
}

/// x̄[b,n] = Σ_m g[b,m] W[m,n]
pub(crate) fn lin_t<T: Scalar>(g: &[T], w: &[T], d: LinDims) -> Vec<T> {
    let mut xb = vec![T::zero(); d.batch * d.n_in];
    for b in 0..d.batch {
        let xr = &mut xb[b * d.n_in..(b + 1) * d.n_in];
        for m in 0..d.n_out {
            let gv = g[b * d.n_out + m];
            if gv == T::zero() {
                continue;
            }
            let wr = &w[m * d.n_in..(m + 1) * d.n_in];
            for (xi, &wi) in xr.iter_mut().zip(wr) {
                *xi += gv * wi;
            }
        }
    }
    xb
}

/// W̄[m,n] = Σ_b g[b,m] x[b,n]
pub(crate) fn lin_w<T: Scalar>(x: &[T], g: &[T], d: LinDims) -> Vec<T> {
    let mut wb = vec![T::zero(); d.n_out * d.n_in];
    for b in 0..d.batch {
        let xr = &x[b * d.n_in..(b + 1) * d.n_in];
        for m in 0..d.n_out {
            let gv = g[b * d.n_out + m];
            if gv == T::zero() {
                continue;
            }
            let wr = &mut wb[m * d.n_in..(m + 1) * d.n_in];
            for (wi, &xi) in wr.iter_mut().zip(xr) {
                *wi += gv * xi;
            }
        }
    }
    wb
}

/// ρ[b,k] = Σ_i a[i] · x[b,(i+k) mod L], lag `k` zero-based.
pub(crate) fn corr<T: Scalar>(x: &[T], a: &[T], batch: usize) -> Vec<T> {
    let len = a.len();
    let mut out = vec![T::zero(); batch * len];
    for b in 0..batch {
        let xr = &x[b * len..(b + 1) * len];
        for k in 0..len {
            out[b * len + k] = dot_circ(a, xr, k as isize);
        }
    }
    out
}

/// x̄[b,j] = Σ_k u[b,k] · a[(j-k) mod L]
pub(crate) fn corr_t<T: Scalar>(u: &[T], a: &[T], batch: usize) -> Vec<T> {
    let len = a.len();
    let mut out = vec![T::zero(); batch * len];
    for b in 0..batch {
        let orow = &mut out[b * len..(b + 1) * len];
        for k in 0..len {
            let uv = u[b * len + k];
            if uv != T::zero() {
                axpy_circ(orow, a, uv, -(k as isize));
            }
        }
    }
    out
}

/// Row-wise softmax over the last axis, max-subtracted.
pub(crate) fn softmax_rows<T: Scalar>(x: &[T], row: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for r in x.chunks(row) {
        let m = r.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let start = out.len();
        let mut z = T::zero();
        for &v in r {
            let e = (v - m).exp();
            z += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v = *v / z;
        }
    }
    out
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
