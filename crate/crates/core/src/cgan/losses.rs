//! Critic and generator objectives.
//!
//! The critic's raw first output is `D(x)[0]`; both objectives use it
//! directly:
//!
//! ```text
//! D_loss = E[D(G(z|C))[0]] − E[D(x)[0]]
//!        + λ_GP · E[(‖∇_x D(x)[0]‖₂ − 1)²] + λ_parameters · E‖D(x)[1:] − C‖₂
//! G_loss = −α·E[D(G(z|C))[0]] + α·λ_parameters·E‖D(G(z|C))[1:] − C‖₂
//!        + λ_mean·‖E[G(z|C)] − E[x|C]‖₁ + λ_variance·‖Var[G(z|C)] − Var[x|C]‖₁
//! ```

use super::nets::{BoundNet, DiscriminatorNet, GeneratorNet};
use crate::engine::{Graph, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::oracle::N_PARAMS;
use crate::scalar::Scalar;

/// Weight of the adversarial generator terms at a given iteration:
/// `min(1, iter / constant)` once `iter > threshold`, 0 before.
pub fn curriculum_alpha(iter: u64, threshold: u64, constant: f64) -> f64 {
    if iter > threshold {
        (iter as f64 / constant).min(1.0)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub gp: f64,
    pub parameters: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Where the gradient penalty is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PenaltyPoint {
    /// At the real samples, as the objective is written.
    Real,
    /// At per-row interpolations `ε·x_real + (1 − ε)·x_fake`, `ε` given.
    Interpolated,
}

/// Node handles of the critic objective and its parts.
#[derive(Clone, Copy, Debug)]
pub struct CriticLoss {
    pub total: Var,
    pub adversarial: Var,
    pub penalty: Var,
    pub parameters: Var,
}

/// Node handles of the generator objective and its parts.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorLoss {
    pub total: Var,
    pub adversarial: Option<Var>,
    pub parameters: Option<Var>,
    pub mean: Var,
    pub variance: Var,
}

fn score_column<T: Scalar>(g: &mut Graph<T>, out: Var) -> Result<Var> {
    g.slice_last(out, 0, 1)
}

/// `E_b ‖Ĉ_b − C_b‖₂`
fn parameter_error<T: Scalar>(g: &mut Graph<T>, out: Var, cond: Var) -> Result<Var> {
    let c_hat = g.slice_last(out, 1, N_PARAMS)?;
    let d = g.sub(c_hat, cond)?;
    let n = g.l2_norm_rows(d)?;
    g.mean(n)
}

/// Gradient penalty `E[(‖∇_x D(x)[0]‖₂ − 1)²]` at the rows of `x`, with the
/// first backward pass recorded so the result is differentiable in the
/// critic weights.
pub fn gradient_penalty<T: Scalar>(g: &mut Graph<T>, disc: &DiscriminatorNet<T>, d: &BoundNet, x: Var) -> Result<Var> {
    let out = disc.forward(g, d, x)?;
    penalty_from_output(g, out, x)
}

/// Gradient penalty given the critic output `out` already recorded on `x`.
fn penalty_from_output<T: Scalar>(g: &mut Graph<T>, out: Var, x: Var) -> Result<Var> {
    let s = score_column(g, out)?;
    let s = g.sum(s)?;
    let gx = g.grad(s, &[x], true)?[0];
    let norms = g.l2_norm_rows(gx)?;
    let dev = g.add_scalar(norms, -T::one());
    let sq = g.mul(dev, dev)?;
    g.mean(sq)
}

/// Critic objective. `real[b,1,L]`, `cond[b,8]`, `z[b,z_dim]` are leaves of
/// `g`; `eps` (one per row) is only read for [`PenaltyPoint::Interpolated`].
#[allow(clippy::too_many_arguments)]
pub fn d_loss<T: Scalar>(
    g: &mut Graph<T>,
    gen: &GeneratorNet<T>,
    gb: &BoundNet,
    disc: &DiscriminatorNet<T>,
    db: &BoundNet,
    real: Var,
    cond: Var,
    z: Var,
    weights: &LossWeights,
    point: PenaltyPoint,
    eps: &[T],
) -> Result<CriticLoss> {
    let rs = g.shape(real).to_vec();
    if g.shape(cond)[0] != rs[0] || g.shape(z)[0] != rs[0] {
        return shape_err("critic loss: real, condition and noise batches differ in size");
    }
    let fake = gen.forward(g, gb, cond, z)?;
    let fake_out = disc.forward(g, db, fake)?;
    let real_out = disc.forward(g, db, real)?;
    let fs = score_column(g, fake_out)?;
    let fs = g.mean(fs)?;
    let rsc = score_column(g, real_out)?;
    let rsc = g.mean(rsc)?;
    let adversarial = g.sub(fs, rsc)?;

    let penalty = match point {
        PenaltyPoint::Real => penalty_from_output(g, real_out, real)?,
        PenaltyPoint::Interpolated => {
            if eps.len() != rs[0] {
                return shape_err("one interpolation weight per row required");
            }
            let (xr, xf) = (g.value(real).data().to_vec(), g.value(fake).data().to_vec());
            let row = rs[1] * rs[2];
            let data = xr
                .iter()
                .zip(&xf)
                .enumerate()
                .map(|(i, (&r, &f))| {
                    let e = eps[i / row];
                    e * r + (T::one() - e) * f
                })
                .collect();
            let x = g.leaf(Tensor::from_vec(&rs, data)?);
            gradient_penalty(g, disc, db, x)?
        }
    };
    let parameters = parameter_error(g, real_out, cond)?;

    let a = g.scale(penalty, T::lit(weights.gp));
    let b = g.scale(parameters, T::lit(weights.parameters));
    let t = g.add(adversarial, a)?;
    let total = g.add(t, b)?;
    Ok(CriticLoss {
        total,
        adversarial,
        penalty,
        parameters,
    })
}

/// Generator objective over `groups` groups of `per_group` rows each.
///
/// `cond[groups·per_group, 8]` and `z` are leaves; rows of one group are
/// contiguous and share a condition. `real_mean` and `real_var` hold the
/// per-bit moments of the real codes of each group, shape `[groups, 1, L]`.
/// The adversarial terms are only recorded for `alpha > 0`, so with
/// `alpha = 0` the objective does not depend on the critic at all.
#[allow(clippy::too_many_arguments)]
pub fn g_loss<T: Scalar>(
    g: &mut Graph<T>,
    gen: &GeneratorNet<T>,
    gb: &BoundNet,
    disc: &DiscriminatorNet<T>,
    db: &BoundNet,
    cond: Var,
    z: Var,
    groups: usize,
    real_mean: &Tensor<T>,
    real_var: &Tensor<T>,
    alpha: f64,
    weights: &LossWeights,
) -> Result<GeneratorLoss> {
    let n = g.shape(cond)[0];
    let len = gen.arch().code_len;
    if groups == 0 || n % groups != 0 || n / groups < 1 {
        return shape_err(format!("{n} generated rows cannot form {groups} groups"));
    }
    if real_mean.shape() != [groups, 1, len] || real_var.shape() != [groups, 1, len] {
        return shape_err("real moments must have shape [groups, 1, L]");
    }
    let fake = gen.forward(g, gb, cond, z)?;
    let grouped = g.reshape(fake, &[groups, n / groups, len])?;
    let fm = g.mean_axis(grouped, 1)?;
    let fv = g.variance_axis(grouped, 1)?;
    let rm = g.leaf(real_mean.clone());
    let rv = g.leaf(real_var.clone());
    let dm = g.sub(fm, rm)?;
    let mean = g.l1_norm(dm)?;
    let mean = g.scale(mean, T::one() / T::lit(groups as f64));
    let dv = g.sub(fv, rv)?;
    let variance = g.l1_norm(dv)?;
    let variance = g.scale(variance, T::one() / T::lit(groups as f64));

    let wm = g.scale(mean, T::lit(weights.mean));
    let wv = g.scale(variance, T::lit(weights.variance));
    let mut total = g.add(wm, wv)?;

    let (mut adversarial, mut parameters) = (None, None);
    if alpha > 0.0 {
        let out = disc.forward(g, db, fake)?;
        let s = score_column(g, out)?;
        let s = g.mean(s)?;
        let adv = g.scale(s, T::lit(-alpha));
        let pe = parameter_error(g, out, cond)?;
        let pe = g.scale(pe, T::lit(alpha * weights.parameters));
        total = g.add(total, adv)?;
        total = g.add(total, pe)?;
        adversarial = Some(adv);
        parameters = Some(pe);
    }
    Ok(GeneratorLoss {
        total,
        adversarial,
        parameters,
        mean,
        variance,
    })
}

/// Per-group per-bit mean and variance of real codes, `[groups, 1, L]` each.
pub fn group_moments<T: Scalar>(rows: &[T], groups: usize, len: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    if groups == 0 || len == 0 || rows.len() % (groups * len) != 0 || rows.is_empty() {
        return shape_err("real rows do not split into equal groups");
    }
    let per = rows.len() / (groups * len);
    let mut mean = vec![T::zero(); groups * len];
    let mut var = vec![T::zero(); groups * len];
    for gi in 0..groups {
        let block = &rows[gi * per * len..(gi + 1) * per * len];
        let m = &mut mean[gi * len..(gi + 1) * len];
        for r in block.chunks(len) {
            for (a, &v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        for a in m.iter_mut() {
            *a = *a / T::lit(per as f64);
        }
        let v = &mut var[gi * len..(gi + 1) * len];
        for r in block.chunks(len) {
            for ((a, &x), &mu) in v.iter_mut().zip(r).zip(mean[gi * len..(gi + 1) * len].iter()) {
                *a += (x - mu) * (x - mu);
            }
        }
        for a in v.iter_mut() {
            *a = *a / T::lit(per as f64);
        }
    }
    Ok((
        Tensor::from_vec(&[groups, 1, len], mean)?,
        Tensor::from_vec(&[groups, 1, len], var)?,
    ))
}
