//! Camera parameter search through a trained generator.
//!
//! The eight parameters are optimized in logit space, `C = sigmoid(õpt)`, so
//! every iterate is a valid parameter set. Each iteration draws a batch of
//! codes from the generator, estimates depths with a soft peak, and takes a
//! plain gradient step on
//!
//! ```text
//! β · mean_i log(1 + dist(Δ_i, median Δ)) + (1 − β) · mean_bits Var_batch(code)
//! ```
//!
//! where `dist` is the wrap-around depth distance. The median is held fixed
//! within an iteration. The loop stops once the inliers rate of the batch,
//! computed from hard peaks, exceeds the threshold.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgan::{noise, GeneratorNet};
use crate::engine::{Graph, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::oracle::{CameraParams, N_PARAMS};
use crate::scalar::Scalar;
use crate::seed::{self, stream};
use crate::signal::{
    circular_depth_distance, depth_from_time, inliers_rate_with, median, per_bit_moments, BinaryCode,
    CameraConstants, CodeBatch, InlierDistance,
};

/// Unconstrained optimization variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogitParams(pub [f64; N_PARAMS]);

impl LogitParams {
    pub fn to_params(&self) -> CameraParams {
        CameraParams::new(self.0.map(crate::engine::kernels::sigmoid)).expect("sigmoid lies in [0, 1]")
    }

    /// Inverse of [`to_params`](Self::to_params) for values strictly inside
    /// `(0, 1)`.
    pub fn from_params(p: &CameraParams) -> Result<Self> {
        let mut out = [0.0; N_PARAMS];
        for (o, &v) in out.iter_mut().zip(p.values()) {
            if !(v > 0.0 && v < 1.0) {
                return invalid(format!("parameter {v} has no finite logit"));
            }
            *o = (v / (1.0 - v)).ln();
        }
        Ok(Self(out))
    }
}

/// Starting point drawn from a standard normal per component.
pub fn init_logits(seed: u64) -> LogitParams {
    let mut rng = seed::rng(seed);
    let mut v = [0.0; N_PARAMS];
    for x in &mut v {
        *x = StandardNormal.sample(&mut rng);
    }
    LogitParams(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    /// Generated codes per iteration.
    pub batch_size: usize,
    /// Weight of the median loss; the variance loss gets `1 − beta`.
    pub beta: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the inliers rate (percent) exceeds this.
    pub threshold: f64,
    pub inlier_radius_mm: f64,
    pub seed: u64,
    /// Independent starts, run in parallel; the best final rate wins.
    pub restarts: usize,
    /// Reuse the first noise batch on every iteration.
    pub freeze_noise: bool,
    /// Measure inliers with the wrap-around distance.
    pub circular_inliers: bool,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            beta: 0.7,
            learning_rate: 0.05,
            max_iters: 2000,
            threshold: 97.0,
            inlier_radius_mm: 30.0,
            seed: 11,
            restarts: 1,
            freeze_noise: false,
            circular_inliers: false,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return invalid("optimization batch needs at least 2 codes");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return invalid("beta must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning rate must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold <= 100.0) {
            return invalid("threshold must lie in (0, 100]");
        }
        if !(self.inlier_radius_mm > 0.0) {
            return invalid("inlier radius must be positive");
        }
        if self.restarts == 0 {
            return invalid("at least one start");
        }
        Ok(())
    }
}

/// `mean_i log(1 + dist(Δ_i, median Δ))` with the wrap-around distance.
pub fn loss_median<T: Scalar>(deltas: &[T], consts: &CameraConstants) -> Result<T> {
    if deltas.len() < 2 {
        return invalid("median loss needs at least 2 depths");
    }
    let med = median(deltas).expect("non-empty");
    let dmax = T::lit(consts.delta_max());
    let mut acc = T::zero();
    for &d in deltas {
        acc += circular_depth_distance(d, med, dmax)?.ln_1p();
    }
    Ok(acc / T::lit(deltas.len() as f64))
}

/// Mean over bits of the per-bit batch variance.
pub fn loss_variance<T: Scalar>(batch: &CodeBatch<T>) -> Result<T> {
    if batch.n_rows() < 2 {
        return invalid("variance loss needs at least 2 codes");
    }
    let (_, var) = per_bit_moments(batch)?;
    Ok(var.iter().copied().sum::<T>() / T::lit(var.len() as f64))
}

/// Graph form of [`loss_median`] on depths `[n]`, median held constant.
pub fn loss_median_node<T: Scalar>(g: &mut Graph<T>, deltas: Var, consts: &CameraConstants) -> Result<Var> {
    let vals = g.value(deltas).data().to_vec();
    if vals.len() < 2 {
        return invalid("median loss needs at least 2 depths");
    }
    let med = median(&vals).expect("non-empty");
    let dmax = T::lit(consts.delta_max());
    for &d in &vals {
        circular_depth_distance(d, med, dmax)?;
    }
    let anchor = g.leaf(Tensor::full(g.shape(deltas), med));
    let diff = g.sub(deltas, anchor)?;
    let u = g.abs(diff)?;
    let nu = g.neg(u);
    let wrap = g.add_scalar(nu, dmax);
    let dist = g.minimum(u, wrap)?;
    let dist = g.add_scalar(dist, T::one());
    let l = g.log(dist);
    g.mean(l)
}

/// Graph form of [`loss_variance`] on codes `[n, L]`.
pub fn loss_variance_node<T: Scalar>(g: &mut Graph<T>, codes: Var) -> Result<Var> {
    if g.shape(codes).len() != 2 || g.shape(codes)[0] < 2 {
        return invalid("variance loss needs a [n >= 2, L] batch");
    }
    let v = g.variance_axis(codes, 0)?;
    g.mean(v)
}

/// Depths `[n]` from codes `[n, L]` through the soft peak of the centred
/// correlation against `alpha`.
pub fn soft_depths<T: Scalar>(
    g: &mut Graph<T>,
    codes: Var,
    alpha: &BinaryCode<T>,
    consts: &CameraConstants,
) -> Result<Var> {
    let n = g.shape(codes)[0];
    let len = alpha.len();
    let reference: Arc<[T]> = alpha.centered().into();
    let rho = g.correlate_rows(codes, reference)?;
    let w = g.softmax(rho)?;
    let k = g.leaf(Tensor::from_vec(&[1, len], (1..=len).map(|i| T::lit(i as f64)).collect())?);
    let k = g.expand_to(k, &[n, len])?;
    let wk = g.mul(w, k)?;
    let t = g.sum_to(wk, &[n, 1])?;
    let t = g.reshape(t, &[n])?;
    let c_over_f = T::lit(consts.light_speed_mm_s / consts.sampling_rate_hz);
    let scaled = g.scale(t, T::lit(0.5) * c_over_f);
    Ok(g.add_scalar(scaled, T::lit(-0.5 * consts.system_delay_mm)))
}

/// Hard-peak depths of every row of a plain `[n, L]` buffer.
fn hard_depths<T: Scalar>(rows: &[T], alpha: &BinaryCode<T>, consts: &CameraConstants) -> Vec<T> {
    let len = alpha.len();
    let centered = alpha.centered();
    rows.chunks(len)
        .map(|row| {
            let mut best = (T::neg_infinity(), 0usize);
            for k in 0..len {
                let v = crate::engine::kernels::dot_circ(&centered, row, k as isize);
                if v > best.0 {
                    best = (v, k);
                }
            }
            depth_from_time(T::lit((best.1 + 1) as f64), consts)
        })
        .collect()
}

/// One row of the optimization trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss_median: f64,
    pub loss_variance: f64,
    pub inliers_rate: f64,
    pub params: CameraParams,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,loss_median,loss_variance,R,p0,p1,p2,p3,p4,p5,p6,p7";

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.iteration, self.loss_median, self.loss_variance, self.inliers_rate
        );
        for v in self.params.values() {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    /// Parameters of the last evaluated iterate.
    pub params: CameraParams,
    pub logits: LogitParams,
    pub converged: bool,
    /// Inliers rate of the last evaluated iterate, percent.
    pub inliers_rate: f64,
    pub restart: usize,
    pub trace: Vec<TraceRow>,
}

/// Runs the search from `start`. `restart` only selects the noise streams.
pub fn optimize_from<T: Scalar>(
    gen: &GeneratorNet<T>,
    alpha: &BinaryCode<f64>,
    consts: &CameraConstants,
    cfg: &OptConfig,
    start: LogitParams,
    restart: usize,
) -> Result<OptResult> {
    cfg.validate()?;
    consts.validate()?;
    let len = gen.arch().code_len;
    if alpha.len() != len || consts.code_length != len {
        return invalid(format!(
            "generator produces codes of length {len}, transmitted code has {} and the camera {}",
            alpha.len(),
            consts.code_length
        ));
    }
    if !alpha.is_hard() {
        return invalid("transmitted code must be hard");
    }
    let alpha_t = BinaryCode::new(alpha.bits().iter().map(|&v| T::lit(v)).collect())?;
    let n = cfg.batch_size;
    let zd = gen.arch().z_dim;
    let distance = if cfg.circular_inliers {
        InlierDistance::Circular {
            delta_max: consts.delta_max(),
        }
    } else {
        InlierDistance::Plain
    };

    let mut logits = start.0.map(T::lit);
    let mut trace = Vec::new();
    for it in 0..cfg.max_iters.max(1) {
        let z_it = if cfg.freeze_noise { 0 } else { it as u64 };
        let mut rng = seed::rng_at(cfg.seed, &[stream::OPT_STEP, restart as u64, z_it]);
        let z = noise::<T>(n, zd, &mut rng);

        let mut g = Graph::new();
        let bound = gen.bind(&mut g);
        let o = g.leaf(Tensor::from_vec(&[1, N_PARAMS], logits.to_vec())?);
        let c = g.sigmoid(o);
        let cond = g.expand_to(c, &[n, N_PARAMS])?;
        let z = g.leaf(z);
        let y = gen.forward(&mut g, &bound, cond, z)?;
        let codes = g.reshape(y, &[n, len])?;
        let deltas = soft_depths(&mut g, codes, &alpha_t, consts)?;
        let lm = loss_median_node(&mut g, deltas, consts)?;
        let lv = loss_variance_node(&mut g, codes)?;
        let wm = g.scale(lm, T::lit(cfg.beta));
        let loss = if cfg.beta < 1.0 {
            let wv = g.scale(lv, T::lit(1.0 - cfg.beta));
            g.add(wm, wv)?
        } else {
            wm
        };

        let params = CameraParams::from_slice(&g.value(c).data().iter().map(|v| v.as_f64()).collect::<Vec<_>>())?;
        let hard = hard_depths(g.value(codes).data(), &alpha_t, consts);
        let rate = inliers_rate_with(&hard, T::lit(cfg.inlier_radius_mm), distance)?.as_f64();
        let (lm_v, lv_v) = (g.item(lm).as_f64(), g.item(lv).as_f64());
        trace.push(TraceRow {
            iteration: it,
            loss_median: lm_v,
            loss_variance: lv_v,
            inliers_rate: rate,
            params,
        });
        let total = g.item(loss);
        if !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "optimization loss at iteration {it} (median {lm_v}, variance {lv_v})"
            )));
        }
        let done = rate > cfg.threshold;
        if done || it + 1 >= cfg.max_iters {
            return Ok(OptResult {
                params,
                logits: LogitParams(logits.map(|v| v.as_f64())),
                converged: done,
                inliers_rate: rate,
                restart,
                trace,
            });
        }
        let grad = g.grad(loss, &[o], false)?[0];
        let lr = T::lit(cfg.learning_rate);
        for (l, &d) in logits.iter_mut().zip(g.value(grad).data()) {
            *l -= lr * d;
        }
    }
    unreachable!("the loop returns on its last iteration")
}

/// Runs `cfg.restarts` independent searches and keeps the one with the
/// highest final inliers rate, lowest index on ties.
pub fn optimize<T: Scalar>(
    gen: &GeneratorNet<T>,
    alpha: &BinaryCode<f64>,
    consts: &CameraConstants,
    cfg: &OptConfig,
) -> Result<OptResult> {
    cfg.validate()?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = init_logits(seed::derive(cfg.seed, &[stream::OPT_INIT, r as u64]));
            optimize_from(gen, alpha, consts, cfg, start, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.inliers_rate > runs[best].inliers_rate {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one run"))
}
