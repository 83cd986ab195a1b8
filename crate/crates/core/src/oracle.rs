//! Synthetic coded-pulse camera.
//!
//! A stochastic forward process conditioned on eight normalized camera
//! parameters. It reproduces the pathologies seen on real back-scattered
//! codes: phase shift, row-to-row inconsistency, smeared edges, distorted
//! duty cycle, low-power bit noise and whole-code outliers. Every effect is
//! weakest at an interior optimum `p*`; `d_k = p_k − p_k*` and `e_k = |d_k|`.
//!
//! Flips, duty and edge smear are pairs of opposing mechanisms. Each side of
//! the optimum switches one of them on through a logistic ramp in `d_k`, so
//! lost returns and spurious ones, or eaten and widened edges, hit different
//! bits. Skew follows `e5` linearly. Jitter and outliers are symmetric and
//! stay off within a dead zone around the optimum, then grow with the
//! squared excess offset.
//!
//! | index | effect                                    |
//! |-------|-------------------------------------------|
//! | 0, 1  | bit flip probability                      |
//! | 2     | duty distortion (runs of 1s grow/shrink)  |
//! | 3     | rising-edge smear                         |
//! | 4     | falling-edge smear                        |
//! | 5     | systematic sub-sample skew                |
//! | 6     | timing jitter                             |
//! | 7     | outlier rate                              |

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::seed::{self, stream, Rng};
use crate::signal::{
    circular_correlate, estimate_depth_batch, hard_argmax, inliers_rate, median, BinaryCode, CameraConstants,
    CodeBatch, PeakMode,
};

pub const N_PARAMS: usize = 8;

/// Eight camera control values, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraParams([f64; N_PARAMS]);

impl CameraParams {
    pub fn new(p: [f64; N_PARAMS]) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return invalid(format!("camera parameter {v} outside [0, 1]"));
        }
        Ok(Self(p))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let arr: [f64; N_PARAMS] = p
            .try_into()
            .map_err(|_| crate::Error::InvalidArgument(format!("expected {N_PARAMS} parameters, got {}", p.len())))?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; N_PARAMS] {
        &self.0
    }

    /// The parameters after a round trip through `f32`, which is how they
    /// are stored in dataset files.
    pub fn to_f32_precision(self) -> Self {
        Self(self.0.map(|v| v as f32 as f64))
    }
}

/// Per-effect strengths. See the module docs for how each one enters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectCoefficients {
    /// Largest extra flip probability, reached far from the optimum.
    pub flip: f64,
    /// Flip probability floor, before the reflectivity scaling.
    pub flip_floor: f64,
    /// Largest probability that a run of 1s is lengthened or shortened.
    pub duty: f64,
    /// Largest probability that a rising edge moves by one sample.
    pub rise: f64,
    /// Largest probability that a falling edge moves by one sample.
    pub fall: f64,
    /// Deterministic shift, samples per unit `e5`.
    pub skew: f64,
    /// Jitter standard deviation, samples per unit squared excess offset.
    pub jitter: f64,
    /// Outlier probability per unit squared excess offset.
    pub outlier: f64,
    /// Offset `e6` (`e7`) below which jitter (outliers) stay off.
    pub dead_zone: f64,
}

impl Default for EffectCoefficients {
    fn default() -> Self {
        Self {
            flip: 0.15,
            flip_floor: 0.002,
            duty: 0.5,
            rise: 0.3,
            fall: 0.3,
            skew: 0.6,
            jitter: 3.0,
            outlier: 4.0,
            dead_zone: 0.2,
        }
    }
}

impl EffectCoefficients {
    /// All stochastic and systematic effects switched off.
    pub fn zero() -> Self {
        Self {
            flip: 0.0,
            flip_floor: 0.0,
            duty: 0.0,
            rise: 0.0,
            fall: 0.0,
            skew: 0.0,
            jitter: 0.0,
            outlier: 0.0,
            dead_zone: 0.0,
        }
    }

    fn all(&self) -> [f64; 9] {
        [
            self.flip,
            self.flip_floor,
            self.duty,
            self.rise,
            self.fall,
            self.skew,
            self.jitter,
            self.outlier,
            self.dead_zone,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Distance of the single target, mm.
    pub distance_mm: f64,
    /// Target reflectivity in `(0, 1]`; lower values raise the flip rate.
    pub reflectivity: f64,
    /// Interior optimum `p*`, each component in `(0.2, 0.8)`.
    pub optimum: [f64; N_PARAMS],
    pub effects: EffectCoefficients,
    pub base_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            // an integer number of samples away: t = 10 at default constants
            distance_mm: 5.0 * 299.792_458 - 300.0,
            reflectivity: 0.5,
            optimum: [0.35, 0.6, 0.45, 0.3, 0.65, 0.55, 0.4, 0.7],
            effects: EffectCoefficients::default(),
            base_seed: 2021,
        }
    }
}

/// The synthetic camera: oracle configuration plus the ranging constants it
/// shares with the depth estimator.
#[derive(Clone, Debug)]
pub struct OracleCamera {
    config: OracleConfig,
    consts: CameraConstants,
}

impl OracleCamera {
    pub fn new(config: OracleConfig, consts: CameraConstants) -> Result<Self> {
        consts.validate()?;
        let dmax = consts.delta_max();
        if !(config.distance_mm > 0.0 && config.distance_mm <= dmax) {
            return invalid(format!("distance {} mm outside (0, {dmax}]", config.distance_mm));
        }
        if !(config.reflectivity > 0.0 && config.reflectivity <= 1.0) {
            return invalid("reflectivity must lie in (0, 1]");
        }
        if config.optimum.iter().any(|v| !(*v > 0.2 && *v < 0.8)) {
            return invalid("optimum components must lie in (0.2, 0.8)");
        }
        if config.effects.all().iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return invalid("effect coefficients must be finite and non-negative");
        }
        Ok(Self { config, consts })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn consts(&self) -> &CameraConstants {
        &self.consts
    }

    pub fn optimum(&self) -> CameraParams {
        CameraParams(self.config.optimum)
    }

    /// SHA-256 over a canonical rendering of the configuration.
    pub fn digest(&self) -> [u8; 32] {
        let canon = format!("{:?}|{:?}", self.config, self.consts);
        Sha256::digest(canon.as_bytes()).into()
    }

    /// Ideal round-trip delay in samples, relative to the 1-based peak
    /// convention: a code shifted right by `s` peaks at `t = s + 1`.
    pub fn true_shift(&self) -> f64 {
        let k = &self.consts;
        (2.0 * self.config.distance_mm + k.system_delay_mm) * k.sampling_rate_hz / k.light_speed_mm_s - 1.0
    }

    fn signed_offsets(&self, p: &CameraParams) -> [f64; N_PARAMS] {
        let mut d = [0.0; N_PARAMS];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = p.0[k] - self.config.optimum[k];
        }
        d
    }

    fn offsets(&self, p: &CameraParams) -> [f64; N_PARAMS] {
        self.signed_offsets(p).map(f64::abs)
    }

    /// Per-bit flip probabilities `(1→0, 0→1)`. Weak power (`p0 < p0*`) and
    /// a high threshold (`p1 > p1*`) lose returns; the opposite sides add
    /// spurious ones.
    pub fn flip_probabilities(&self, p: &CameraParams) -> (f64, f64) {
        let d = self.signed_offsets(p);
        let c = &self.config.effects;
        let q = |x: f64| ((c.flip_floor + c.flip * ramp(x)) / self.config.reflectivity).min(0.5);
        (q(d[1] - d[0]), q(d[0] - d[1]))
    }

    fn beyond_dead_zone(&self, e: f64) -> f64 {
        (e - self.config.effects.dead_zone).max(0.0)
    }

    pub fn outlier_probability(&self, p: &CameraParams) -> f64 {
        let e = self.beyond_dead_zone(self.offsets(p)[7]);
        (self.config.effects.outlier * e * e).min(1.0)
    }

    pub fn jitter_std(&self, p: &CameraParams) -> f64 {
        let e = self.beyond_dead_zone(self.offsets(p)[6]);
        self.config.effects.jitter * e * e
    }

    pub fn skew(&self, p: &CameraParams) -> f64 {
        self.config.effects.skew * self.offsets(p)[5]
    }

    /// One back-scattered code. Deterministic in `(alpha, params, config,
    /// seed)`.
    pub fn transmit(&self, alpha: &BinaryCode<f64>, params: &CameraParams, seed: u64) -> Result<BinaryCode<f64>> {
        if alpha.len() != self.consts.code_length {
            return invalid(format!(
                "transmitted code has length {}, camera expects {}",
                alpha.len(),
                self.consts.code_length
            ));
        }
        if !alpha.is_hard() {
            return invalid("transmitted code must be hard");
        }
        let a: Vec<bool> = alpha.to_bools();
        let mut rng = seed::rng(seed);
        let bits = self.backscatter(&a, params, &mut rng);
        BinaryCode::from_bools(&bits)
    }

    fn backscatter(&self, a: &[bool], p: &CameraParams, rng: &mut Rng) -> Vec<bool> {
        let n = a.len();
        let e = self.offsets(p);
        let c = &self.config.effects;

        // delay, skew and jitter compose into one fractional shift
        let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * self.jitter_std(p);
        let shift = self.true_shift() + c.skew * e[5] + jitter;
        let mut code = fractional_shift(a, shift);

        // every edge can widen or be eaten; which one dominates depends on
        // the side of the optimum
        let d = self.signed_offsets(p);
        let rise = (c.rise * ramp(d[3]), c.rise * ramp(-d[3]));
        let fall = (c.fall * ramp(d[4]), c.fall * ramp(-d[4]));
        let src = code.clone();
        for i in 0..n {
            let prev = src[(i + n - 1) % n];
            let cur = src[i];
            if prev == cur {
                continue;
            }
            let (widen, eat) = if cur { rise } else { fall };
            let u = rng.random::<f64>();
            let widen = if u < widen {
                true
            } else if u < widen + eat {
                false
            } else {
                continue;
            };
            match (cur, widen) {
                (true, true) => code[(i + n - 1) % n] = true,
                (true, false) => code[i] = false,
                (false, true) => code[i] = true,
                (false, false) => code[(i + n - 1) % n] = false,
            }
        }

        // duty moves both ends of a run together
        let (longer, shorter) = (c.duty * ramp(d[2]), c.duty * ramp(-d[2]));
        let src = code.clone();
        for (start, len) in runs_of_ones(&src) {
            let u = rng.random::<f64>();
            let end = (start + len - 1) % n;
            if u < longer {
                code[(start + n - 1) % n] = true;
                code[(end + 1) % n] = true;
            } else if u < longer + shorter && len > 2 {
                code[start] = false;
                code[end] = false;
            }
        }

        let (q10, q01) = self.flip_probabilities(p);
        if q10 > 0.0 || q01 > 0.0 {
            for b in code.iter_mut() {
                if rng.random::<f64>() < if *b { q10 } else { q01 } {
                    *b = !*b;
                }
            }
        }

        let r = self.outlier_probability(p);
        if r > 0.0 && rng.random::<f64>() < r {
            for b in code.iter_mut() {
                *b = rng.random::<bool>();
            }
        }
        code
    }

    /// `reps` codes for every parameter set. Each record is seeded from
    /// `(base_seed, group, rep)`, so the result does not depend on the
    /// thread count.
    pub fn generate_dataset(&self, alpha: &BinaryCode<f64>, param_sets: &[CameraParams], reps: usize) -> Result<Dataset> {
        if reps == 0 {
            return invalid("reps must be at least 1");
        }
        if param_sets.is_empty() {
            return invalid("no parameter sets");
        }
        let base = self.config.base_seed;
        let groups = param_sets
            .par_iter()
            .enumerate()
            .map(|(g, params)| {
                let codes = (0..reps)
                    .map(|r| self.transmit(alpha, params, seed::derive(base, &[stream::TRANSMIT, g as u64, r as u64])))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DatasetGroup {
                    params: *params,
                    codes: CodeBatch::from_codes(&codes)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            transmitted: alpha.clone(),
            groups,
            reps,
            base_seed: base,
            oracle_digest: self.digest(),
        })
    }

    /// Draws `n` codes at `params` and summarizes their hard-peak depth
    /// estimates.
    pub fn eval(&self, alpha: &BinaryCode<f64>, params: &CameraParams, n: usize, seed: u64) -> Result<OracleEval> {
        if n < 2 {
            return invalid("oracle evaluation needs at least 2 samples");
        }
        let codes = (0..n)
            .into_par_iter()
            .map(|i| self.transmit(alpha, params, seed::derive(seed, &[stream::EVAL, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        let batch = CodeBatch::from_codes(&codes)?;
        let deltas: Vec<f64> = estimate_depth_batch(alpha, &batch, &self.consts, PeakMode::Hard)?
            .into_iter()
            .map(|e| e.delta)
            .collect();
        let rate = inliers_rate(&deltas, self.consts.inlier_radius_mm)?;
        let med = median(&deltas).expect("n ≥ 2");
        let mean = deltas.iter().sum::<f64>() / n as f64;
        let std = (deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64).sqrt();
        Ok(OracleEval {
            inliers_rate: rate,
            median_mm: med,
            std_mm: std,
            deltas,
        })
    }
}

#[derive(Clone, Debug)]
pub struct OracleEval {
    pub inliers_rate: f64,
    pub median_mm: f64,
    pub std_mm: f64,
    pub deltas: Vec<f64>,
}

/// Share of an effect switched on at signed offset `x` from the optimum:
/// a logistic ramp, about 5% at the optimum, 50% at `x = 0.5` and under
/// 1% at `x = −0.3`.
fn ramp(x: f64) -> f64 {
    1.0 / (1.0 + (3.0 - 6.0 * x).exp())
}

/// Right shift by a real number of samples: linear interpolation between
/// the two neighbouring integer shifts, then re-thresholding at 0.5.
fn fractional_shift(a: &[bool], shift: f64) -> Vec<bool> {
    let n = a.len() as i64;
    let whole = shift.floor();
    let frac = shift - whole;
    let whole = whole as i64;
    (0..n)
        .map(|i| {
            let near = a[(i - whole).rem_euclid(n) as usize] as u8 as f64;
            let far = a[(i - whole - 1).rem_euclid(n) as usize] as u8 as f64;
            (1.0 - frac) * near + frac * far >= 0.5
        })
        .collect()
}

/// `(start, length)` of every circular run of 1s. Empty for constant codes.
fn runs_of_ones(code: &[bool]) -> Vec<(usize, usize)> {
    let n = code.len();
    let Some(anchor) = (0..n).find(|&i| !code[i]) else {
        return Vec::new();
    };
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        let idx = (anchor + i) % n;
        if code[idx] {
            let start = idx;
            let mut len = 0;
            while i < n && code[(anchor + i) % n] {
                len += 1;
                i += 1;
            }
            runs.push((start, len));
        } else {
            i += 1;
        }
    }
    runs
}

/// One group of the training database.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetGroup {
    pub params: CameraParams,
    pub codes: CodeBatch<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub transmitted: BinaryCode<f64>,
    pub groups: Vec<DatasetGroup>,
    pub reps: usize,
    pub base_seed: u64,
    pub oracle_digest: [u8; 32],
}

impl Dataset {
    pub fn code_len(&self) -> usize {
        self.transmitted.len()
    }

    pub fn total_codes(&self) -> usize {
        self.groups.len() * self.reps
    }
}

/// `count` parameter sets drawn uniformly from `[0, 1]^8`, rounded to `f32`
/// precision.
pub fn random_param_sets(count: usize, seed: u64) -> Vec<CameraParams> {
    let mut rng = seed::rng_at(seed, &[stream::PARAM_SETS]);
    (0..count)
        .map(|_| {
            let mut p = [0.0; N_PARAMS];
            for v in &mut p {
                *v = rng.random::<f64>();
            }
            CameraParams(p).to_f32_precision()
        })
        .collect()
}

/// Uniform draws from the shrunken box `[margin, 1 − margin]^8`.
pub fn interior_param_sets(count: usize, margin: f64, seed: u64) -> Vec<CameraParams> {
    let mut rng = seed::rng_at(seed, &[stream::HELDOUT]);
    (0..count)
        .map(|_| {
            let mut p = [0.0; N_PARAMS];
            for v in &mut p {
                *v = margin + (1.0 - 2.0 * margin) * rng.random::<f64>();
            }
            CameraParams(p).to_f32_precision()
        })
        .collect()
}

/// A balanced pseudo-random hard code with a low correlation sidelobe:
/// the best of 64 candidates by peak-to-sidelobe margin.
pub fn transmitted_code(len: usize, seed: u64) -> Result<BinaryCode<f64>> {
    if len < 2 {
        return invalid("code length must be at least 2");
    }
    let mut rng = seed::rng_at(seed, &[stream::CODE]);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..64 {
        let mut bits: Vec<bool> = (0..len).map(|i| i < len / 2).collect();
        bits.shuffle(&mut rng);
        let code = BinaryCode::<f64>::from_bools(&bits)?;
        let rho = circular_correlate(code.bits(), code.bits())?;
        debug_assert_eq!(hard_argmax(&rho), 1);
        let sidelobe = rho[1..].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let margin = rho[0] - sidelobe;
        if best.as_ref().is_none_or(|(m, _)| margin > *m) {
            best = Some((margin, bits));
        }
    }
    BinaryCode::from_bools(&best.expect("at least one candidate").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera(effects: EffectCoefficients) -> OracleCamera {
        OracleCamera::new(
            OracleConfig {
                effects,
                ..OracleConfig::default()
            },
            CameraConstants::default(),
        )
        .unwrap()
    }

    fn params(v: f64) -> CameraParams {
        CameraParams::new([v; 8]).unwrap()
    }

    #[test]
    fn noiseless_transmit_is_an_exact_shift() {
        let cam = camera(EffectCoefficients::zero());
        let alpha = transmitted_code(128, 1).unwrap();
        let s = cam.true_shift();
        assert!((s - 9.0).abs() < 1e-9);
        for seed in 0..5 {
            let out = cam.transmit(&alpha, &params(0.0), seed).unwrap();
            assert_eq!(out, alpha.shifted_right(9));
        }
    }

    #[test]
    fn noiseless_round_trip_for_integer_distances() {
        let k = CameraConstants::default();
        let alpha = transmitted_code(128, 5).unwrap();
        for t in [3usize, 10, 40, 100] {
            let dist = crate::signal::depth_from_time(t as f64, &k);
            let cam = OracleCamera::new(
                OracleConfig {
                    distance_mm: dist,
                    effects: EffectCoefficients::zero(),
                    ..OracleConfig::default()
                },
                k.clone(),
            )
            .unwrap();
            let ev = cam.eval(&alpha, &params(0.9), 8, 3).unwrap();
            assert!((ev.median_mm - dist).abs() <= k.mm_per_sample());
            assert_eq!(ev.inliers_rate, 100.0);
        }
    }

    #[test]
    fn forced_outliers_are_fair_coins() {
        let effects = EffectCoefficients {
            outlier: 1e6,
            ..EffectCoefficients::zero()
        };
        let cam = camera(effects);
        let alpha = transmitted_code(128, 2).unwrap();
        assert_eq!(cam.outlier_probability(&params(0.0)), 1.0);
        let n = 10_000;
        let mut ones = vec![0usize; 128];
        for s in 0..n {
            let out = cam.transmit(&alpha, &params(0.0), s).unwrap();
            for (o, &b) in ones.iter_mut().zip(out.bits()) {
                *o += b as usize;
            }
        }
        for o in ones {
            assert!((o as f64 / n as f64 - 0.5).abs() <= 0.02);
        }
    }

    #[test]
    fn transmit_is_deterministic_and_hard() {
        let cam = camera(EffectCoefficients::default());
        let alpha = transmitted_code(128, 3).unwrap();
        let p = params(0.1);
        let a = cam.transmit(&alpha, &p, 42).unwrap();
        let b = cam.transmit(&alpha, &p, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.is_hard());
        assert_eq!(a.len(), 128);
    }

    #[test]
    fn transmit_rejects_bad_codes() {
        let cam = camera(EffectCoefficients::default());
        let short = transmitted_code(64, 3).unwrap();
        assert!(cam.transmit(&short, &params(0.5), 0).is_err());
        let soft = BinaryCode::new(vec![0.5; 128]).unwrap();
        assert!(cam.transmit(&soft, &params(0.5), 0).is_err());
    }

    #[test]
    fn flip_probability_never_zero() {
        let cam = camera(EffectCoefficients::default());
        let (a, b) = cam.flip_probabilities(&cam.optimum());
        assert!(a > 0.0 && b > 0.0);
    }

    #[test]
    fn dataset_cardinality_and_determinism() {
        let cam = camera(EffectCoefficients::default());
        let alpha = transmitted_code(128, 4).unwrap();
        let sets = random_param_sets(200, 8);
        let ds = cam.generate_dataset(&alpha, &sets, 64).unwrap();
        assert_eq!(ds.groups.len(), 200);
        assert_eq!(ds.total_codes(), 12_800);
        let again = cam.generate_dataset(&alpha, &sets, 64).unwrap();
        assert_eq!(ds, again);
        let single = cam.generate_dataset(&alpha, &sets[..3], 1).unwrap();
        assert!(single.groups.iter().all(|g| g.codes.n_rows() == 1));
        assert!(cam.generate_dataset(&alpha, &sets, 0).is_err());
    }

    #[test]
    fn optimum_beats_corner() {
        let cam = camera(EffectCoefficients::default());
        let alpha = transmitted_code(128, 6).unwrap();
        let best = cam.eval(&alpha, &cam.optimum(), 2000, 1).unwrap();
        let corner = cam.eval(&alpha, &params(0.0), 2000, 1).unwrap();
        assert!(best.inliers_rate > corner.inliers_rate);
        assert!(cam.eval(&alpha, &params(0.0), 1, 1).is_err());
    }

    #[test]
    fn more_outliers_never_help() {
        let alpha = transmitted_code(128, 7).unwrap();
        let p = CameraParams::new([0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.2]).unwrap();
        let low = camera(EffectCoefficients::default()).eval(&alpha, &p, 5000, 9).unwrap();
        let high = camera(EffectCoefficients {
            outlier: 8.0,
            ..EffectCoefficients::default()
        })
        .eval(&alpha, &p, 5000, 9)
        .unwrap();
        // one-sided 3σ on the difference of two binomial proportions
        let (a, b) = (low.inliers_rate / 100.0, high.inliers_rate / 100.0);
        let sigma = ((a * (1.0 - a) + b * (1.0 - b)) / 5000.0).sqrt();
        assert!(b <= a + 3.0 * sigma, "R rose from {a} to {b}");
    }

    #[test]
    fn runs_wrap_around() {
        let code = [true, false, false, true, true];
        assert_eq!(runs_of_ones(&code), vec![(3, 3)]);
        assert!(runs_of_ones(&[true; 4]).is_empty());
        assert!(runs_of_ones(&[false; 4]).is_empty());
    }

    #[test]
    fn fractional_shift_rounds() {
        let a = [true, false, false, false];
        assert_eq!(fractional_shift(&a, 1.2), vec![false, true, false, false]);
        assert_eq!(fractional_shift(&a, 1.7), vec![false, false, true, false]);
        assert_eq!(fractional_shift(&a, -1.0), vec![false, false, false, true]);
    }

    #[test]
    fn config_validation() {
        let k = CameraConstants::default();
        let bad = OracleConfig {
            distance_mm: -1.0,
            ..OracleConfig::default()
        };
        assert!(OracleCamera::new(bad, k.clone()).is_err());
        let mut bad = OracleConfig::default();
        bad.optimum[3] = 0.9;
        assert!(OracleCamera::new(bad, k.clone()).is_err());
        let mut bad = OracleConfig::default();
        bad.effects.jitter = -1.0;
        assert!(OracleCamera::new(bad, k).is_err());
    }
}
