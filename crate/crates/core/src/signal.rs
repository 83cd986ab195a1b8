//! Correlation-based depth estimation: circular correlation, peak finding,
//! depth conversion and the inlier statistics used to judge stability.
//!
//! Peak indices are 1-based throughout (`t ∈ [1, L]`), so a peak at lag `s`
//! (zero-based circular shift) is reported as `t = s + 1`. The resulting
//! one-sample offset is absorbed by the calibrated system delay.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Physical constants of the camera's ranging model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConstants {
    /// Receiver sampling rate `f`, Hz.
    pub sampling_rate_hz: f64,
    /// Speed of light `c`, mm/s.
    pub light_speed_mm_s: f64,
    /// System delay `d`, mm of round-trip distance.
    pub system_delay_mm: f64,
    /// Code length `L`, samples.
    pub code_length: usize,
    /// Inlier radius `δ_in`, mm.
    pub inlier_radius_mm: f64,
}

impl Default for CameraConstants {
    fn default() -> Self {
        Self {
            sampling_rate_hz: 1e9,
            light_speed_mm_s: 2.997_924_58e11,
            system_delay_mm: 600.0,
            code_length: 128,
            inlier_radius_mm: 30.0,
        }
    }
}

impl CameraConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return invalid("sampling rate must be positive");
        }
        if !(self.light_speed_mm_s.is_finite() && self.light_speed_mm_s > 0.0) {
            return invalid("speed of light must be positive");
        }
        if !self.system_delay_mm.is_finite() {
            return invalid("system delay must be finite");
        }
        if self.code_length < 2 {
            return invalid("code length must be at least 2");
        }
        if !(self.inlier_radius_mm.is_finite() && self.inlier_radius_mm > 0.0) {
            return invalid("inlier radius must be positive");
        }
        if self.delta_max() <= 0.0 {
            return invalid("maximal depth ½(L/f·c − d) must be positive");
        }
        Ok(())
    }

    /// Largest resolvable depth, `½(L/f·c − d)`; depth wraps beyond it.
    pub fn delta_max(&self) -> f64 {
        0.5 * (self.code_length as f64 / self.sampling_rate_hz * self.light_speed_mm_s - self.system_delay_mm)
    }

    /// Depth spanned by one sample, `c / (2f)`.
    pub fn mm_per_sample(&self) -> f64 {
        0.5 * self.light_speed_mm_s / self.sampling_rate_hz
    }
}

/// A length-`L` pulse code with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryCode<T> {
    bits: Vec<T>,
}

impl<T: Scalar> BinaryCode<T> {
    pub fn new(bits: Vec<T>) -> Result<Self> {
        if bits.is_empty() {
            return invalid("empty code");
        }
        if let Some(v) = bits.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return invalid(format!("code value {v} outside [0, 1]"));
        }
        Ok(Self { bits })
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        Self::new(bits.iter().map(|&b| if b { T::one() } else { T::zero() }).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[T] {
        &self.bits
    }

    /// Every value exactly 0 or 1.
    pub fn is_hard(&self) -> bool {
        self.bits.iter().all(|&v| v == T::zero() || v == T::one())
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.bits.iter().map(|&v| v >= T::lit(0.5)).collect()
    }

    /// Circular shift to the right: `out[i] = self[(i − s) mod L]`.
    pub fn shifted_right(&self, s: isize) -> Self {
        let n = self.bits.len() as isize;
        let bits = (0..n).map(|i| self.bits[(i - s).rem_euclid(n) as usize]).collect();
        Self { bits }
    }

    /// The code with its mean removed.
    pub fn centered(&self) -> Vec<T> {
        centered(&self.bits)
    }
}

/// `n × L` codes sharing one set of camera parameters, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeBatch<T> {
    rows: usize,
    len: usize,
    data: Vec<T>,
}

impl<T: Scalar> CodeBatch<T> {
    pub fn new(rows: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if rows * len != data.len() {
            return invalid(format!("batch of {rows}×{len} given {} values", data.len()));
        }
        if data.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return invalid("batch values must lie in [0, 1]");
        }
        Ok(Self { rows, len, data })
    }

    pub fn from_codes(codes: &[BinaryCode<T>]) -> Result<Self> {
        let len = codes.first().map_or(0, |c| c.len());
        if codes.iter().any(|c| c.len() != len) {
            return invalid("codes in a batch must share one length");
        }
        let data = codes.iter().flat_map(|c| c.bits().iter().copied()).collect();
        Ok(Self {
            rows: codes.len(),
            len,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn code_len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.len..(i + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.len.max(1)).take(self.rows)
    }
}

fn centered<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = x.iter().copied().sum::<T>() / T::lit(x.len() as f64);
    x.iter().map(|&v| v - m).collect()
}

/// Mean-centred circular correlation profile, `ρ[k]` for `k = 1..L` stored
/// at index `k − 1`:
/// `ρ[k] = Σ_i ã[i]·b̃[(i + k − 1) mod L]`.
pub fn circular_correlate<T: Scalar>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return invalid(format!("correlating codes of length {} and {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("correlating empty codes");
    }
    let (ac, bc) = (centered(a), centered(b));
    Ok((0..a.len())
        .map(|k| crate::engine::kernels::dot_circ(&ac, &bc, k as isize))
        .collect())
}

/// Differentiable peak location `Σ_k softmax(ρ)[k]·k`, `k = 1..L`.
pub fn soft_argmax<T: Scalar>(rho: &[T]) -> T {
    let m = rho.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut z = T::zero();
    let mut acc = T::zero();
    for (i, &r) in rho.iter().enumerate() {
        let e = (r - m).exp();
        z += e;
        acc += e * T::lit((i + 1) as f64);
    }
    acc / z
}

/// Smallest 1-based index of the maximum of `ρ`.
pub fn hard_argmax<T: Scalar>(rho: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in rho.iter().enumerate() {
        if v > rho[best] {
            best = i;
        }
    }
    best + 1
}

/// Depth `½(t/f·c − d)` for a 1-based peak index `t`. Negative for peaks
/// before the delay point.
pub fn depth_from_time<T: Scalar>(t: T, consts: &CameraConstants) -> T {
    let c_over_f = T::lit(consts.light_speed_mm_s / consts.sampling_rate_hz);
    T::lit(0.5) * (t * c_over_f - T::lit(consts.system_delay_mm))
}

/// Wrap-around depth distance `min(|d1 − d2|, Δmax − |d1 − d2|)`.
pub fn circular_depth_distance<T: Scalar>(d1: T, d2: T, delta_max: T) -> Result<T> {
    if !(delta_max > T::zero()) {
        return invalid("maximal depth must be positive");
    }
    let u = (d1 - d2).abs();
    if !(u <= delta_max) {
        return invalid(format!(
            "depth difference {u} exceeds the camera range {delta_max}"
        ));
    }
    Ok(u.min(delta_max - u))
}

/// Order-statistic median; even counts average the two middle values.
pub fn median<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    })
}

/// How depth samples are compared against their median.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InlierDistance {
    /// Plain absolute difference.
    Plain,
    /// Wrap-around distance with the given maximal depth.
    Circular { delta_max: f64 },
}

/// Percentage of samples within `delta_in` of the sample median.
pub fn inliers_rate<T: Scalar>(deltas: &[T], delta_in: T) -> Result<T> {
    inliers_rate_with(deltas, delta_in, InlierDistance::Plain)
}

pub fn inliers_rate_with<T: Scalar>(deltas: &[T], delta_in: T, distance: InlierDistance) -> Result<T> {
    let Some(med) = median(deltas) else {
        return invalid("inliers rate of an empty sample");
    };
    let mut inliers = 0usize;
    for &d in deltas {
        let dist = match distance {
            InlierDistance::Plain => (d - med).abs(),
            InlierDistance::Circular { delta_max } => circular_depth_distance(d, med, T::lit(delta_max))?,
        };
        if dist <= delta_in {
            inliers += 1;
        }
    }
    Ok(T::lit(100.0 * inliers as f64 / deltas.len() as f64))
}

/// Per-bit sample mean and population variance along the batch axis.
pub fn per_bit_moments<T: Scalar>(batch: &CodeBatch<T>) -> Result<(Vec<T>, Vec<T>)> {
    if batch.is_empty() {
        return invalid("moments of an empty batch");
    }
    let n = T::lit(batch.n_rows() as f64);
    let len = batch.code_len();
    let mut mean = vec![T::zero(); len];
    for row in batch.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut var = vec![T::zero(); len];
    for row in batch.rows() {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut var {
        *s = *s / n;
    }
    Ok((mean, var))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakMode {
    Soft,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthEstimate<T> {
    /// 1-based peak position, possibly fractional.
    pub t_argmax: T,
    /// Depth in mm.
    pub delta: T,
}

/// Correlates every row against the transmitted code and converts the peak
/// to depth.
pub fn estimate_depth_batch<T: Scalar>(
    transmitted: &BinaryCode<T>,
    batch: &CodeBatch<T>,
    consts: &CameraConstants,
    mode: PeakMode,
) -> Result<Vec<DepthEstimate<T>>> {
    if batch.is_empty() {
        return invalid("depth estimation on an empty batch");
    }
    if batch.code_len() != transmitted.len() {
        return invalid(format!(
            "batch rows of length {} against a code of length {}",
            batch.code_len(),
            transmitted.len()
        ));
    }
    batch
        .rows()
        .map(|row| {
            let rho = circular_correlate(transmitted.bits(), row)?;
            let t = match mode {
                PeakMode::Soft => soft_argmax(&rho),
                PeakMode::Hard => T::lit(hard_argmax(&rho) as f64),
            };
            Ok(DepthEstimate {
                t_argmax: t,
                delta: depth_from_time(t, consts),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code_from_seed(len: usize, seed: u64) -> BinaryCode<f64> {
        let mut s = seed | 1;
        let bits: Vec<bool> = (0..len)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                s & 1 == 1
            })
            .collect();
        BinaryCode::from_bools(&bits).unwrap()
    }

    /// Brute-force reference: uncentred arithmetic over every lag after
    /// explicit centring, no shared kernel.
    fn brute_corr(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        (1..=n)
            .map(|k| (0..n).map(|i| (a[i] - ma) * (b[(i + k - 1) % n] - mb)).sum())
            .collect()
    }

    #[test]
    fn autocorrelation_peaks_at_one() {
        let a = code_from_seed(64, 3);
        let rho = circular_correlate(a.bits(), a.bits()).unwrap();
        assert_eq!(hard_argmax(&rho), 1);
    }

    #[test]
    fn right_shift_by_five_peaks_at_six() {
        let a = code_from_seed(64, 11);
        let b = a.shifted_right(5);
        let rho = circular_correlate(a.bits(), b.bits()).unwrap();
        let brute = brute_corr(a.bits(), b.bits());
        for (x, y) in rho.iter().zip(&brute) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(hard_argmax(&brute), 6);
        assert_eq!(hard_argmax(&rho), 6);
    }

    #[test]
    fn constant_code_correlates_to_zero() {
        let ones = BinaryCode::<f64>::new(vec![1.0; 32]).unwrap();
        let b = code_from_seed(32, 5);
        let rho = circular_correlate(ones.bits(), b.bits()).unwrap();
        assert!(rho.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correlate_rejects_length_mismatch() {
        assert!(matches!(
            circular_correlate(&[0.0, 1.0], &[0.0, 1.0, 1.0]),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn soft_argmax_examples() {
        assert_eq!(soft_argmax(&vec![0.3f64; 128]), 64.5);
        let mut rho = vec![0.0f64; 128];
        rho[9] = 50.0;
        // direct evaluation: (10·e^50 + Σ_{k≠10} k) / (e^50 + 127)
        let e = 50f64.exp();
        let expect = (10.0 * e + (128.0 * 129.0 / 2.0 - 10.0)) / (e + 127.0);
        let t = soft_argmax(&rho);
        assert!((t - expect).abs() < 1e-12);
        assert!((t - 10.0).abs() < 1e-6);
        let mut two = vec![0.0f64; 128];
        two[4] = 7.0;
        two[128 - 5] = 7.0;
        assert!((soft_argmax(&two) - 64.5).abs() < 1e-9);
    }

    #[test]
    fn hard_argmax_tie_break() {
        assert_eq!(hard_argmax(&[0.0, 1.0, 5.0, 2.0]), 3);
        assert_eq!(hard_argmax(&[0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 3.0]), 4);
        assert_eq!(hard_argmax(&[2.0; 7]), 1);
    }

    #[test]
    fn depth_examples() {
        let k = CameraConstants::default();
        let t0 = k.system_delay_mm * k.sampling_rate_hz / k.light_speed_mm_s;
        assert!(depth_from_time(t0, &k).abs() < 1e-9);
        let d6 = depth_from_time(6.0_f64, &k);
        assert!((d6 - 0.5 * (6.0 * 299.792458 - 600.0)).abs() < 1e-9);
        assert!((d6 - 599.377374).abs() < 1e-6);
        let d128 = depth_from_time(128.0_f64, &k);
        assert!((d128 - 18886.717312).abs() < 1e-6);
        assert!((d128 - k.delta_max()).abs() < 1e-9);
    }

    #[test]
    fn circular_distance_examples() {
        assert_eq!(circular_depth_distance(5.0, 5.0, 100.0).unwrap(), 0.0);
        assert_eq!(circular_depth_distance(0.0, 50.0, 100.0).unwrap(), 50.0);
        assert_eq!(circular_depth_distance(1000.0, 100.0, 1000.0).unwrap(), 100.0);
        assert!(circular_depth_distance(0.0, 1500.0, 1000.0).is_err());
    }

    #[test]
    fn inliers_examples() {
        assert_eq!(inliers_rate(&[7.0; 9], 30.0).unwrap(), 100.0);
        assert_eq!(inliers_rate(&[1000.0, 1000.0, 1005.0, 1500.0], 30.0).unwrap(), 75.0);
        assert!(inliers_rate::<f64>(&[], 30.0).is_err());
        let circ = InlierDistance::Circular { delta_max: 1000.0 };
        // plain: median 500, neither within 30; circular: 950 and 50 are 100 apart
        assert_eq!(inliers_rate_with(&[10.0, 990.0], 60.0, circ).unwrap(), 0.0);
        assert_eq!(inliers_rate_with(&[490.0, 510.0, 980.0], 30.0, circ).unwrap(), 66.66666666666667);
    }

    #[test]
    fn moments_examples() {
        let b = CodeBatch::new(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let (m, v) = per_bit_moments(&b).unwrap();
        assert_eq!(m, vec![0.5, 1.0]);
        assert_eq!(v, vec![0.25, 0.0]);
        let one = CodeBatch::new(1, 3, vec![0.0, 1.0, 0.5]).unwrap();
        let (m, v) = per_bit_moments(&one).unwrap();
        assert_eq!(m, vec![0.0, 1.0, 0.5]);
        assert_eq!(v, vec![0.0; 3]);
        assert!(per_bit_moments(&CodeBatch::<f64>::new(0, 3, vec![]).unwrap()).is_err());
    }

    #[test]
    fn depth_batch_of_shifted_copies() {
        let k = CameraConstants::default();
        let a = code_from_seed(128, 77);
        let shift = 9;
        let rows: Vec<_> = (0..4).map(|_| a.shifted_right(shift)).collect();
        let batch = CodeBatch::from_codes(&rows).unwrap();
        let est = estimate_depth_batch(&a, &batch, &k, PeakMode::Hard).unwrap();
        let brute = hard_argmax(&brute_corr(a.bits(), rows[0].bits()));
        assert_eq!(brute, shift as usize + 1);
        for e in est {
            assert_eq!(e.t_argmax, (shift + 1) as f64);
            assert_eq!(e.delta, depth_from_time((shift + 1) as f64, &k));
        }
        assert!(estimate_depth_batch(&a, &CodeBatch::new(0, 128, vec![]).unwrap(), &k, PeakMode::Hard).is_err());
    }

    #[test]
    fn soft_and_hard_agree_with_dominant_peak() {
        // The centred autocorrelation peak of a balanced 128-bit code is
        // Σ ã² ≈ 32; the margin over the best sidelobe must exceed 20·ln L.
        let k = CameraConstants::default();
        let a = code_from_seed(128, 1234);
        let row = a.shifted_right(17);
        let rho = circular_correlate(a.bits(), row.bits()).unwrap();
        let peak = hard_argmax(&rho);
        let mut sorted = rho.clone();
        sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let margin = sorted[0] - sorted[1];
        let batch = CodeBatch::from_codes(&[row]).unwrap();
        let soft = estimate_depth_batch(&a, &batch, &k, PeakMode::Soft).unwrap()[0];
        let hard = estimate_depth_batch(&a, &batch, &k, PeakMode::Hard).unwrap()[0];
        assert_eq!(hard.t_argmax, peak as f64);
        if margin > 20.0 * (128f64).ln() {
            assert!((soft.t_argmax - hard.t_argmax).abs() < 0.5);
        } else {
            // margin is a property of the code; a weaker peak still has to
            // land near the hard estimate
            assert!((soft.t_argmax - hard.t_argmax).abs() < 1.0, "margin {margin}");
        }
    }

    proptest! {
        #[test]
        fn soft_argmax_shift_invariant(rho in proptest::collection::vec(-10.0f64..10.0, 2..64), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = rho.iter().map(|v| v + c).collect();
            prop_assert!((soft_argmax(&rho) - soft_argmax(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn hard_argmax_monotone_invariant(rho in proptest::collection::vec(-10.0f64..10.0, 1..64)) {
            let t: Vec<f64> = rho.iter().map(|v| (v * 0.5).exp() + 3.0).collect();
            prop_assert_eq!(hard_argmax(&rho), hard_argmax(&t));
        }

        #[test]
        fn inliers_permutation_invariant(mut xs in proptest::collection::vec(0.0f64..500.0, 1..40), seed in any::<u64>()) {
            let r1 = inliers_rate(&xs, 30.0).unwrap();
            let n = xs.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                xs.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(r1, inliers_rate(&xs, 30.0).unwrap());
        }

        #[test]
        fn moments_bounded(bits in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let len = 5;
            let rows = bits.len() / len;
            prop_assume!(rows > 0);
            let b = CodeBatch::new(rows, len, bits[..rows * len].to_vec()).unwrap();
            let (m, v) = per_bit_moments(&b).unwrap();
            prop_assert!(m.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(v.iter().all(|&x| (0.0..=0.25 + 1e-15).contains(&x)));
        }
    }
}
