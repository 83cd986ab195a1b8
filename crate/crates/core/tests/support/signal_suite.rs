//! Signal invariants as plain checks over concrete inputs. The proptest
//! target feeds them generated cases; the acceptance run feeds them seeded
//! draws for each code length.

use lidar_core::signal::{
    circular_correlate, depth_from_time, hard_argmax, per_bit_moments, soft_argmax, BinaryCode, CameraConstants,
    CodeBatch,
};
use lidar_core::seed;
use rand::Rng;

pub const LENGTHS: [usize; 4] = [8, 16, 32, 128];

pub type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `corr(a, shift(b, s))[k] = corr(a, b)[((k − 1 − s) mod L) + 1]`, bit for
/// bit. Centred {0,1} codes of power-of-two length are dyadic, so every
/// partial sum is exact and no tolerance is needed.
pub fn shift_covariance(a: &[bool], b: &[bool], s: usize) -> Check {
    let len = a.len();
    let a = BinaryCode::<f64>::from_bools(a).map_err(|e| e.to_string())?;
    let b = BinaryCode::<f64>::from_bools(b).map_err(|e| e.to_string())?;
    let base = circular_correlate(a.bits(), b.bits()).map_err(|e| e.to_string())?;
    let moved = circular_correlate(a.bits(), b.shifted_right(s as isize).bits()).map_err(|e| e.to_string())?;
    for k in 1..=len {
        let j = (k + len - 1 - s % len) % len;
        ensure(moved[k - 1] == base[j], || {
            format!("L={len} s={s} k={k}: {} != {}", moved[k - 1], base[j])
        })?;
    }
    Ok(())
}

/// Brute-force correlation agrees with the library's.
pub fn correlation_brute_force(a: &[bool], b: &[bool]) -> Check {
    let len = a.len();
    let f = |x: &[bool]| -> Vec<f64> {
        let m = x.iter().filter(|&&v| v).count() as f64 / len as f64;
        x.iter().map(|&v| v as u8 as f64 - m).collect()
    };
    let (ac, bc) = (f(a), f(b));
    let fast = circular_correlate(
        BinaryCode::<f64>::from_bools(a).unwrap().bits(),
        BinaryCode::<f64>::from_bools(b).unwrap().bits(),
    )
    .map_err(|e| e.to_string())?;
    for k in 1..=len {
        let brute: f64 = (0..len).map(|i| ac[i] * bc[(i + k - 1) % len]).sum();
        ensure(fast[k - 1] == brute, || format!("L={len} k={k}: {} != {brute}", fast[k - 1]))?;
    }
    Ok(())
}

/// Soft-argmax ignores an additive constant. On a correlation profile with
/// an integer shift the arithmetic is exact; on arbitrary reals the two
/// evaluations may differ by rounding only.
pub fn soft_argmax_shift(rho: &[f64], c: f64, exact: bool) -> Check {
    let moved: Vec<f64> = rho.iter().map(|r| r + c).collect();
    let (x, y) = (soft_argmax(rho), soft_argmax(&moved));
    if exact {
        ensure(x == y, || format!("soft_argmax moved from {x} to {y} under +{c}"))
    } else {
        ensure((x - y).abs() <= 1e-12 * rho.len() as f64, || {
            format!("soft_argmax moved from {x} to {y} under +{c}")
        })
    }
}

/// Soft-argmax lies inside `[1, L]`.
pub fn soft_argmax_range(rho: &[f64]) -> Check {
    let t = soft_argmax(rho);
    ensure((1.0..=rho.len() as f64).contains(&t), || format!("soft_argmax {t} outside [1, {}]", rho.len()))
}

/// Hard argmax is unchanged by strictly increasing maps.
pub fn hard_argmax_monotone(rho: &[f64]) -> Check {
    let t = hard_argmax(rho);
    let maps: [fn(f64) -> f64; 3] = [|x| 3.0 * x + 7.0, |x| x * x * x, f64::atan];
    for (i, m) in maps.iter().enumerate() {
        let mapped: Vec<f64> = rho.iter().map(|&x| m(x)).collect();
        let u = hard_argmax(&mapped);
        ensure(u == t, || format!("map {i} moved the hard peak from {t} to {u}"))?;
    }
    Ok(())
}

/// `depth(t1) − depth(t2) = c/(2f)·(t1 − t2)`, to rounding.
pub fn depth_affine(t1: f64, t2: f64, consts: &CameraConstants) -> Check {
    let lhs = depth_from_time(t1, consts) - depth_from_time(t2, consts);
    let rhs = consts.light_speed_mm_s / (2.0 * consts.sampling_rate_hz) * (t1 - t2);
    // rounding is relative to the largest intermediate, t·c/f
    let scale = t1.abs().max(t2.abs()) * consts.light_speed_mm_s / consts.sampling_rate_hz + consts.system_delay_mm;
    ensure((lhs - rhs).abs() <= 8.0 * f64::EPSILON * scale, || format!("depth difference {lhs} vs {rhs}"))
}

/// Per-bit mean in [0, 1], variance in [0, 0.25].
pub fn moments_bounded(rows: usize, len: usize, data: Vec<f64>) -> Check {
    let batch = CodeBatch::new(rows, len, data).map_err(|e| e.to_string())?;
    let (m, v) = per_bit_moments(&batch).map_err(|e| e.to_string())?;
    ensure(m.iter().all(|x| (0.0..=1.0).contains(x)), || "mean outside [0, 1]".into())?;
    ensure(v.iter().all(|x| (0.0..=0.25 + 1e-15).contains(x)), || "variance outside [0, 0.25]".into())
}

pub fn random_bits(rng: &mut seed::Rng, len: usize) -> Vec<bool> {
    (0..len).map(|_| rng.random()).collect()
}

/// Every invariant on `cases` seeded draws at code length `len`.
pub fn run_all(len: usize, cases: u64) -> Check {
    let consts = CameraConstants {
        code_length: len,
        ..CameraConstants::default()
    };
    for i in 0..cases {
        let mut rng = seed::rng_at(0x516, &[len as u64, i]);
        let a = random_bits(&mut rng, len);
        let b = random_bits(&mut rng, len);
        let s = rng.random_range(0..2 * len);
        shift_covariance(&a, &b, s)?;
        correlation_brute_force(&a, &b)?;
        let rho = circular_correlate(
            BinaryCode::<f64>::from_bools(&a).unwrap().bits(),
            BinaryCode::<f64>::from_bools(&b).unwrap().bits(),
        )
        .unwrap();
        soft_argmax_shift(&rho, rng.random_range(-64i32..64) as f64, true)?;
        let reals: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        soft_argmax_shift(&reals, rng.random_range(-50.0..50.0), false)?;
        soft_argmax_range(&reals)?;
        hard_argmax_monotone(&rho)?;
        hard_argmax_monotone(&reals)?;
        depth_affine(
            rng.random_range(1.0..=len as f64),
            rng.random_range(1.0..=len as f64),
            &consts,
        )?;
        let rows = rng.random_range(1..20);
        moments_bounded(rows, len, (0..rows * len).map(|_| rng.random::<f64>()).collect())?;
    }
    Ok(())
}
