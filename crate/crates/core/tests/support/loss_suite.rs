//! Optimizer losses against hand-evaluated values, and the inliers rate
//! against a brute-force rank enumeration.

use lidar_core::inverse::{loss_median, loss_variance};
use lidar_core::seed;
use lidar_core::signal::{inliers_rate, CameraConstants, CodeBatch};
use rand::Rng;

pub const TOL: f64 = 1e-12;

pub type Check = std::result::Result<(), String>;

fn close(name: &str, got: f64, want: f64) -> Check {
    if (got - want).abs() <= TOL {
        Ok(())
    } else {
        Err(format!("{name}: got {got}, expected {want}"))
    }
}

pub fn median_examples() -> Check {
    let consts = CameraConstants::default();
    let dmax = consts.delta_max();
    close("equal depths", loss_median(&[1234.5; 7], &consts).unwrap(), 0.0)?;
    close(
        "both ends of the range",
        loss_median(&[0.0, dmax], &consts).unwrap(),
        (1.0 + dmax / 2.0).ln(),
    )?;
    for dist in [1.0, 150.0, 4000.0, dmax / 2.0] {
        let mut d = vec![1000.0; 512];
        d[17] = 1000.0 + dist;
        close(
            &format!("one outlier at {dist} mm"),
            loss_median(&d, &consts).unwrap(),
            (1.0 + dist).ln() / 512.0,
        )?;
    }
    // wrap-around: 100 mm short of the range end is 100 mm from 0
    let mut d = vec![0.0; 9];
    d[0] = dmax - 100.0;
    close("wrapped outlier", loss_median(&d, &consts).unwrap(), 101.0f64.ln() / 9.0)?;
    // three depths, median 20: distances 10, 0, 30
    close(
        "three depths",
        loss_median(&[10.0, 20.0, 50.0], &consts).unwrap(),
        (11.0f64.ln() + 31.0f64.ln()) / 3.0,
    )
}

fn batch(rows: &[Vec<f64>]) -> CodeBatch<f64> {
    CodeBatch::new(rows.len(), rows[0].len(), rows.concat()).unwrap()
}

pub fn variance_examples() -> Check {
    close("identical rows", loss_variance(&batch(&vec![vec![1.0, 0.0, 1.0, 1.0]; 6])).unwrap(), 0.0)?;
    let alternating: Vec<Vec<f64>> = (0..10).map(|i| vec![(i % 2) as f64; 16]).collect();
    close("alternating rows", loss_variance(&batch(&alternating)).unwrap(), 0.25)?;
    let mut prev = f64::INFINITY;
    for n in [2usize, 3, 5, 10, 50] {
        let mut rows = vec![vec![0.0; 8]; n];
        rows[0] = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        // two of eight bits differ in one row: variance (1/n)(1 − 1/n) on each
        let want = 2.0 / 8.0 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64);
        let got = loss_variance(&batch(&rows)).unwrap();
        close(&format!("one distinct row of {n}"), got, want)?;
        if !(got > 0.0 && got < prev) {
            return Err(format!("variance {got} at n = {n} is not positive and decreasing"));
        }
        prev = got;
    }
    Ok(())
}

/// Median from ranks alone: the element with exactly `k` smaller values
/// (counting ties by position).
fn brute_order_statistic(xs: &[f64], k: usize) -> f64 {
    for (i, &x) in xs.iter().enumerate() {
        let below = xs.iter().enumerate().filter(|&(j, &y)| y < x || (y == x && j < i)).count();
        if below == k {
            return x;
        }
    }
    unreachable!("every rank is held by one element")
}

pub fn brute_inliers_rate(xs: &[f64], delta_in: f64) -> f64 {
    let n = xs.len();
    let med = if n % 2 == 1 {
        brute_order_statistic(xs, n / 2)
    } else {
        (brute_order_statistic(xs, n / 2 - 1) + brute_order_statistic(xs, n / 2)) / 2.0
    };
    let inside = xs.iter().filter(|&&x| (x - med).abs() <= delta_in).count();
    100.0 * inside as f64 / n as f64
}

/// `cases` random inputs of up to 9 values on a 10 mm grid, so ties and
/// points exactly on the radius are common.
pub fn inliers_brute_force(cases: u64) -> Check {
    for i in 0..cases {
        let mut rng = seed::rng_at(0x1A5, &[i]);
        let n = rng.random_range(1..=9);
        let xs: Vec<f64> = (0..n).map(|_| 10.0 * rng.random_range(0..20) as f64).collect();
        let delta_in = [0.0, 10.0, 30.0, 45.0][rng.random_range(0..4)];
        let got = inliers_rate(&xs, delta_in).unwrap();
        let want = brute_inliers_rate(&xs, delta_in);
        if got != want {
            return Err(format!("case {i} {xs:?} radius {delta_in}: {got} != {want}"));
        }
    }
    Ok(())
}
