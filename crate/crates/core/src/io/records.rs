//! Text artifacts: optimized parameter records, optimization traces, loss
//! logs and evaluation reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{OptResult, TraceRow};
use crate::oracle::{CameraParams, OracleEval, N_PARAMS};

/// Result of a parameter search, stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    pub params: [f64; N_PARAMS],
    pub converged: bool,
    /// Inliers rate on the generated batch at the returned parameters.
    pub inliers_rate: f64,
    pub iterations: usize,
}

impl ParamsRecord {
    pub fn from_result(r: &OptResult) -> Self {
        Self {
            params: *r.params.values(),
            converged: r.converged,
            inliers_rate: r.inliers_rate,
            iterations: r.trace.len(),
        }
    }

    pub fn camera_params(&self) -> Result<CameraParams> {
        CameraParams::new(self.params)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("record serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let r: Self = toml::from_str(text).map_err(|e| Error::Format(format!("params record: {}", e.message())))?;
        Ok(r)
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TraceRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Counts of `values` in `bins` equal bins over `[lo, hi]`; values outside
/// the range are clamped into the first or last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = ((v - lo) / width).floor();
        let i = if i.is_nan() { 0 } else { (i.max(0.0) as usize).min(bins - 1) };
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, c))
        .collect()
}

pub const HISTOGRAM_BINS: usize = 200;

/// Summary of an evaluation at two parameter sets.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub true_distance_mm: f64,
    pub delta_max_mm: f64,
    pub before: (CameraParams, OracleEval),
    pub after: (CameraParams, OracleEval),
}

impl EvalReport {
    /// One summary block with a row per parameter set, then one histogram
    /// block per set. Blocks start with a `# ` title line and are separated
    /// by a blank line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# summary\nlabel,R,median_mm,std_mm,n,p0,p1,p2,p3,p4,p5,p6,p7\n");
        for (label, (p, e)) in [("before", &self.before), ("after", &self.after)] {
            s.push_str(&format!(
                "{label},{},{},{},{}",
                e.inliers_rate,
                e.median_mm,
                e.std_mm,
                e.deltas.len()
            ));
            for v in p.values() {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s.push_str(&format!("# true_distance_mm,{}\n", self.true_distance_mm));
        for (label, (_, e)) in [("before", &self.before), ("after", &self.after)] {
            s.push_str(&format!("\n# histogram {label}\nbin_left_mm,count\n"));
            for (left, c) in histogram(&e.deltas, 0.0, self.delta_max_mm, HISTOGRAM_BINS) {
                s.push_str(&format!("{left},{c}\n"));
            }
        }
        s
    }
}
