//! The five sufficient statistics of a variance path and the genericity
//! classification of the discretized likelihood.
//!
//! For observations `V_0 .. V_N` at interval `T`:
//!
//! ```text
//! a = (1/N) sum (V_{n+1}-V_n)^2 / V_n      b = -(2/N) sum (V_{n+1}-V_n) / V_n
//! c = (2/N) (V_N - V_0)                    d = (2/N) sum 1/V_n
//! f = (2/N) sum V_n
//! ```
//!
//! The sums run over `n = 0 .. N-1` and fully determine the discretized
//! log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::VolSeries;

/// Below this value of `d*f - 4` the closed-form minimizer divides by
/// noise; such stats are classified Boundary.
pub const DEGENERATE_DISCRIMINANT_TOL: f64 = 1e-12;

/// Sufficient statistics `(a, b, c, d, f)` of a variance path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    /// Number of observations used.
    pub n: usize,
    /// Sub-sampling interval.
    #[serde(rename = "T")]
    pub t: f64,
}

/// Genericity classification of a stats vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason")]
pub enum GenericityVerdict {
    Generic,
    Boundary(String),
}

impl GenericityVerdict {
    pub fn is_generic(&self) -> bool {
        matches!(self, GenericityVerdict::Generic)
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Evaluate the five sufficient statistics of a variance series.
pub fn sufficient_stats(series: &VolSeries) -> SufficientStats {
    let v = series.values();
    let n = series.grid.n;
    let inv_n = 1.0 / n as f64;

    let mut sa = CompensatedSum::default();
    let mut sb = CompensatedSum::default();
    let mut sd = CompensatedSum::default();
    let mut sf = CompensatedSum::default();
    for k in 0..n {
        let dv = v[k + 1] - v[k];
        sa.add(dv * dv / v[k]);
        sb.add(dv / v[k]);
        sd.add(1.0 / v[k]);
        sf.add(v[k]);
    }

    SufficientStats {
        a: inv_n * sa.value(),
        b: -2.0 * inv_n * sb.value(),
        // endpoints only, not a telescoped sum
        c: 2.0 * inv_n * (v[n] - v[0]),
        d: 2.0 * inv_n * sd.value(),
        f: 2.0 * inv_n * sf.value(),
        n,
        t: series.grid.t,
    }
}

impl SufficientStats {
    pub fn discriminant(&self) -> f64 {
        self.d * self.f - 4.0
    }
}

/// Classify a stats vector: Generic iff the unconstrained stationary point
/// of the discretized likelihood lies inside the cone S, i.e.
/// `2b + cd < 0` and `0 < 2a(df-4) - b^2 f - 4bc - c^2 d < -4(bf + 2c)`.
pub fn check_genericity(s: &SufficientStats) -> GenericityVerdict {
    let disc = s.discriminant();
    if disc <= DEGENERATE_DISCRIMINANT_TOL {
        return GenericityVerdict::Boundary("degenerate discriminant".to_string());
    }
    let first = 2.0 * s.b + s.c * s.d;
    if first >= 0.0 {
        return GenericityVerdict::Boundary(format!("2b+cd = {first} >= 0"));
    }
    let mid = 2.0 * s.a * disc - s.b * s.b * s.f - 4.0 * s.b * s.c - s.c * s.c * s.d;
    if mid <= 0.0 {
        return GenericityVerdict::Boundary(format!(
            "2a(df-4) - b^2 f - 4bc - c^2 d = {mid} <= 0"
        ));
    }
    let rhs = -4.0 * (s.b * s.f + 2.0 * s.c);
    if mid >= rhs {
        return GenericityVerdict::Boundary(format!(
            "2a(df-4) - b^2 f - 4bc - c^2 d = {mid} >= -4(bf+2c) = {rhs}"
        ));
    }
    GenericityVerdict::Generic
}

/// Batch evaluation; deterministic per series.
pub fn sufficient_stats_batch(series: &[VolSeries]) -> Vec<SufficientStats> {
    use rayon::prelude::*;
    series.par_iter().map(sufficient_stats).collect()
}

/// Validate a raw value vector before building a series; reports the index
/// of the first non-positive entry.
pub fn validate_positive(values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::SeriesTooShort {
            need: 3,
            got: values.len(),
        });
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveVariance { index: i, value: v });
        }
    }
    Ok(())
}
