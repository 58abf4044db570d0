//! Accuracy harness: empirical distribution of normalized estimator
//! errors over simulated canonical trajectories, relative RMS tables,
//! sqrt(N)-scaling constants, genericity rates, and normality / tail
//! diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    consistent_gamma2, consistent_kappa, mle_volatility_params,
};
use crate::params::{CanonicalParams, SamplingGrid, VolSeries};
use crate::simulate::{subsampled_vol_series, Dismissal, InitialState, PathConfig, Scheme};
use crate::stats::{check_genericity, sufficient_stats};

/// The five tracked estimators.
pub const ESTIMATORS: [&str; 5] = ["kappa_hat", "K", "theta_hat", "gamma2_hat", "G"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub canonical: CanonicalParams,
    /// Canonical sub-sampling time `Tbar = kappa T`.
    pub tbar: f64,
    /// Observation counts, sorted ascending.
    pub n_values: Vec<usize>,
    pub trajectories: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

impl AccuracySpec {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 2 {
            return Err(Error::Spec(format!(
                "need at least 2 trajectories, got {}",
                self.trajectories
            )));
        }
        if self.n_values.is_empty() {
            return Err(Error::Spec("n_values must be non-empty".to_string()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Spec("n_values must be strictly ascending".to_string()));
        }
        if self.n_values[0] < 2 {
            return Err(Error::Spec("every N must be at least 2".to_string()));
        }
        if !(self.tbar.is_finite() && self.tbar > 0.0) {
            return Err(Error::Spec(format!("tbar must be positive, got {}", self.tbar)));
        }
        Ok(())
    }
}

/// Per-(estimator, N) summary of normalized errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub estimator: String,
    pub n: usize,
    /// Relative root mean squared error.
    pub sigma: f64,
    /// Mean relative error.
    pub bias: f64,
    /// 5%, 25%, 50%, 75%, 95% empirical quantiles of the relative error.
    pub quantiles: [f64; 5],
    /// Trajectories contributing to this cell.
    pub samples: usize,
}

/// Per-N trajectory bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerNCounts {
    pub n: usize,
    pub generic: usize,
    pub boundary: usize,
    pub consistent_unavailable: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub spec: AccuracySpec,
    pub cells: Vec<CellStats>,
    pub counts: Vec<PerNCounts>,
    pub dismissed: usize,
    /// Raw normalized errors per (estimator index, N index); kept in memory
    /// for the normality and tail diagnostics, not serialized.
    #[serde(skip)]
    pub errors: Vec<Vec<Vec<f64>>>,
}

impl AccuracyResult {
    pub fn cell(&self, estimator: &str, n: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.estimator == estimator && c.n == n)
    }

    pub fn errors_for(&self, estimator: &str, n: usize) -> Option<&[f64]> {
        let ei = ESTIMATORS.iter().position(|e| *e == estimator)?;
        let ni = self.spec.n_values.iter().position(|&m| m == n)?;
        Some(&self.errors[ei][ni])
    }
}

/// One trajectory's contribution: per-N, either five normalized errors
/// (consistent ones optional) or a boundary marker.
struct TrajectoryOutcome {
    // per N index: None = dismissed path shorter than N (Euler only)
    per_n: Vec<Option<NOutcome>>,
}

enum NOutcome {
    Boundary,
    Generic {
        raw: [f64; 3],
        consistent: Option<[f64; 2]>,
    },
}

fn truth(zeta: f64) -> (f64, f64, f64) {
    (1.0, zeta, 1.0)
}

/// Run the harness: simulate canonical trajectories (`kappa = gamma = 1`,
/// `theta = zeta`), sub-sample each at `Tbar`, and accumulate normalized
/// estimator errors against the canonical truth at every requested N.
///
/// Boundary trajectories are counted and excluded from the RMS cells.
/// Trajectory-level work is parallel; the reduction is order-fixed so the
/// result does not depend on thread count.
pub fn run_accuracy(spec: &AccuracySpec) -> Result<AccuracyResult> {
    spec.validate()?;
    let p = spec.canonical.canonical_vol_params();
    let n_max = *spec.n_values.last().unwrap();
    let grid = SamplingGrid::new(spec.tbar, n_max)?;
    let (kappa_true, theta_true, gamma2_true) = truth(spec.canonical.zeta);

    let outcomes: Vec<Option<TrajectoryOutcome>> = (0..spec.trajectories)
        .into_par_iter()
        .map(|traj| {
            let cfg = PathConfig {
                scheme: spec.scheme,
                horizon: grid.horizon(),
                y0: InitialState::Stationary,
                dismissal: Dismissal::DiscardNegative,
                seed: spec.seed,
                stream_id: traj as u64,
            };
            let series = match subsampled_vol_series(&p, grid, &cfg) {
                Ok(s) => s,
                Err(_) => return None, // dismissed
            };
            let values = series.values();
            let per_n = spec
                .n_values
                .iter()
                .map(|&n| {
                    let prefix = VolSeries::new(
                        SamplingGrid { t: spec.tbar, n },
                        values[..=n].to_vec(),
                    )
                    .expect("prefix of a valid series");
                    let s = sufficient_stats(&prefix);
                    if !check_genericity(&s).is_generic() {
                        return Some(NOutcome::Boundary);
                    }
                    let raw = mle_volatility_params(&s).expect("generic stats");
                    let raw_err = [
                        raw.kappa_hat / kappa_true - 1.0,
                        raw.theta_hat / theta_true - 1.0,
                        raw.gamma2_hat / gamma2_true - 1.0,
                    ];
                    let consistent = consistent_kappa(raw.kappa_hat, spec.tbar)
                        .and_then(|k| {
                            let g = consistent_gamma2(&raw, spec.tbar)?;
                            Ok([k / kappa_true - 1.0, g / gamma2_true - 1.0])
                        })
                        .ok();
                    Some(NOutcome::Generic {
                        raw: raw_err,
                        consistent,
                    })
                })
                .collect();
            Some(TrajectoryOutcome { per_n })
        })
        .collect();

    // sequential, order-fixed reduction
    let n_count = spec.n_values.len();
    let mut errors: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_count]; ESTIMATORS.len()];
    let mut counts: Vec<PerNCounts> = spec
        .n_values
        .iter()
        .map(|&n| PerNCounts {
            n,
            generic: 0,
            boundary: 0,
            consistent_unavailable: 0,
            total: 0,
        })
        .collect();
    let mut dismissed = 0usize;

    for outcome in &outcomes {
        let Some(t) = outcome else {
            dismissed += 1;
            continue;
        };
        for (ni, cell) in t.per_n.iter().enumerate() {
            let Some(cell) = cell else { continue };
            counts[ni].total += 1;
            match cell {
                NOutcome::Boundary => counts[ni].boundary += 1,
                NOutcome::Generic { raw, consistent } => {
                    counts[ni].generic += 1;
                    errors[0][ni].push(raw[0]); // kappa_hat
                    errors[2][ni].push(raw[1]); // theta_hat
                    errors[3][ni].push(raw[2]); // gamma2_hat
                    match consistent {
                        Some(c) => {
                            errors[1][ni].push(c[0]); // K
                            errors[4][ni].push(c[1]); // G
                        }
                        None => counts[ni].consistent_unavailable += 1,
                    }
                }
            }
        }
    }

    if counts.iter().all(|c| c.generic == 0) {
        return Err(Error::Spec(
            "all trajectories dismissed or boundary; no statistics available".to_string(),
        ));
    }

    let mut cells = Vec::new();
    for (ei, name) in ESTIMATORS.iter().enumerate() {
        for (ni, &n) in spec.n_values.iter().enumerate() {
            let errs = &errors[ei][ni];
            if errs.is_empty() {
                continue;
            }
            cells.push(summarize(name, n, errs));
        }
    }

    Ok(AccuracyResult {
        spec: spec.clone(),
        cells,
        counts,
        dismissed,
        errors,
    })
}

fn summarize(name: &str, n: usize, errs: &[f64]) -> CellStats {
    let m = errs.len() as f64;
    let bias = errs.iter().sum::<f64>() / m;
    let sigma = (errs.iter().map(|e| e * e).sum::<f64>() / m).sqrt();
    let mut sorted = errs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let idx = (p * (sorted.len() - 1) as f64).round() as usize;
        sorted[idx]
    };
    CellStats {
        estimator: name.to_string(),
        n,
        sigma,
        bias,
        quantiles: [q(0.05), q(0.25), q(0.5), q(0.75), q(0.95)],
        samples: errs.len(),
    }
}

/// Least-squares fit of `sigma(N) = C / sqrt(N)` over `N >= 1000`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqrtNFit {
    pub estimator: String,
    pub c: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    pub n_used: usize,
}

pub fn sqrtn_constants(result: &AccuracyResult) -> Result<Vec<SqrtNFit>> {
    let big = result.spec.n_values.iter().filter(|&&n| n >= 1000).count();
    if big < 3 {
        return Err(Error::Spec(format!(
            "sqrt(N) fit needs at least 3 observation counts >= 1000, got {big}"
        )));
    }
    let mut fits = Vec::new();
    for name in ESTIMATORS {
        let points: Vec<(f64, f64)> = result
            .cells
            .iter()
            .filter(|cell| cell.estimator == name && cell.n >= 1000)
            .map(|cell| (cell.n as f64, cell.sigma))
            .collect();
        if points.len() < 3 {
            continue;
        }
        // minimize sum (sigma_i - C/sqrt(N_i))^2
        let num: f64 = points.iter().map(|(n, s)| s / n.sqrt()).sum();
        let den: f64 = points.iter().map(|(n, _)| 1.0 / n).sum();
        let c = num / den;
        let residual = (points
            .iter()
            .map(|(n, s)| {
                let r = s - c / n.sqrt();
                r * r
            })
            .sum::<f64>()
            / points.len() as f64)
            .sqrt();
        fits.push(SqrtNFit {
            estimator: name.to_string(),
            c,
            residual,
            n_used: points.len(),
        });
    }
    Ok(fits)
}

/// Skewness / kurtosis (Jarque-Bera) plus Anderson-Darling diagnostics
/// against a normal law with estimated mean and variance, at the 1% level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    /// Size-adjusted Anderson-Darling statistic A*^2.
    pub anderson_darling: f64,
    pub gaussian_compatible: bool,
}

/// chi2(2) upper 1% point for the Jarque-Bera statistic.
const JB_CRIT_1PCT: f64 = 9.210340;
/// Anderson-Darling 1% critical value with estimated mean and variance
/// (D'Agostino-Stephens case 3 modification).
const AD_CRIT_1PCT: f64 = 1.035;

pub fn normality_diagnostic(errors: &[f64]) -> Result<NormalityReport> {
    let n = errors.len();
    if n < 100 {
        return Err(Error::InsufficientSample(format!(
            "normality diagnostic needs at least 100 values, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = errors.iter().sum::<f64>() / nf;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / nf;
    if var == 0.0 {
        return Err(Error::Degenerate("zero-variance sample".to_string()));
    }
    let sd = var.sqrt();
    let m3 = errors.iter().map(|e| (e - mean).powi(3)).sum::<f64>() / nf;
    let m4 = errors.iter().map(|e| (e - mean).powi(4)).sum::<f64>() / nf;
    let skew = m3 / sd.powi(3);
    let kurt = m4 / (var * var) - 3.0;
    let jb = nf / 6.0 * (skew * skew + kurt * kurt / 4.0);

    // Anderson-Darling with estimated parameters
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut z: Vec<f64> = errors.iter().map(|e| (e - mean) / sd).collect();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut a2 = -nf;
    for i in 0..n {
        let phi_lo = normal.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let phi_hi = normal.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        a2 -= (2.0 * i as f64 + 1.0) / nf * (phi_lo.ln() + (1.0 - phi_hi).ln());
    }
    let a2_star = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));

    Ok(NormalityReport {
        n,
        skewness: skew,
        excess_kurtosis: kurt,
        jarque_bera: jb,
        anderson_darling: a2_star,
        gaussian_compatible: jb < JB_CRIT_1PCT && a2_star < AD_CRIT_1PCT,
    })
}

/// Hill-type tail-index estimate on |errors|. Exploratory output only: no
/// pass/fail semantics attach to the reported index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbe {
    pub index: f64,
    pub order_statistics_used: usize,
    pub label: String,
}

pub fn tail_probe(errors: &[f64]) -> Result<TailProbe> {
    if errors.len() < 1000 {
        return Err(Error::InsufficientSample(format!(
            "tail probe needs at least 1000 values, got {}",
            errors.len()
        )));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).filter(|e| *e > 0.0).collect();
    abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = (abs.len() / 10).max(10).min(abs.len() - 1);
    let threshold = abs[k];
    let sum_log: f64 = abs[..k].iter().map(|x| (x / threshold).ln()).sum();
    Ok(TailProbe {
        index: k as f64 / sum_log,
        order_statistics_used: k,
        label: "EXPLORATORY".to_string(),
    })
}

/// Fraction of Generic trajectories per N.
pub fn genericity_rate(result: &AccuracyResult) -> Vec<(usize, f64)> {
    result
        .counts
        .iter()
        .map(|c| {
            let total = c.generic + c.boundary;
            let frac = if total == 0 {
                0.0
            } else {
                c.generic as f64 / total as f64
            };
            (c.n, frac)
        })
        .collect()
}

/// Write the wide report table: rows = estimator, columns = N.
pub fn write_wide_csv<W: std::io::Write>(result: &AccuracyResult, mut out: W) -> std::io::Result<()> {
    write!(out, "estimator")?;
    for n in &result.spec.n_values {
        write!(out, ",{n}")?;
    }
    writeln!(out)?;
    for name in ESTIMATORS {
        write!(out, "sigma({name})")?;
        for &n in &result.spec.n_values {
            match result.cell(name, n) {
                Some(c) => write!(out, ",{:.17e}", c.sigma)?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Plot-ready long format: `estimator,N,sigma,bias,generic_fraction`.
pub fn write_long_csv<W: std::io::Write>(result: &AccuracyResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "estimator,N,sigma,bias,generic_fraction")?;
    let rates = genericity_rate(result);
    for cell in &result.cells {
        let rate = rates
            .iter()
            .find(|(n, _)| *n == cell.n)
            .map(|(_, r)| *r)
            .unwrap_or(0.0);
        writeln!(
            out,
            "{},{},{:.17e},{:.17e},{:.17e}",
            cell.estimator, cell.n, cell.sigma, cell.bias, rate
        )?;
    }
    Ok(())
}
