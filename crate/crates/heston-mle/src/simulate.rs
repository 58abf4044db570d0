//! Volatility and joint Heston path generation: Euler discretization,
//! exact noncentral chi-square transition sampling, the stationary law,
//! and the transition-density diagnostic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{HestonParams, JointSeries, SamplingGrid, VolParams, VolSeries};

/// Simulation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// Explicit Euler recursion with the given step size.
    Euler { delta: f64 },
    /// Chained exact noncentral chi-square transitions (no discretization
    /// error; never produces non-positive values).
    ExactTransition,
}

/// Starting state of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Value(f64),
    /// Draw the start from the stationary law.
    Stationary,
}

/// What to do when an Euler step produces a non-positive variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dismissal {
    /// Reject the whole trajectory (the reference protocol).
    DiscardNegative,
    /// Stop and keep the partial path; diagnostics only.
    AbsorbHalt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub scheme: Scheme,
    /// Global time horizon S.
    pub horizon: f64,
    pub y0: InitialState,
    pub dismissal: Dismissal,
    pub seed: u64,
    pub stream_id: u64,
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if let Scheme::Euler { delta } = self.scheme {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::Config(format!("delta must be positive, got {delta}")));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if let InitialState::Value(y) = self.y0 {
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::Config(format!("y0 must be positive, got {y}")));
            }
        }
        Ok(())
    }
}

/// Warn when the Euler step is not small against the sub-sampling time.
pub fn delta_warning(delta: f64, t: f64) -> Option<String> {
    (delta > t / 10.0).then(|| {
        format!("Euler step delta={delta} exceeds T/10={}; discretization bias likely", t / 10.0)
    })
}

/// Each trajectory owns one RNG stream keyed by (seed, stream_id), so
/// results do not depend on thread scheduling.
pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Parameters of the exact transition at horizon `t`: the rescaling
/// `lambda`, the order `r = 2 zeta - 1`, the decay `nu = exp(-t kappa)`,
/// and the chi-square degrees of freedom `4 zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub lambda: f64,
    pub r: f64,
    pub nu: f64,
    pub dof: f64,
}

impl TransitionParams {
    pub fn new(p: &VolParams, t: f64) -> Result<Self> {
        if let Some(v) = crate::params::validate_domain(p.kappa, p.theta, p.gamma2).violation {
            return Err(Error::Domain(v));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("transition horizon must be positive, got {t}")));
        }
        let nu = (-t * p.kappa).exp();
        let zeta = p.zeta();
        Ok(Self {
            lambda: 4.0 * p.kappa / (p.gamma2 * (1.0 - nu)),
            r: 2.0 * zeta - 1.0,
            nu,
            dof: 4.0 * zeta,
        })
    }
}

/// Draw from a noncentral chi-square with `dof > 1` via the decomposition
/// `chi2_nc(k, nc) = chi2(k-1) + N(sqrt(nc), 1)^2`.
fn noncentral_chi_square<R: Rng>(dof: f64, noncentrality: f64, rng: &mut R) -> f64 {
    debug_assert!(dof > 1.0 && noncentrality >= 0.0);
    let central = Gamma::new((dof - 1.0) / 2.0, 2.0).unwrap().sample(rng);
    let g: f64 = StandardNormal.sample(rng);
    let shifted = g + noncentrality.sqrt();
    central + shifted * shifted
}

/// One exact transition of the variance process over horizon `t`.
pub fn exact_transition_sample<R: Rng>(p: &VolParams, y: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::Config(format!("current variance must be positive, got {y}")));
    }
    let tp = TransitionParams::new(p, t)?;
    let z = noncentral_chi_square(tp.dof, tp.lambda * y * tp.nu, rng);
    Ok(z / tp.lambda)
}

/// Draw from the stationary law Gamma(shape `2 zeta`, scale `gamma2/(2 kappa)`),
/// i.e. `(gamma2/(4 kappa)) * chi2(4 zeta)`.
pub fn stationary_sample<R: Rng>(p: &VolParams, rng: &mut R) -> Result<f64> {
    if let Some(v) = crate::params::validate_domain(p.kappa, p.theta, p.gamma2).violation {
        return Err(Error::Domain(v));
    }
    let dist = Gamma::new(2.0 * p.zeta(), p.gamma2 / (2.0 * p.kappa))
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Outcome of raw Euler path generation.
#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    Complete(Vec<f64>),
    Dismissed { step: usize },
    Halted { values: Vec<f64>, step: usize },
}

impl PathOutcome {
    pub fn complete(self) -> Result<Vec<f64>> {
        match self {
            PathOutcome::Complete(v) => Ok(v),
            PathOutcome::Dismissed { step } => Err(Error::Dismissed { step, value: 0.0 }),
            PathOutcome::Halted { step, .. } => Err(Error::Dismissed { step, value: 0.0 }),
        }
    }
}

/// Euler recursion
/// `y_{k+1} = y_k + delta kappa (theta - y_k) + gamma sqrt(y_k) sqrt(delta) G_k`
/// with a caller-supplied Gaussian driver (the test hook for zero-noise runs).
pub fn euler_vol_path_with(
    p: &VolParams,
    cfg: &PathConfig,
    y0: f64,
    mut gaussian: impl FnMut() -> f64,
) -> Result<PathOutcome> {
    cfg.validate()?;
    let delta = match cfg.scheme {
        Scheme::Euler { delta } => delta,
        Scheme::ExactTransition => {
            return Err(Error::Config("euler path requires the Euler scheme".to_string()))
        }
    };
    let steps = (cfg.horizon / delta).round() as usize;
    let sqrt_delta = delta.sqrt();
    let gamma = p.gamma2.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(y0);
    let mut y = y0;
    for k in 0..steps {
        // dismissal happens before the square root; the recursion is only
        // defined while y stays positive
        y = y + delta * p.kappa * (p.theta - y) + gamma * y.sqrt() * sqrt_delta * gaussian();
        if y <= 0.0 {
            return Ok(match cfg.dismissal {
                Dismissal::DiscardNegative => PathOutcome::Dismissed { step: k + 1 },
                Dismissal::AbsorbHalt => PathOutcome::Halted {
                    values,
                    step: k + 1,
                },
            });
        }
        values.push(y);
    }
    Ok(PathOutcome::Complete(values))
}

/// Euler variance path; bit-exact reproducible from (seed, stream_id).
pub fn euler_vol_path(p: &VolParams, cfg: &PathConfig) -> Result<PathOutcome> {
    let mut rng = stream_rng(cfg.seed, cfg.stream_id);
    let y0 = initial_value(p, cfg, &mut rng)?;
    euler_vol_path_with(p, cfg, y0, || StandardNormal.sample(&mut rng))
}

fn initial_value<R: Rng>(p: &VolParams, cfg: &PathConfig, rng: &mut R) -> Result<f64> {
    match cfg.y0 {
        InitialState::Value(y) => Ok(y),
        InitialState::Stationary => stationary_sample(p, rng),
    }
}

/// Generate `N + 1` sub-sampled observations `V_n = Y_{nT}`.
///
/// The exact scheme chains one transition per observation; the Euler
/// scheme requires `T/delta` to be a positive integer and keeps every
/// `T/delta`-th point.
pub fn subsampled_vol_series(
    p: &VolParams,
    grid: SamplingGrid,
    cfg: &PathConfig,
) -> Result<VolSeries> {
    grid.validate()?;
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, cfg.stream_id);
    match cfg.scheme {
        Scheme::ExactTransition => {
            let mut y = initial_value(p, cfg, &mut rng)?;
            let mut values = Vec::with_capacity(grid.n + 1);
            values.push(y);
            for _ in 0..grid.n {
                y = exact_transition_sample(p, y, grid.t, &mut rng)?;
                values.push(y);
            }
            VolSeries::new(grid, values)
        }
        Scheme::Euler { delta } => {
            let m = grid.t / delta;
            if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
                return Err(Error::Config(format!(
                    "T/delta = {m} must be a positive integer"
                )));
            }
            let m = m.round() as usize;
            let y0 = initial_value(p, cfg, &mut rng)?;
            let run_cfg = PathConfig {
                horizon: grid.horizon(),
                ..*cfg
            };
            let path = euler_vol_path_with(p, &run_cfg, y0, || StandardNormal.sample(&mut rng))?
                .complete()?;
            let values: Vec<f64> = path.iter().step_by(m).copied().collect();
            VolSeries::new(grid, values)
        }
    }
}

/// Joint Euler path for price and variance with correlated drivers
/// `dZ = rho dB + sqrt(1 - rho^2) dW`, sub-sampled to `(U_n, V_n)`.
pub fn joint_euler_path(
    hp: &HestonParams,
    grid: SamplingGrid,
    cfg: &PathConfig,
    x0: f64,
) -> Result<JointSeries> {
    grid.validate()?;
    cfg.validate()?;
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::Config(format!("x0 must be positive, got {x0}")));
    }
    let delta = match cfg.scheme {
        Scheme::Euler { delta } => delta,
        Scheme::ExactTransition => {
            return Err(Error::Config(
                "joint simulation supports only the Euler scheme".to_string(),
            ))
        }
    };
    let m = grid.t / delta;
    if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
        return Err(Error::Config(format!("T/delta = {m} must be a positive integer")));
    }
    let m = m.round() as usize;
    let steps = grid.n * m;
    let sqrt_delta = delta.sqrt();
    let gamma = hp.vol.gamma2.sqrt();
    let rho_perp = (1.0 - hp.rho * hp.rho).sqrt();

    let mut rng = stream_rng(cfg.seed, cfg.stream_id);
    let mut y = initial_value(&hp.vol, cfg, &mut rng)?;
    let mut x = x0;
    let mut prices = Vec::with_capacity(grid.n + 1);
    let mut variances = Vec::with_capacity(grid.n + 1);
    prices.push(x);
    variances.push(y);
    for k in 0..steps {
        let gb: f64 = StandardNormal.sample(&mut rng);
        let gw: f64 = StandardNormal.sample(&mut rng);
        let db = sqrt_delta * gb;
        let dz = hp.rho * db + rho_perp * sqrt_delta * gw;
        let sqrt_y = y.sqrt();
        x = x + hp.mu * x * delta + sqrt_y * x * dz;
        y = y + delta * hp.vol.kappa * (hp.vol.theta - y) + gamma * sqrt_y * db;
        if y <= 0.0 {
            return Err(Error::Dismissed { step: k + 1, value: y });
        }
        if x <= 0.0 {
            return Err(Error::Dismissed { step: k + 1, value: x });
        }
        if (k + 1) % m == 0 {
            prices.push(x);
            variances.push(y);
        }
    }
    JointSeries::new(grid, prices, variances)
}

/// Conditional mean `m_y = theta (1 - omega_t) + omega_t y` of the exact
/// transition at horizon `t`.
pub fn conditional_mean(p: &VolParams, y: f64, t: f64) -> f64 {
    let omega_t = (-t * p.kappa).exp();
    p.theta * (1.0 - omega_t) + omega_t * y
}

/// Conditional variance
/// `var_y = gamma2 (1 - omega_t)/kappa (omega_t y + (1 - omega_t) theta / 2)`.
pub fn conditional_variance(p: &VolParams, y: f64, t: f64) -> f64 {
    let omega_t = (-t * p.kappa).exp();
    p.gamma2 * (1.0 - omega_t) / p.kappa * (omega_t * y + (1.0 - omega_t) * p.theta / 2.0)
}

/// Transition density `g_t(y, z)` of the variance process, evaluated as a
/// Poisson mixture of central chi-square densities with relative tail
/// truncation below 1e-12. Diagnostic use only.
pub fn transition_density(p: &VolParams, y: f64, z: f64, t: f64) -> Result<f64> {
    let tp = TransitionParams::new(p, t)?;
    if !(y > 0.0 && z > 0.0) {
        return Err(Error::Config("density arguments must be positive".to_string()));
    }
    let x = tp.lambda * z;
    let nc = tp.lambda * y * tp.nu;
    Ok(tp.lambda * noncentral_chi_square_pdf(x, tp.dof, nc))
}

/// Density of the noncentral chi-square as
/// `sum_j Poisson(j; nc/2) chi2_pdf(x; k + 2j)`, truncated when the
/// remaining Poisson mass drops below 1e-13.
fn noncentral_chi_square_pdf(x: f64, dof: f64, nc: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let half_nc = nc / 2.0;
    let chi2_ln_pdf = |x: f64, k: f64| -> f64 {
        let h = k / 2.0;
        (h - 1.0) * x.ln() - x / 2.0 - h * std::f64::consts::LN_2 - ln_gamma(h)
    };
    if half_nc == 0.0 {
        return chi2_ln_pdf(x, dof).exp();
    }
    // walk the Poisson weights outward from the mode
    let mode = half_nc.floor() as i64;
    let ln_pois = |j: i64| -> f64 {
        let jf = j as f64;
        -half_nc + jf * half_nc.ln() - ln_gamma(jf + 1.0)
    };
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut j_lo = mode;
    let mut j_hi = mode;
    let term = |j: i64| (ln_pois(j) + chi2_ln_pdf(x, dof + 2.0 * j as f64)).exp();
    let weight = |j: i64| ln_pois(j).exp();
    total += term(mode);
    mass += weight(mode);
    while mass < 1.0 - 1e-13 {
        let mut advanced = false;
        if j_lo > 0 {
            j_lo -= 1;
            total += term(j_lo);
            mass += weight(j_lo);
            advanced = true;
        }
        j_hi += 1;
        total += term(j_hi);
        mass += weight(j_hi);
        if !advanced && weight(j_hi) < 1e-18 {
            break;
        }
    }
    total
}

/// Dump a variance path as CSV `n,t,V` (17 significant digits).
pub fn write_vol_csv<W: std::io::Write>(series: &VolSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,t,V")?;
    for (n, v) in series.values().iter().enumerate() {
        writeln!(out, "{n},{:.16e},{v:.16e}", n as f64 * series.grid.t)?;
    }
    Ok(())
}

/// Dump a joint path as CSV `n,t,V,U`.
pub fn write_joint_csv<W: std::io::Write>(series: &JointSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,t,V,U")?;
    for n in 0..=series.grid.n {
        writeln!(
            out,
            "{n},{:.16e},{:.16e},{:.16e}",
            n as f64 * series.grid.t,
            series.variances()[n],
            series.prices()[n]
        )?;
    }
    Ok(())
}
