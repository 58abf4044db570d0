//! Domain types for the Heston volatility SDE and the exact space/time
//! rescaling maps that reduce any estimation problem to canonical form.
//!
//! The volatility SDE is `dY = kappa (theta - Y) dt + gamma sqrt(Y) dB`,
//! constrained to `kappa, theta, gamma > 0` and the Feller condition
//! `2 kappa theta - gamma^2 > 0`. All containers here are immutable values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the autonomous volatility SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolParams {
    /// Mean-reversion rate (1/time).
    pub kappa: f64,
    /// Long-run variance level.
    pub theta: f64,
    /// Squared vol-of-vol (variance/time).
    pub gamma2: f64,
}

/// Full Heston parameter set: volatility triple plus price drift and
/// Brownian correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    #[serde(flatten)]
    pub vol: VolParams,
    pub mu: f64,
    pub rho: f64,
}

/// The two dimensionless quantities `omega = exp(-kappa T)` and
/// `zeta = kappa theta / gamma^2` that control all estimator asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    pub omega: f64,
    pub zeta: f64,
}

/// Time-changed SDE parameters `dV = (u - v V) ds + sqrt(2w) sqrt(V) dB`.
///
/// Membership in the open cone S means `u > w > 0` and `v > 0`, which is
/// equivalent to the original domain constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// Observation grid: `N` observations at times `T, 2T, ..., NT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

/// A sub-sampled variance series `V_0 .. V_N`, all entries strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    pub grid: SamplingGrid,
    values: Vec<f64>,
}

/// A joint price/variance series `(U_n, V_n)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSeries {
    pub grid: SamplingGrid,
    prices: Vec<f64>,
    variances: Vec<f64>,
}

/// Outcome of checking a raw parameter triple against the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainCheck {
    pub ok: bool,
    /// Names the first violated constraint, if any.
    pub violation: Option<String>,
}

/// Classify a raw triple against the domain `kappa, theta, gamma2 > 0`
/// and the Feller condition `2 kappa theta - gamma2 > 0`.
pub fn validate_domain(kappa: f64, theta: f64, gamma2: f64) -> DomainCheck {
    let fail = |msg: &str| DomainCheck {
        ok: false,
        violation: Some(msg.to_string()),
    };
    if !kappa.is_finite() || kappa <= 0.0 {
        return fail("kappa must be positive and finite");
    }
    if !theta.is_finite() || theta <= 0.0 {
        return fail("theta must be positive and finite");
    }
    if !gamma2.is_finite() || gamma2 <= 0.0 {
        return fail("gamma2 must be positive and finite");
    }
    if 2.0 * kappa * theta - gamma2 <= 0.0 {
        return fail("Feller condition violated: 2*kappa*theta - gamma2 <= 0");
    }
    DomainCheck {
        ok: true,
        violation: None,
    }
}

impl VolParams {
    pub fn new(kappa: f64, theta: f64, gamma2: f64) -> Result<Self> {
        let check = validate_domain(kappa, theta, gamma2);
        match check.violation {
            Some(v) => Err(Error::Domain(v)),
            None => Ok(Self {
                kappa,
                theta,
                gamma2,
            }),
        }
    }

    /// Build without domain validation. Only for classification paths and
    /// tests that need out-of-domain triples.
    pub fn new_unchecked(kappa: f64, theta: f64, gamma2: f64) -> Self {
        Self {
            kappa,
            theta,
            gamma2,
        }
    }

    pub fn zeta(&self) -> f64 {
        self.kappa * self.theta / self.gamma2
    }

    /// Canonical parameters plus the canonical sub-sampling time
    /// `Tbar = kappa T`.
    pub fn to_canonical(&self, grid: SamplingGrid) -> Result<(CanonicalParams, f64)> {
        if let Some(v) = validate_domain(self.kappa, self.theta, self.gamma2).violation {
            return Err(Error::Domain(v));
        }
        grid.validate()?;
        let canonical = CanonicalParams::new((-self.kappa * grid.t).exp(), self.zeta())?;
        Ok((canonical, self.kappa * grid.t))
    }

    /// Space rescaling `Y -> A Y`: `(kappa, A theta, A gamma2)`. Leaves the
    /// canonical parameters unchanged.
    pub fn rescale_space(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {a}")));
        }
        Ok(Self {
            kappa: self.kappa,
            theta: a * self.theta,
            gamma2: a * self.gamma2,
        })
    }

    /// Time change `t -> s = t/sigma`, yielding the cone parameters
    /// `u = sigma kappa theta`, `v = sigma kappa`, `w = sigma gamma2 / 2`.
    pub fn rescale_time(&self, sigma: f64) -> Result<ConeParams> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!(
                "time rescaling factor must be positive, got {sigma}"
            )));
        }
        Ok(ConeParams {
            u: sigma * self.kappa * self.theta,
            v: sigma * self.kappa,
            w: sigma * self.gamma2 / 2.0,
        })
    }
}

impl HestonParams {
    pub fn new(vol: VolParams, mu: f64, rho: f64) -> Result<Self> {
        if let Some(v) = validate_domain(vol.kappa, vol.theta, vol.gamma2).violation {
            return Err(Error::Domain(v));
        }
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
        }
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { vol, mu, rho })
    }
}

impl CanonicalParams {
    pub fn new(omega: f64, zeta: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0 && omega < 1.0) {
            return Err(Error::Domain(format!("omega must lie in (0,1), got {omega}")));
        }
        if !(zeta.is_finite() && zeta > 0.5) {
            return Err(Error::Domain(format!("zeta must exceed 1/2, got {zeta}")));
        }
        Ok(Self { omega, zeta })
    }

    /// The canonical SDE has `kappa = gamma = 1`, `theta = zeta`.
    pub fn canonical_vol_params(&self) -> VolParams {
        VolParams {
            kappa: 1.0,
            theta: self.zeta,
            gamma2: 1.0,
        }
    }

    /// Canonical sub-sampling time `Tbar = -log(omega)`.
    pub fn tbar(&self) -> f64 {
        -self.omega.ln()
    }
}

impl ConeParams {
    pub fn in_cone(&self) -> bool {
        self.u > self.w && self.w > 0.0 && self.v > 0.0
    }

    /// Inverse of [`VolParams::rescale_time`]: `kappa = v/sigma`,
    /// `theta = u/v`, `gamma2 = 2w/sigma`.
    pub fn to_params(&self, sigma: f64) -> Result<VolParams> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!(
                "time rescaling factor must be positive, got {sigma}"
            )));
        }
        if !self.in_cone() {
            return Err(Error::OutsideCone {
                u: self.u,
                v: self.v,
                w: self.w,
            });
        }
        Ok(VolParams {
            kappa: self.v / sigma,
            theta: self.u / self.v,
            gamma2: 2.0 * self.w / sigma,
        })
    }
}

impl SamplingGrid {
    pub fn new(t: f64, n: usize) -> Result<Self> {
        let grid = Self { t, n };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::Grid(format!("T must be positive, got {}", self.t)));
        }
        if self.n < 2 {
            return Err(Error::Grid(format!("N must be at least 2, got {}", self.n)));
        }
        Ok(())
    }

    /// Global observation time `S = N T`.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.t
    }
}

impl VolSeries {
    /// `values` holds `V_0 .. V_N`, so its length must be `grid.n + 1`.
    pub fn new(grid: SamplingGrid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n + 1 {
            return Err(Error::SeriesTooShort {
                need: grid.n + 1,
                got: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveVariance { index: i, value: v });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scale every entry by `a > 0`; used by annualization.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Domain(format!("scale factor must be positive, got {a}")));
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        })
    }

    /// Reinterpret the same values on a grid with sub-sampling time `t`.
    pub fn with_subsampling_time(&self, t: f64) -> Result<Self> {
        Self::new(SamplingGrid::new(t, self.grid.n)?, self.values.clone())
    }
}

impl JointSeries {
    pub fn new(grid: SamplingGrid, prices: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if prices.len() != grid.n + 1 || variances.len() != grid.n + 1 {
            return Err(Error::SeriesTooShort {
                need: grid.n + 1,
                got: prices.len().min(variances.len()),
            });
        }
        for (i, &p) in prices.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::NonPositivePrice { index: i, value: p });
            }
        }
        for (i, &v) in variances.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveVariance { index: i, value: v });
            }
        }
        Ok(Self {
            grid,
            prices,
            variances,
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn vol_series(&self) -> VolSeries {
        VolSeries {
            grid: self.grid,
            values: self.variances.clone(),
        }
    }
}
