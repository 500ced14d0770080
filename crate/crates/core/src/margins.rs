//! Conditional margins: proportional hazards for `T` and log-location-scale
//! regression models for `C`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{norm_cdf, norm_ln_pdf, norm_quantile};

/// Anything that can report a cumulative hazard `Λ(t)`.
pub trait CumulativeHazard {
    fn cumulative(&self, t: f64) -> f64;
}

/// Parametric baseline `Λ(t) = c·t^ρ`, used to generate data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricBaseline {
    pub c: f64,
    pub rho: f64,
}

impl ParametricBaseline {
    pub fn new(c: f64, rho: f64) -> Result<Self> {
        if !(c > 0.0 && rho > 0.0 && c.is_finite() && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "baseline needs c > 0 and rho > 0, got c={c}, rho={rho}"
            )));
        }
        Ok(Self { c, rho })
    }

    /// Time at which the cumulative hazard equals `lam`.
    pub fn inverse(&self, lam: f64) -> f64 {
        (lam / self.c).powf(1.0 / self.rho)
    }
}

impl CumulativeHazard for ParametricBaseline {
    fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.c * t.powf(self.rho)
        }
    }
}

/// Proportional hazards coefficients: treatment effect `alpha` and
/// covariate effects `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl PhParams {
    pub fn new(alpha: f64, beta: Vec<f64>) -> Self {
        Self { alpha, beta }
    }

    /// `zα + x'β`.
    #[inline]
    pub fn linear_predictor(&self, z: bool, x: &[f64]) -> f64 {
        let mut lp = if z { self.alpha } else { 0.0 };
        for (b, xi) in self.beta.iter().zip(x) {
            lp += b * xi;
        }
        lp
    }

    /// Complier causal hazard ratio `exp(α)`.
    pub fn cchr(&self) -> f64 {
        self.alpha.exp()
    }
}

/// `F(t | z, x) = 1 - exp{-Λ(t) e^{zα + x'β}}`.
pub fn ph_cdf<H: CumulativeHazard + ?Sized>(t: f64, z: bool, x: &[f64], params: &PhParams, base: &H) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let lam = base.cumulative(t);
    -(-lam * params.linear_predictor(z, x).exp()).exp_m1()
}

/// Inverse of [`ph_cdf`] for a parametric baseline.
pub fn ph_quantile(p: f64, z: bool, x: &[f64], params: &PhParams, base: &ParametricBaseline) -> f64 {
    let lam = -(-p).ln_1p() * (-params.linear_predictor(z, x)).exp();
    base.inverse(lam)
}

/// Error law of `(ln C - x̃'η)/ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CensoringFamily {
    /// Minimum extreme-value errors.
    Weibull,
    /// Normal errors.
    Lognormal,
    /// Logistic errors.
    Loglogistic,
}

impl CensoringFamily {
    pub const ALL: [CensoringFamily; 3] = [
        CensoringFamily::Weibull,
        CensoringFamily::Lognormal,
        CensoringFamily::Loglogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CensoringFamily::Weibull => "weibull",
            CensoringFamily::Lognormal => "lognormal",
            CensoringFamily::Loglogistic => "loglogistic",
        }
    }

    /// Standardised error CDF and survival function.
    #[inline]
    pub(crate) fn cdf_sf(self, w: f64) -> (f64, f64) {
        match self {
            CensoringFamily::Weibull => {
                let e = w.exp();
                (-(-e).exp_m1(), (-e).exp())
            }
            CensoringFamily::Lognormal => (norm_cdf(w), norm_cdf(-w)),
            CensoringFamily::Loglogistic => {
                if w >= 0.0 {
                    let e = (-w).exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                } else {
                    let e = w.exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                }
            }
        }
    }

    #[inline]
    pub(crate) fn ln_pdf(self, w: f64) -> f64 {
        match self {
            CensoringFamily::Weibull => w - w.exp(),
            CensoringFamily::Lognormal => norm_ln_pdf(w),
            CensoringFamily::Loglogistic => -w.abs() - 2.0 * (-w.abs()).exp().ln_1p(),
        }
    }

    pub(crate) fn quantile(self, p: f64) -> f64 {
        match self {
            CensoringFamily::Weibull => (-(-p).ln_1p()).ln(),
            CensoringFamily::Lognormal => norm_quantile(p),
            CensoringFamily::Loglogistic => p.ln() - (-p).ln_1p(),
        }
    }
}

impl fmt::Display for CensoringFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CensoringFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        CensoringFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown censoring family `{s}`")))
    }
}

/// `ln C = x̃'η + ν ε` with `x̃ = (1, z, x)` and `ε` drawn from the family's
/// error law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub family: CensoringFamily,
    pub eta: Vec<f64>,
    pub nu: f64,
}

impl CensoringModel {
    pub fn new(family: CensoringFamily, eta: Vec<f64>, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("censoring scale must be positive, got {nu}")));
        }
        if eta.len() < 2 {
            return Err(Error::InvalidParameter(
                "censoring coefficients need at least an intercept and a treatment term".into(),
            ));
        }
        Ok(Self { family, eta, nu })
    }

    /// `x̃'η`.
    #[inline]
    pub fn location(&self, z: bool, x: &[f64]) -> f64 {
        let mut loc = self.eta[0];
        if z {
            loc += self.eta[1];
        }
        for (e, xi) in self.eta[2..].iter().zip(x) {
            loc += e * xi;
        }
        loc
    }

    pub fn cdf(&self, c: f64, z: bool, x: &[f64]) -> Result<f64> {
        if c <= 0.0 {
            return Err(Error::NonPositiveCensoringTime(c));
        }
        Ok(self.family.cdf_sf((c.ln() - self.location(z, x)) / self.nu).0)
    }

    pub fn log_density(&self, c: f64, z: bool, x: &[f64]) -> Result<f64> {
        if c <= 0.0 {
            return Err(Error::NonPositiveCensoringTime(c));
        }
        let lc = c.ln();
        Ok(self.ln_density_at(lc, self.location(z, x)))
    }

    /// Log-density given `ln c` and the location.
    #[inline]
    pub(crate) fn ln_density_at(&self, ln_c: f64, loc: f64) -> f64 {
        let w = (ln_c - loc) / self.nu;
        self.family.ln_pdf(w) - self.nu.ln() - ln_c
    }

    pub fn quantile(&self, p: f64, z: bool, x: &[f64]) -> f64 {
        (self.location(z, x) + self.nu * self.family.quantile(p)).exp()
    }
}

/// Free-function form of [`CensoringModel::cdf`].
pub fn cens_cdf(c: f64, z: bool, x: &[f64], model: &CensoringModel) -> Result<f64> {
    model.cdf(c, z, x)
}

/// Free-function form of [`CensoringModel::log_density`].
pub fn cens_log_density(c: f64, z: bool, x: &[f64], model: &CensoringModel) -> Result<f64> {
    model.log_density(c, z, x)
}

/// Free-function form of [`CensoringModel::quantile`].
pub fn cens_quantile(p: f64, z: bool, x: &[f64], model: &CensoringModel) -> f64 {
    model.quantile(p, z, x)
}
