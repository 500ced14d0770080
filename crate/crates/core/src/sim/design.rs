//! Simulation designs and the shipped presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaFamily};
use crate::error::{Error, Result};
use crate::fit::{OptimizerConfig, Theta};
use crate::hazard::parameter_names;
use crate::margins::{CensoringFamily, CensoringModel, ParametricBaseline, PhParams};
use crate::weights::KernelConfig;

/// Generating parameters of one latent group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    /// `Λ(t) = c·t^ρ`.
    pub baseline: ParametricBaseline,
    /// Kendall's tau of `(T, C)`.
    pub tau: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    /// `(η0, η1, η2, η3)` for `x̃ = (1, z, x1, x2)`.
    pub eta: Vec<f64>,
    pub nu: f64,
}

impl GroupParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(c: f64, rho: f64, tau: f64, alpha: f64, beta: [f64; 2], eta: [f64; 4], nu: f64) -> Result<Self> {
        Ok(Self {
            baseline: ParametricBaseline::new(c, rho)?,
            tau,
            alpha,
            beta: beta.to_vec(),
            eta: eta.to_vec(),
            nu,
        })
    }

    pub fn validate(&self, copula: CopulaFamily) -> Result<()> {
        ParametricBaseline::new(self.baseline.c, self.baseline.rho)?;
        if self.beta.len() != 2 {
            return Err(Error::LengthMismatch {
                what: "beta",
                got: self.beta.len(),
                expected: 2,
            });
        }
        if self.eta.len() != 4 {
            return Err(Error::LengthMismatch {
                what: "eta",
                got: self.eta.len(),
                expected: 4,
            });
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be positive, got {}", self.nu)));
        }
        Copula::from_tau(copula, self.tau)?;
        Ok(())
    }

    /// The group's `θ` under the given families.
    pub fn theta(&self, copula: CopulaFamily, censoring: CensoringFamily) -> Result<Theta> {
        Theta::new(
            PhParams::new(self.alpha, self.beta.clone()),
            CensoringModel::new(censoring, self.eta.clone(), self.nu)?,
            Copula::from_tau(copula, self.tau)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Every row weighted one.
    Naive,
    /// Kernel weights from the first stage.
    Proposed,
    /// Weight `1{G = co}` from the latent groups.
    Oracle,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Naive, Estimator::Proposed, Estimator::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::Proposed => "proposed",
            Estimator::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Estimator::Naive),
            "proposed" => Ok(Estimator::Proposed),
            "oracle" => Ok(Estimator::Oracle),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

/// A complete Monte Carlo design. Fitting with families other than the
/// generating ones gives a misspecification experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub copula: CopulaFamily,
    pub censoring: CensoringFamily,
    pub params_co: GroupParams,
    /// Shared by always-takers and never-takers.
    pub params_nc: GroupParams,
    /// `P(G = co)`; the rest splits evenly between always- and never-takers.
    #[serde(default = "default_complier_prob")]
    pub complier_prob: f64,
    /// `A ~ U(0, admin_upper)`.
    pub admin_upper: f64,
    pub n: usize,
    pub replications: usize,
    pub estimator: Estimator,
    #[serde(default)]
    pub fit_copula: Option<CopulaFamily>,
    #[serde(default)]
    pub fit_censoring: Option<CensoringFamily>,
    /// Draw one bootstrap resample per replicate for warp-speed coverage.
    #[serde(default)]
    pub warp_speed: bool,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_complier_prob() -> f64 {
    2.0 / 3.0
}

/// Names accepted by [`SimDesign::preset`].
pub const PRESETS: [&str; 4] = [
    "lowdep",
    "highdep",
    "lowdep-clayton90-lognormal",
    "lowdep-clayton180-loglogistic",
];

fn low_dependence(sign: f64) -> Result<(GroupParams, GroupParams)> {
    Ok((
        GroupParams::new(0.5, 0.75, sign * 0.25, -0.6, [1.0, 0.9], [1.5, -0.8, -2.0, 0.9], 1.2)?,
        GroupParams::new(0.7, 0.6, sign * 0.2, -0.1, [0.8, 0.7], [1.3, -1.0, -1.8, 0.6], 1.1)?,
    ))
}

impl SimDesign {
    fn base(
        copula: CopulaFamily,
        censoring: CensoringFamily,
        (params_co, params_nc): (GroupParams, GroupParams),
        admin_upper: f64,
    ) -> Self {
        Self {
            copula,
            censoring,
            params_co,
            params_nc,
            complier_prob: default_complier_prob(),
            admin_upper,
            n: 1000,
            replications: 50,
            estimator: Estimator::Proposed,
            fit_copula: None,
            fit_censoring: None,
            warp_speed: false,
            kernel: KernelConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }

    /// One of [`PRESETS`]. `lowdep` and `highdep` are Frank–Weibull; the
    /// Clayton(90) variant flips the sign of both taus.
    pub fn preset(name: &str) -> Result<Self> {
        let d = match name {
            "lowdep" => Self::base(CopulaFamily::Frank, CensoringFamily::Weibull, low_dependence(1.0)?, 15.0),
            "highdep" => Self::base(
                CopulaFamily::Frank,
                CensoringFamily::Weibull,
                (
                    GroupParams::new(0.1, 0.6, 0.75, 0.6, [1.3, 1.0], [1.3, -0.6, -0.8, 1.2], 1.0)?,
                    GroupParams::new(0.2, 0.7, 0.7, 0.2, [1.1, 0.8], [1.1, -0.8, -0.5, 0.9], 1.2)?,
                ),
                50.0,
            ),
            "lowdep-clayton90-lognormal" => Self::base(
                CopulaFamily::Clayton90,
                CensoringFamily::Lognormal,
                low_dependence(-1.0)?,
                15.0,
            ),
            "lowdep-clayton180-loglogistic" => Self::base(
                CopulaFamily::Clayton180,
                CensoringFamily::Loglogistic,
                low_dependence(1.0)?,
                15.0,
            ),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset '{other}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.complier_prob > 0.0 && self.complier_prob <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "complier_prob must lie in (0, 1], got {}",
                self.complier_prob
            )));
        }
        if !(self.admin_upper > 0.0 && self.admin_upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "admin_upper must be positive, got {}",
                self.admin_upper
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("n must be at least 2".into()));
        }
        self.params_co.validate(self.copula)?;
        self.params_nc.validate(self.copula)?;
        self.kernel.validate()?;
        self.optimizer.validate()
    }

    pub fn fit_copula(&self) -> CopulaFamily {
        self.fit_copula.unwrap_or(self.copula)
    }

    pub fn fit_censoring(&self) -> CensoringFamily {
        self.fit_censoring.unwrap_or(self.censoring)
    }

    /// Parameter names of the fitted model.
    pub fn parameter_names(&self) -> Vec<String> {
        parameter_names(2, self.fit_copula())
    }

    /// Complier truth `[α, β, η, ν, τ]`, with `τ` dropped when the fitted
    /// copula has no parameter.
    pub fn truth(&self) -> Vec<f64> {
        let p = &self.params_co;
        let mut v = vec![p.alpha];
        v.extend(&p.beta);
        v.extend(&p.eta);
        v.push(p.nu);
        if self.fit_copula().has_parameter() {
            v.push(p.tau);
        }
        v
    }
}
