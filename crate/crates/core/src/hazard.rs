//! The profiled baseline cumulative hazard: the `ψ` function and the
//! weighted forward recursion producing a [`StepHazard`].

use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaFamily};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::margins::{CensoringModel, CumulativeHazard, PhParams};
use crate::weights::WeightVector;

/// Increments above this value abort the recursion.
pub const INCREMENT_CAP: f64 = 1e3;

/// Full parameter `θ = (α, β, η, ν, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub ph: PhParams,
    pub cens: CensoringModel,
    pub copula: Copula,
}

impl Theta {
    pub fn new(ph: PhParams, cens: CensoringModel, copula: Copula) -> Result<Self> {
        if cens.eta.len() != ph.beta.len() + 2 {
            return Err(Error::LengthMismatch {
                what: "eta",
                got: cens.eta.len(),
                expected: ph.beta.len() + 2,
            });
        }
        Ok(Self { ph, cens, copula })
    }

    /// Number of covariates `m`.
    pub fn m(&self) -> usize {
        self.ph.beta.len()
    }

    /// Natural-scale vector `[α, β…, η…, ν, τ]`; `τ` is omitted for the
    /// independence copula.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.m() + 5);
        v.push(self.ph.alpha);
        v.extend(&self.ph.beta);
        v.extend(&self.cens.eta);
        v.push(self.cens.nu);
        if self.copula.family.has_parameter() {
            v.push(self.copula.tau());
        }
        v
    }

    /// Labels matching [`Theta::to_vec`].
    pub fn names(&self) -> Vec<String> {
        parameter_names(self.m(), self.copula.family)
    }
}

pub fn parameter_names(m: usize, family: CopulaFamily) -> Vec<String> {
    let mut v = vec!["alpha".to_string()];
    v.extend((1..=m).map(|j| format!("beta{j}")));
    v.extend((0..m + 2).map(|j| format!("eta{j}")));
    v.push("nu".into());
    if family.has_parameter() {
        v.push("tau".into());
    }
    v
}

#[derive(Deserialize)]
struct RawStepHazard {
    time: Vec<f64>,
    increment: Vec<f64>,
}

impl TryFrom<RawStepHazard> for StepHazard {
    type Error = Error;

    fn try_from(r: RawStepHazard) -> Result<Self> {
        StepHazard::new(r.time, r.increment)
    }
}

/// Right-continuous nondecreasing step function with `Λ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepHazard")]
pub struct StepHazard {
    #[serde(rename = "time")]
    times: Vec<f64>,
    #[serde(rename = "increment")]
    increments: Vec<f64>,
    #[serde(skip_serializing)]
    cumulative: Vec<f64>,
}

impl StepHazard {
    pub fn new(times: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if times.len() != increments.len() {
            return Err(Error::LengthMismatch {
                what: "increments",
                got: increments.len(),
                expected: times.len(),
            });
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameter(
                "hazard times must be positive and strictly increasing".into(),
            ));
        }
        if increments.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("hazard increments must be finite and nonnegative".into()));
        }
        let mut acc = 0.0;
        let cumulative = increments
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Ok(Self {
            times,
            increments,
            cumulative,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Λ(t) = Σ_{t_k ≤ t} ΔΛ(t_k)`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `ΔΛ(t)`, zero away from the jump times.
    pub fn jump_at(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => self.increments[k],
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

impl CumulativeHazard for StepHazard {
    fn cumulative(&self, t: f64) -> f64 {
        self.eval(t)
    }
}

/// Free-function form of [`StepHazard::eval`].
pub fn eval_hazard(sh: &StepHazard, t: f64) -> f64 {
    sh.eval(t)
}

/// Terms shared by `ψ` and the likelihood at one `(θ, Λ, y)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MarginTerms {
    /// `Λ e^{lp}`
    pub cum: f64,
    pub ft: f64,
    pub st: f64,
    pub fc: f64,
    pub sc: f64,
}

#[inline]
pub(crate) fn margin_terms(lam: f64, elp: f64, ln_y: f64, loc: f64, cens: &CensoringModel) -> MarginTerms {
    let cum = lam * elp;
    let st = (-cum).exp();
    let ft = -(-cum).exp_m1();
    let (fc, sc) = cens.family.cdf_sf((ln_y - loc) / cens.nu);
    MarginTerms { cum, ft, st, fc, sc }
}

/// `ψ` from precomputed pieces.
#[inline]
pub(crate) fn psi_fast(copula: &Copula, lp: f64, m: &MarginTerms) -> f64 {
    if copula.family == CopulaFamily::Independence {
        // S = S_T S_C and 1 - ζ1 = S_C cancel exactly
        return lp;
    }
    let s = copula.survival_from(m.ft, m.st, m.fc, m.sc);
    let hc = copula.partial_u_complement(m.ft, m.fc);
    lp - m.cum - s.ln() + hc.ln()
}

/// `ψ = zα + x'β - Λ e^{zα+x'β} - log S(y|z,x) + log{1 - ζ1(F_T, F_C)}`
/// where `F_T` uses `Λ(y) = lam` and `S` is the joint survival of `(T, C)`.
pub fn psi(theta: &Theta, lam: f64, y: f64, z: bool, x: &[f64]) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::NonPositiveCensoringTime(y));
    }
    let lp = theta.ph.linear_predictor(z, x);
    let loc = theta.cens.location(z, x);
    let m = margin_terms(lam, lp.exp(), y.ln(), loc, &theta.cens);
    let v = psi_fast(&theta.copula, lp, &m);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinitePsi { y, z, x: x.to_vec() })
    }
}

/// Column-oriented copy of a dataset for the hot loops.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub y: Vec<f64>,
    pub ln_y: Vec<f64>,
    pub d1: Vec<bool>,
    pub d2: Vec<bool>,
    pub z: Vec<bool>,
    pub x: Vec<Vec<f64>>,
    /// Row indices sorted by `y` ascending (stable).
    pub order: Vec<usize>,
}

impl Prepared {
    pub fn new(data: &Dataset) -> Self {
        let obs = data.observations();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[a].y.total_cmp(&obs[b].y));
        Self {
            y: obs.iter().map(|o| o.y).collect(),
            ln_y: obs.iter().map(|o| o.y.ln()).collect(),
            d1: obs.iter().map(|o| o.delta1).collect(),
            d2: obs.iter().map(|o| o.delta2).collect(),
            z: obs.iter().map(|o| o.z).collect(),
            x: obs.iter().map(|o| o.x.clone()).collect(),
            order,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

/// Largest follow-up time, the default end of the estimation window.
pub fn default_tau_bar(data: &Dataset) -> f64 {
    data.max_y()
}

/// Weighted forward recursion
/// `ΔΛ(t_k) = Σ κ_i dI_i(t_k) / Σ_{Y_i ≥ t_k} κ_i exp{ψ_i(θ, Λ(t_{k-1}))}`
/// over the distinct event times `t_k ≤ τ̄` with a positive weighted count.
/// Tied event times form a single jump; rows with zero weight are skipped.
pub fn fit_step_hazard(theta: &Theta, data: &Dataset, weights: &WeightVector, tau_bar: Option<f64>) -> Result<StepHazard> {
    if weights.len() != data.n() {
        return Err(Error::LengthMismatch {
            what: "weights",
            got: weights.len(),
            expected: data.n(),
        });
    }
    let prep = Prepared::new(data);
    let tau_bar = tau_bar.unwrap_or_else(|| default_tau_bar(data));
    fit_step_hazard_prepared(theta, &prep, &weights.kappa, tau_bar)
}

pub(crate) fn fit_step_hazard_prepared(theta: &Theta, prep: &Prepared, kappa: &[f64], tau_bar: f64) -> Result<StepHazard> {
    let n = prep.n();
    // rows with positive weight in ascending y
    let active: Vec<usize> = prep.order.iter().copied().filter(|&i| kappa[i] > 0.0).collect();
    let lp: Vec<f64> = (0..n).map(|i| theta.ph.linear_predictor(prep.z[i], &prep.x[i])).collect();
    let elp: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    let loc: Vec<f64> = (0..n).map(|i| theta.cens.location(prep.z[i], &prep.x[i])).collect();

    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut lam = 0.0;
    let mut pos = 0;
    while pos < active.len() {
        let t = prep.y[active[pos]];
        if t > tau_bar {
            break;
        }
        let mut end = pos;
        let mut num = 0.0;
        while end < active.len() && prep.y[active[end]] == t {
            let i = active[end];
            if prep.d1[i] {
                num += kappa[i];
            }
            end += 1;
        }
        if num > 0.0 {
            let ln_t = t.ln();
            let mut den = 0.0;
            for &i in &active[pos..] {
                let m = margin_terms(lam, elp[i], ln_t, loc[i], &theta.cens);
                let p = psi_fast(&theta.copula, lp[i], &m);
                if !p.is_finite() {
                    return Err(Error::NonFinitePsi {
                        y: t,
                        z: prep.z[i],
                        x: prep.x[i].clone(),
                    });
                }
                den += kappa[i] * p.exp();
            }
            if !(den > 0.0) || !den.is_finite() {
                return Err(Error::ZeroDenominator { time: t });
            }
            let d = num / den;
            if d > INCREMENT_CAP {
                return Err(Error::IncrementCap { time: t, increment: d });
            }
            lam += d;
            times.push(t);
            increments.push(d);
        }
        pos = end;
    }
    if times.is_empty() {
        return Err(Error::NoEvents);
    }
    StepHazard::new(times, increments)
}
