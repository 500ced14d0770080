//! Second stage: maximise the complier-weighted log-likelihood over `θ`,
//! alternating with the profiled hazard.

mod bootstrap;
mod likelihood;
pub mod optimize;
mod select;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaFamily};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hazard::{default_tau_bar, fit_step_hazard_prepared, Prepared, StepHazard};
use crate::margins::{CensoringFamily, CensoringModel, PhParams};
use crate::numeric::task_rng;
use crate::weights::{estimate_kappa, KernelConfig, TruncationBounds, WeightVector};

pub use crate::hazard::Theta;
pub use bootstrap::{bootstrap, bootstrap_from, bootstrap_p_value, default_nulls, BootstrapResult};
pub use likelihood::{loglik_contrib, weighted_loglik, LOG_FLOOR};
use likelihood::{objective, HazardAtRows};
use optimize::{nelder_mead, NelderMeadOptions};
pub use select::{default_combinations, select_model, Candidate, Selection};

/// Settings for the multi-start alternating maximisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Number of random starts `J`.
    pub n_starts: usize,
    pub max_outer_iters: usize,
    /// Sup-norm relative change of `θ` that ends the outer loop.
    pub outer_tol: f64,
    /// Objective evaluations allowed per start.
    pub start_max_evals: usize,
    /// Objective evaluations allowed per outer iteration.
    pub inner_max_evals: usize,
    pub inner_xtol: f64,
    pub inner_ftol: f64,
    /// Start box for `α`, `β` and `η`.
    pub coef_box: (f64, f64),
    pub nu_box: (f64, f64),
    /// Starts draw `τ` from this central fraction of the admissible range.
    pub tau_fraction: f64,
    pub seed: u64,
    /// Squared-extrapolation steps between alternation passes. The fixed
    /// point is unchanged; only the number of passes drops.
    pub accelerate: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_starts: 100,
            max_outer_iters: 120,
            outer_tol: 1e-6,
            start_max_evals: 600,
            inner_max_evals: 4000,
            inner_xtol: 1e-9,
            inner_ftol: 1e-9,
            coef_box: (-2.0, 2.0),
            nu_box: (0.2, 3.0),
            tau_fraction: 0.9,
            seed: 0,
            accelerate: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_outer_iters == 0 || !(self.outer_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "optimizer needs n_starts >= 1, max_outer_iters >= 1 and outer_tol > 0".into(),
            ));
        }
        if !(self.nu_box.0 > 0.0 && self.nu_box.0 <= self.nu_box.1) || self.coef_box.0 > self.coef_box.1 {
            return Err(Error::InvalidParameter("empty start box".into()));
        }
        if !(self.tau_fraction > 0.0 && self.tau_fraction <= 1.0) {
            return Err(Error::InvalidParameter("tau_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// How the first-stage weights are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Kernel-estimated complier probabilities.
    Proposed(KernelConfig),
    /// `κ ≡ 1`.
    Naive,
    /// Caller-supplied weights, e.g. the oracle `1{G = co}`.
    Given(WeightVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub copula: CopulaFamily,
    pub censoring: CensoringFamily,
    pub weights: WeightScheme,
    pub optimizer: OptimizerConfig,
    /// End of the estimation window; defaults to the largest `Y`.
    pub tau_bar: Option<f64>,
}

impl FitOptions {
    pub fn new(copula: CopulaFamily, censoring: CensoringFamily, weights: WeightScheme) -> Self {
        Self {
            copula,
            censoring,
            weights,
            optimizer: OptimizerConfig::default(),
            tau_bar: None,
        }
    }
}

/// Bandwidths and clamps chosen by the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstStageInfo {
    pub h1: f64,
    pub h2: f64,
    pub bounds: TruncationBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Theta,
    pub hazard: StepHazard,
    pub loglik: f64,
    pub converged: bool,
    pub n_outer: usize,
    pub weights_used: WeightVector,
    pub first_stage: Option<FirstStageInfo>,
    /// Starts whose hazard or objective could not be evaluated.
    pub start_failures: usize,
    pub tau_bar: f64,
}

/// Maps `θ` to an unconstrained vector `[α, β, η, ln ν, s]` with
/// `τ = lo + (hi - lo)(1 + tanh s)/2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Codec {
    pub m: usize,
    pub copula: CopulaFamily,
    pub censoring: CensoringFamily,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

impl Codec {
    pub fn new(m: usize, copula: CopulaFamily, censoring: CensoringFamily) -> Self {
        let (tau_lo, tau_hi) = copula.search_tau_range();
        Self {
            m,
            copula,
            censoring,
            tau_lo,
            tau_hi,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.m + 4 + usize::from(self.copula.has_parameter())
    }

    pub fn decode(&self, p: &[f64]) -> Option<Theta> {
        let m = self.m;
        let alpha = p[0];
        let beta = p[1..=m].to_vec();
        let eta = p[m + 1..2 * m + 3].to_vec();
        let nu = p[2 * m + 3].clamp(-10.0, 10.0).exp();
        let copula = if self.copula.has_parameter() {
            let s = p[2 * m + 4];
            let frac = ((1.0 + s.tanh()) / 2.0).clamp(1e-10, 1.0 - 1e-10);
            Copula::from_tau(self.copula, self.tau_lo + (self.tau_hi - self.tau_lo) * frac).ok()?
        } else {
            Copula::independence()
        };
        let cens = CensoringModel::new(self.censoring, eta, nu).ok()?;
        Theta::new(PhParams::new(alpha, beta), cens, copula).ok()
    }

    pub fn encode(&self, theta: &Theta) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.dim());
        p.push(theta.ph.alpha);
        p.extend(&theta.ph.beta);
        p.extend(&theta.cens.eta);
        p.push(theta.cens.nu.ln());
        if self.copula.has_parameter() {
            let frac = ((theta.copula.tau() - self.tau_lo) / (self.tau_hi - self.tau_lo)).clamp(1e-10, 1.0 - 1e-10);
            p.push((2.0 * frac - 1.0).atanh());
        }
        p
    }

    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &OptimizerConfig) -> Theta {
        let (a, b) = cfg.coef_box;
        let mut draw = |lo: f64, hi: f64| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let alpha = draw(a, b);
        let beta: Vec<f64> = (0..self.m).map(|_| draw(a, b)).collect();
        let eta: Vec<f64> = (0..self.m + 2).map(|_| draw(a, b)).collect();
        let nu = draw(cfg.nu_box.0, cfg.nu_box.1);
        let copula = if self.copula.has_parameter() {
            let margin = (1.0 - cfg.tau_fraction) / 2.0;
            let frac = draw(margin, 1.0 - margin);
            Copula::from_tau(self.copula, self.tau_lo + (self.tau_hi - self.tau_lo) * frac)
                .unwrap_or_else(|_| Copula::independence())
        } else {
            Copula::independence()
        };
        Theta {
            ph: PhParams::new(alpha, beta),
            cens: CensoringModel {
                family: self.censoring,
                eta,
                nu,
            },
            copula,
        }
    }
}

/// Sup-norm change of `new` relative to `old`, with absolute change used for
/// entries smaller than one in magnitude.
pub fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

struct Problem<'a> {
    prep: &'a Prepared,
    kappa: &'a [f64],
    codec: Codec,
    tau_bar: f64,
}

impl Problem<'_> {
    fn hazard(&self, theta: &Theta) -> Result<StepHazard> {
        fit_step_hazard_prepared(theta, self.prep, self.kappa, self.tau_bar)
    }

    /// Maximises over `θ` with the hazard held fixed.
    fn maximize_at(&self, start: &Theta, hazard: &StepHazard, opts: &NelderMeadOptions) -> (Theta, f64, usize) {
        let hz = HazardAtRows::new(self.prep, hazard, self.tau_bar);
        let f = |p: &[f64]| match self.codec.decode(p) {
            Some(th) => -objective(self.prep, self.kappa, &th, &hz),
            None => f64::INFINITY,
        };
        let x0 = self.codec.encode(start);
        let r = nelder_mead(f, &x0, opts);
        let theta = self.codec.decode(&r.x).unwrap_or_else(|| start.clone());
        (theta, -r.f, r.evals)
    }

    fn loglik(&self, theta: &Theta, hazard: &StepHazard) -> f64 {
        let hz = HazardAtRows::new(self.prep, hazard, self.tau_bar);
        objective(self.prep, self.kappa, theta, &hz)
    }
}

/// Multi-start alternating maximisation of the weighted log-likelihood for
/// one copula/censoring combination with the given weights.
pub fn maximize(
    data: &Dataset,
    weights: &WeightVector,
    config: &OptimizerConfig,
    copula: CopulaFamily,
    censoring: CensoringFamily,
    tau_bar: Option<f64>,
) -> Result<FitResult> {
    config.validate()?;
    if weights.len() != data.n() {
        return Err(Error::LengthMismatch {
            what: "weights",
            got: weights.len(),
            expected: data.n(),
        });
    }
    let prep = Prepared::new(data);
    let tau_bar = tau_bar.unwrap_or_else(|| default_tau_bar(data));
    let problem = Problem {
        prep: &prep,
        kappa: &weights.kappa,
        codec: Codec::new(data.schema().m(), copula, censoring),
        tau_bar,
    };
    let start_opts = NelderMeadOptions {
        max_evals: config.start_max_evals,
        xtol: config.inner_xtol,
        ftol: config.inner_ftol,
        step: 0.25,
    };

    let starts: Vec<Option<(Theta, f64)>> = (0..config.n_starts)
        .into_par_iter()
        .map(|j| {
            let mut rng = task_rng(config.seed, j as u64);
            let start = problem.codec.sample_start(&mut rng, config);
            let hazard = problem.hazard(&start).ok()?;
            let (theta, ll, _) = problem.maximize_at(&start, &hazard, &start_opts);
            ll.is_finite().then_some((theta, ll))
        })
        .collect();
    let start_failures = starts.iter().filter(|s| s.is_none()).count();
    let (mut theta, _) = starts
        .into_iter()
        .flatten()
        .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })
        .ok_or_else(|| Error::FitFailed(format!("all {} starts failed", config.n_starts)))?;
    log::debug!("best start after {} failures: {:?}", start_failures, theta.to_vec());

    let mut converged = false;
    let mut n_outer = 0;
    let mut step: f64 = 0.1;
    // one alternation pass: refit the hazard at θ, then maximise over θ
    let pass = |theta: &Theta, n_outer: &mut usize, step: &mut f64| -> Option<(Theta, f64)> {
        *n_outer += 1;
        let hazard = match problem.hazard(theta) {
            Ok(h) => h,
            Err(e) => {
                log::warn!("hazard refit failed at outer iteration {n_outer}: {e}");
                return None;
            }
        };
        let opts = NelderMeadOptions {
            max_evals: config.inner_max_evals,
            xtol: config.inner_xtol,
            ftol: config.inner_ftol,
            step: *step,
        };
        let (next, ll, evals) = problem.maximize_at(theta, &hazard, &opts);
        let change = relative_change(&theta.to_vec(), &next.to_vec());
        log::debug!("outer {n_outer}: change {change:.3e}, {evals} evals, loglik {ll:.6}");
        *step = (10.0 * change).clamp(1e-4, 0.1);
        Some((next, change))
    };
    'outer: while n_outer < config.max_outer_iters {
        let Some((t1, c1)) = pass(&theta, &mut n_outer, &mut step) else { break };
        if c1 < config.outer_tol {
            theta = t1;
            converged = true;
            break;
        }
        if !config.accelerate || n_outer + 2 > config.max_outer_iters {
            theta = t1;
            continue;
        }
        let Some((t2, c2)) = pass(&t1, &mut n_outer, &mut step) else {
            theta = t1;
            break;
        };
        if c2 < config.outer_tol {
            theta = t2;
            converged = true;
            break;
        }
        let x0 = problem.codec.encode(&theta);
        let x1 = problem.codec.encode(&t1);
        let x2 = problem.codec.encode(&t2);
        let r: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = (0..x0.len()).map(|i| x2[i] - 2.0 * x1[i] + x0[i]).collect();
        let norm = |w: &[f64]| w.iter().map(|e| e * e).sum::<f64>().sqrt();
        let a = if norm(&v) > 0.0 { (-norm(&r) / norm(&v)).min(-1.0) } else { -1.0 };
        let xe: Vec<f64> = (0..x0.len()).map(|i| x0[i] - 2.0 * a * r[i] + a * a * v[i]).collect();
        // stabilise the extrapolated point with one more pass; keep t2 if
        // that pass fails or its residual is no better than the first one
        if let Some(te) = problem.codec.decode(&xe) {
            if let Some((t3, c3)) = pass(&te, &mut n_outer, &mut step) {
                if c3 < config.outer_tol {
                    theta = t3;
                    converged = true;
                    break 'outer;
                }
                if c3 < c1 {
                    theta = t3;
                    continue;
                }
            }
        }
        theta = t2;
    }

    let hazard = problem.hazard(&theta)?;
    let loglik = problem.loglik(&theta, &hazard);
    if !loglik.is_finite() {
        return Err(Error::FitFailed("final log-likelihood is not finite".into()));
    }
    Ok(FitResult {
        theta,
        hazard,
        loglik,
        converged,
        n_outer,
        weights_used: weights.clone(),
        first_stage: None,
        start_failures,
        tau_bar,
    })
}

/// Resolves the weight scheme for `data`.
pub fn resolve_weights(data: &Dataset, scheme: &WeightScheme) -> Result<(WeightVector, Option<FirstStageInfo>)> {
    match scheme {
        WeightScheme::Naive => Ok((WeightVector::ones(data.n()), None)),
        WeightScheme::Given(w) => {
            if w.len() != data.n() {
                return Err(Error::LengthMismatch {
                    what: "weights",
                    got: w.len(),
                    expected: data.n(),
                });
            }
            Ok((w.clone(), None))
        }
        WeightScheme::Proposed(cfg) => {
            let fs = estimate_kappa(data, cfg)?;
            let info = FirstStageInfo {
                h1: fs.h1,
                h2: fs.h2,
                bounds: fs.bounds,
            };
            Ok((fs.weights, Some(info)))
        }
    }
}

/// Weights per `options.weights`, then [`maximize`].
pub fn fit(data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    let (weights, info) = resolve_weights(data, &options.weights)?;
    let mut r = maximize(
        data,
        &weights,
        &options.optimizer,
        options.copula,
        options.censoring,
        options.tau_bar,
    )?;
    r.first_stage = info;
    Ok(r)
}

/// The two-step estimator: kernel weights, then weighted maximisation.
pub fn fit_two_step(
    data: &Dataset,
    kernel: &KernelConfig,
    optimizer: &OptimizerConfig,
    copula: CopulaFamily,
    censoring: CensoringFamily,
) -> Result<FitResult> {
    let opts = FitOptions {
        copula,
        censoring,
        weights: WeightScheme::Proposed(kernel.clone()),
        optimizer: optimizer.clone(),
        tau_bar: None,
    };
    fit(data, &opts)
}
