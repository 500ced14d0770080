//! Nonparametric bootstrap: resample rows, refit end to end.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, FitOptions, FitResult, Theta, WeightScheme};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hazard::parameter_names;
use crate::numeric::{sample_sd, task_rng};
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Requested resamples.
    pub b: usize,
    pub names: Vec<String>,
    /// Full-sample estimate on the natural scale.
    pub estimate: Vec<f64>,
    /// Successful resample estimates.
    pub estimates: Vec<Theta>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub nulls: Vec<f64>,
    pub failures: usize,
    /// Fewer than two successful resamples, so `se` is zero by convention.
    pub degenerate: bool,
    /// More than 5% of resamples failed.
    pub excessive_failures: bool,
}

/// Null values: 0 for every coefficient and for `τ`, 1 for `ν`.
pub fn default_nulls(names: &[String]) -> Vec<f64> {
    names.iter().map(|n| if n == "nu" { 1.0 } else { 0.0 }).collect()
}

/// `B⁻¹ Σ_b 1{|θ̂_b - θ̂| > |θ̂ - θ₀|}`.
pub fn bootstrap_p_value(estimate: f64, null: f64, draws: &[f64]) -> f64 {
    if draws.is_empty() {
        return f64::NAN;
    }
    let obs = (estimate - null).abs();
    draws.iter().filter(|d| (*d - estimate).abs() > obs).count() as f64 / draws.len() as f64
}

/// Fits the full sample, then bootstraps with `b` resamples.
pub fn bootstrap(data: &Dataset, options: &FitOptions, b: usize, seed: u64) -> Result<BootstrapResult> {
    let original = fit(data, options)?;
    bootstrap_from(data, options, &original, b, seed, None)
}

/// Bootstraps around an existing fit. Caller-supplied weights are resampled
/// with their rows; kernel weights are re-estimated on each resample.
pub fn bootstrap_from(
    data: &Dataset,
    options: &FitOptions,
    original: &FitResult,
    b: usize,
    seed: u64,
    nulls: Option<Vec<f64>>,
) -> Result<BootstrapResult> {
    if b == 0 {
        return Err(Error::InvalidParameter("bootstrap needs B >= 1".into()));
    }
    let names = parameter_names(data.schema().m(), options.copula);
    let nulls = nulls.unwrap_or_else(|| default_nulls(&names));
    if nulls.len() != names.len() {
        return Err(Error::LengthMismatch {
            what: "nulls",
            got: nulls.len(),
            expected: names.len(),
        });
    }
    let n = data.n();
    let draws: Vec<Option<Theta>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = data.select(&idx).ok()?;
            let mut opts = options.clone();
            opts.optimizer.seed = rng.random();
            if let WeightScheme::Given(w) = &options.weights {
                opts.weights = WeightScheme::Given(WeightVector {
                    kappa: idx.iter().map(|&i| w.kappa[i]).collect(),
                });
            }
            match fit(&sample, &opts) {
                Ok(f) => Some(f.theta),
                Err(e) => {
                    log::warn!("bootstrap resample {r} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let failures = draws.iter().filter(|d| d.is_none()).count();
    let estimates: Vec<Theta> = draws.into_iter().flatten().collect();
    let estimate = original.theta.to_vec();
    let columns: Vec<Vec<f64>> = (0..names.len())
        .map(|j| estimates.iter().map(|t| t.to_vec()[j]).collect())
        .collect();
    let degenerate = estimates.len() < 2;
    let se = columns
        .iter()
        .map(|c| if degenerate { 0.0 } else { sample_sd(c) })
        .collect();
    let p_values = columns
        .iter()
        .enumerate()
        .map(|(j, c)| bootstrap_p_value(estimate[j], nulls[j], c))
        .collect();
    let excessive_failures = failures as f64 > 0.05 * b as f64;
    if excessive_failures {
        log::warn!("{failures} of {b} bootstrap resamples failed");
    }
    Ok(BootstrapResult {
        b,
        names,
        estimate,
        estimates,
        se,
        p_values,
        nulls,
        failures,
        degenerate,
        excessive_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_arithmetic() {
        // |α̂_b - α̂| = {0.10, 0.25, 0.30, 0.15} against |α̂ - 0| = 0.2
        let draws = [0.3, 0.45, -0.1, 0.05];
        assert_eq!(bootstrap_p_value(0.2, 0.0, &draws), 0.5);
    }

    #[test]
    fn nulls_default_to_zero_except_scale() {
        let names: Vec<String> = ["alpha", "eta0", "nu", "tau"].iter().map(|s| s.to_string()).collect();
        assert_eq!(default_nulls(&names), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
