//! Monte Carlo summaries: bias, ESD, RMSE and warp-speed coverage.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, quantile_sorted, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMetrics {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Sample standard deviation with `R - 1` in the denominator.
    pub esd: f64,
    /// `sqrt(mean((θ̂_r - θ*)²))`.
    pub rmse: f64,
    pub cr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub parameters: Vec<ParameterMetrics>,
    /// Successful replicates.
    pub replications: usize,
    pub failures: usize,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<&ParameterMetrics> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// One row per parameter: `parameter,truth,bias,esd,rmse,cr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,truth,bias,esd,rmse,cr\n");
        for p in &self.parameters {
            let cr = p.cr.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{},{}", p.name, p.truth, p.bias, p.esd, p.rmse, cr);
        }
        s
    }
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn check_rows(rows: &[Vec<f64>], width: usize, what: &'static str) -> Result<()> {
    for r in rows {
        if r.len() != width {
            return Err(Error::LengthMismatch {
                what,
                got: r.len(),
                expected: width,
            });
        }
    }
    Ok(())
}

/// Summaries of replicate `estimates` against `truth`. With `bootstrap`
/// present (one resample estimate per replicate) the coverage rate is
/// filled in by [`coverage_warp_speed`].
pub fn summarize(
    names: &[String],
    truth: &[f64],
    estimates: &[Vec<f64>],
    bootstrap: Option<&[Vec<f64>]>,
    failures: usize,
) -> Result<MetricsReport> {
    if names.len() != truth.len() {
        return Err(Error::LengthMismatch {
            what: "truth",
            got: truth.len(),
            expected: names.len(),
        });
    }
    if estimates.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "metrics need at least two replicates, got {}",
            estimates.len()
        )));
    }
    check_rows(estimates, truth.len(), "estimate")?;
    let cr = bootstrap
        .map(|b| coverage_warp_speed(estimates, b, truth))
        .transpose()?;
    let parameters = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = column(estimates, j);
            let m = mean(&col);
            let mse = col.iter().map(|v| (v - truth[j]).powi(2)).sum::<f64>() / col.len() as f64;
            ParameterMetrics {
                name: name.clone(),
                truth: truth[j],
                mean: m,
                bias: m - truth[j],
                esd: sample_sd(&col),
                rmse: mse.sqrt(),
                cr: cr.as_ref().map(|c| c[j]),
            }
        })
        .collect();
    Ok(MetricsReport {
        parameters,
        replications: estimates.len(),
        failures,
    })
}

/// Warp-speed coverage: for each parameter the pooled deviations
/// `|θ̂_b,r - θ̂_r|` give a 95% radius `q`, and the coverage rate is the
/// share of replicates with `|θ̂_r - θ*| <= q`.
pub fn coverage_warp_speed(estimates: &[Vec<f64>], bootstrap: &[Vec<f64>], truth: &[f64]) -> Result<Vec<f64>> {
    if estimates.len() != bootstrap.len() {
        return Err(Error::LengthMismatch {
            what: "bootstrap estimates",
            got: bootstrap.len(),
            expected: estimates.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("coverage needs at least one replicate".into()));
    }
    check_rows(estimates, truth.len(), "estimate")?;
    check_rows(bootstrap, truth.len(), "bootstrap estimate")?;
    if estimates.len() < 20 {
        log::warn!(
            "warp-speed coverage from {} replicates; the 95% quantile is unstable",
            estimates.len()
        );
    }
    let r = estimates.len() as f64;
    Ok((0..truth.len())
        .map(|j| {
            let mut dev: Vec<f64> = estimates
                .iter()
                .zip(bootstrap)
                .map(|(e, b)| (b[j] - e[j]).abs())
                .collect();
            dev.sort_by(f64::total_cmp);
            let q = quantile_sorted(&dev, 0.95);
            estimates.iter().filter(|e| (e[j] - truth[j]).abs() <= q).count() as f64 / r
        })
        .collect())
}
