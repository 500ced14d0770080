//! Monte Carlo runs and parameter sweeps.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{Estimator, SimDesign};
use super::dgp::{generate_with_rng, SimSample};
use super::metrics::{summarize, MetricsReport};
use crate::error::{Error, Result};
use crate::fit::{fit, FitOptions, WeightScheme};
use crate::numeric::task_rng;

/// One successful replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub estimate: Vec<f64>,
    /// Estimate on a single bootstrap resample, when warp-speed is on.
    pub bootstrap: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub report: MetricsReport,
    pub replicates: Vec<ReplicateRecord>,
}

impl McResult {
    /// `replicate,<names...>` with one row per successful replicate.
    pub fn replicates_csv(&self) -> String {
        let mut s = format!("replicate,{}\n", self.names.join(","));
        for r in &self.replicates {
            let vals: Vec<String> = r.estimate.iter().map(f64::to_string).collect();
            s.push_str(&format!("{},{}\n", r.index, vals.join(",")));
        }
        s
    }
}

/// Fits `sample` with the design's fit families and estimator variant and
/// returns `θ̂` on the natural scale.
pub fn fit_replicate(design: &SimDesign, sample: &SimSample, optimizer_seed: u64) -> Result<Vec<f64>> {
    let weights = match design.estimator {
        Estimator::Naive => WeightScheme::Naive,
        Estimator::Oracle => WeightScheme::Given(sample.oracle_weights()),
        Estimator::Proposed => WeightScheme::Proposed(design.kernel.clone()),
    };
    let mut opts = FitOptions::new(design.fit_copula(), design.fit_censoring(), weights);
    opts.optimizer = design.optimizer.clone();
    opts.optimizer.seed = optimizer_seed;
    Ok(fit(&sample.data, &opts)?.theta.to_vec())
}

/// Replicates with the built-in estimator variants.
pub fn run_mc(design: &SimDesign, seed: u64) -> Result<McResult> {
    run_mc_with(design, seed, |s, k| fit_replicate(design, s, k))
}

/// Replicates with a custom estimator `(sample, seed) -> θ̂`. Replicate `r`
/// draws everything from `task_rng(seed, r)`, so results do not depend on
/// scheduling.
pub fn run_mc_with<F>(design: &SimDesign, seed: u64, estimator: F) -> Result<McResult>
where
    F: Fn(&SimSample, u64) -> Result<Vec<f64>> + Sync,
{
    design.validate()?;
    if design.replications < 2 {
        return Err(Error::InvalidParameter("run_mc needs at least two replications".into()));
    }
    let names = design.parameter_names();
    let truth = design.truth();
    let outcomes: Vec<Option<ReplicateRecord>> = (0..design.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            let mut run = || -> Result<ReplicateRecord> {
                let sample = generate_with_rng(design, &mut rng)?;
                let estimate = estimator(&sample, rng.random())?;
                let bootstrap = if design.warp_speed {
                    let n = sample.data.n();
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    Some(estimator(&sample.select(&idx)?, rng.random())?)
                } else {
                    None
                };
                Ok(ReplicateRecord {
                    index: r,
                    estimate,
                    bootstrap,
                })
            };
            match run() {
                Ok(rec) => Some(rec),
                Err(e) => {
                    log::warn!("replicate {r} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let replicates: Vec<ReplicateRecord> = outcomes.into_iter().flatten().collect();
    let estimates: Vec<Vec<f64>> = replicates.iter().map(|r| r.estimate.clone()).collect();
    let boot: Option<Vec<Vec<f64>>> = replicates.iter().map(|r| r.bootstrap.clone()).collect();
    let report = summarize(&names, &truth, &estimates, boot.as_deref(), failures)?;
    Ok(McResult {
        names,
        truth,
        report,
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "axis", content = "values")]
pub enum SweepAxis {
    ComplierRatio(Vec<f64>),
    SampleSize(Vec<usize>),
}

impl SweepAxis {
    pub fn complier_ratio() -> Self {
        SweepAxis::ComplierRatio(vec![0.1, 0.2, 1.0 / 3.0, 2.0 / 3.0, 1.0])
    }

    pub fn sample_size() -> Self {
        SweepAxis::SampleSize(vec![100, 250, 500, 1000, 1500])
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::ComplierRatio(_) => "complier_ratio",
            SweepAxis::SampleSize(_) => "sample_size",
        }
    }

    fn points(&self) -> Vec<f64> {
        match self {
            SweepAxis::ComplierRatio(v) => v.clone(),
            SweepAxis::SampleSize(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    fn apply(&self, design: &mut SimDesign, value: f64) {
        match self {
            SweepAxis::ComplierRatio(_) => design.complier_prob = value,
            SweepAxis::SampleSize(_) => design.n = value as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub estimator: Estimator,
    pub report: MetricsReport,
}

/// One Monte Carlo run per axis value and estimator. All estimators at a
/// given axis value see the same datasets.
pub fn sweep(template: &SimDesign, axis: &SweepAxis, estimators: &[Estimator], seed: u64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for value in axis.points() {
        for &est in estimators {
            let mut d = template.clone();
            axis.apply(&mut d, value);
            d.estimator = est;
            let mc = run_mc(&d, seed)?;
            rows.push(SweepRow {
                axis: axis.name().to_string(),
                value,
                estimator: est,
                report: mc.report,
            });
        }
    }
    Ok(rows)
}

/// Plot-ready rows `axis,value,estimator,parameter,bias,esd,rmse`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("axis,value,estimator,parameter,bias,esd,rmse\n");
    for r in rows {
        for p in &r.report.parameters {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.axis, r.value, r.estimator, p.name, p.bias, p.esd, p.rmse
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_estimator_gives_zero_metrics() {
        let mut d = SimDesign::preset("lowdep").unwrap();
        d.n = 50;
        d.replications = 5;
        let truth = d.truth();
        let mc = run_mc_with(&d, 1, |_, _| Ok(truth.clone())).unwrap();
        for p in &mc.report.parameters {
            assert_eq!((p.bias, p.esd, p.rmse), (0.0, 0.0, 0.0));
        }
        assert_eq!(mc.replicates.len(), 5);
    }

    #[test]
    fn failures_are_counted() {
        let mut d = SimDesign::preset("lowdep").unwrap();
        d.n = 30;
        d.replications = 6;
        let truth = d.truth();
        let mc = run_mc_with(&d, 1, |s, _| {
            if s.data.observations()[0].z {
                Err(Error::FitFailed("synthetic".into()))
            } else {
                Ok(truth.clone())
            }
        })
        .unwrap();
        assert!(mc.report.failures > 0);
        assert_eq!(mc.report.failures + mc.report.replications, 6);
        assert_eq!(mc.replicates_csv().lines().count(), mc.report.replications + 1);
    }

    #[test]
    fn sweep_echoes_axis_values() {
        let mut d = SimDesign::preset("lowdep").unwrap();
        d.n = 40;
        d.replications = 2;
        d.optimizer.n_starts = 1;
        d.optimizer.max_outer_iters = 2;
        d.optimizer.start_max_evals = 50;
        d.optimizer.inner_max_evals = 50;
        let axis = SweepAxis::SampleSize(vec![40, 60]);
        let rows = sweep(&d, &axis, &[Estimator::Naive], 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![40.0, 60.0]);
        assert!(sweep_csv(&rows).starts_with("axis,value"));
    }
}
