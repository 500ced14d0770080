use cchr_core::margins::ph_cdf;
use cchr_core::numeric::{kendall_tau, task_rng};
use cchr_core::sim::{
    coverage_warp_speed, generate_dataset, run_mc_with, summarize, Group, SimDesign, SimSample, PRESETS,
};
use cchr_core::{CensoringModel, PhParams};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn sample(preset: &str, n: usize, seed: u64) -> (SimDesign, SimSample) {
    let mut d = SimDesign::preset(preset).unwrap();
    d.n = n;
    let s = generate_dataset(&d, seed).unwrap();
    (d, s)
}

/// Kolmogorov–Smirnov distance of `u` from the uniform law.
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max)
}

/// Probability-integral transforms of the latent complier `(T, C)`.
fn complier_pits(d: &SimDesign, s: &SimSample) -> (Vec<f64>, Vec<f64>) {
    let p = &d.params_co;
    let ph = PhParams::new(p.alpha, p.beta.clone());
    let cens = CensoringModel::new(d.censoring, p.eta.clone(), p.nu).unwrap();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (i, o) in s.data.observations().iter().enumerate() {
        if s.groups[i] == Group::Complier {
            u.push(ph_cdf(s.latent_t[i], o.z, &o.x, &ph, &p.baseline));
            v.push(cens.cdf(s.latent_c[i], o.z, &o.x).unwrap());
        }
    }
    (u, v)
}

#[test]
fn complier_share_and_group_rules() {
    let (_, s) = sample("lowdep", 10_000, 1);
    let share = s.groups.iter().filter(|g| **g == Group::Complier).count() as f64 / 1e4;
    assert!((share - 2.0 / 3.0).abs() < 0.02, "{share}");
    for (o, g) in s.data.observations().iter().zip(&s.groups) {
        match g {
            Group::Complier => assert_eq!(o.z, o.w),
            Group::AlwaysTaker => assert!(o.z),
            Group::NeverTaker => assert!(!o.z),
        }
    }
}

#[test]
fn censoring_rates_match_the_design() {
    for preset in PRESETS.iter().filter(|p| p.starts_with("lowdep")) {
        let (_, s) = sample(preset, 10_000, 2);
        let obs = s.data.observations();
        let dep = obs.iter().filter(|o| o.delta2).count() as f64 / 1e4;
        let adm = obs.iter().filter(|o| o.is_admin_censored()).count() as f64 / 1e4;
        assert!((0.25..=0.45).contains(&dep), "{preset}: dependent {dep}");
        assert!((0.03..=0.12).contains(&adm), "{preset}: administrative {adm}");
    }
}

#[test]
fn complier_margins_and_dependence() {
    for preset in PRESETS {
        let (d, s) = sample(preset, 150_000, 3);
        let (u, v) = complier_pits(&d, &s);
        assert!(u.len() > 95_000);
        let tau = kendall_tau(&u, &v);
        assert!((tau - d.params_co.tau).abs() < 0.02, "{preset}: tau {tau}");
        let ks_t = ks_uniform(u);
        let ks_c = ks_uniform(v);
        assert!(ks_t < 0.02 && ks_c < 0.02, "{preset}: {ks_t} {ks_c}");
    }
}

#[test]
fn warp_speed_coverage_is_calibrated() {
    let mut rng = task_rng(4, 0);
    let truth = vec![0.3, -1.0];
    let mut est = Vec::new();
    let mut boot = Vec::new();
    for _ in 0..10_000 {
        let e: Vec<f64> = truth.iter().map(|t| t + rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = e.iter().map(|x| x + rng.sample::<f64, _>(StandardNormal)).collect();
        est.push(e);
        boot.push(b);
    }
    let cr = coverage_warp_speed(&est, &boot, &truth).unwrap();
    for c in &cr {
        assert!((c - 0.95).abs() <= 0.01, "{cr:?}");
    }
    let scale = |v: &[Vec<f64>], t: &[f64]| -> Vec<Vec<f64>> {
        v.iter().map(|r| r.iter().zip(t).map(|(x, t)| t + 3.5 * (x - t)).collect()).collect()
    };
    let cr2 = coverage_warp_speed(&scale(&est, &truth), &scale(&boot, &truth), &truth).unwrap();
    assert_eq!(cr, cr2);
}

#[test]
fn replicate_dump_and_reruns() {
    let mut d = SimDesign::preset("lowdep").unwrap();
    d.n = 200;
    d.replications = 12;
    let est = |s: &SimSample, seed: u64| -> cchr_core::Result<Vec<f64>> {
        if seed % 4 == 0 {
            return Err(cchr_core::Error::NoEvents);
        }
        let mut v = vec![0.0; 9];
        v[0] = s.data.observations()[0].y;
        Ok(v)
    };
    let a = run_mc_with(&d, 9, est).unwrap();
    let b = run_mc_with(&d, 9, est).unwrap();
    assert_eq!(a.report, b.report);
    let rows = a.replicates_csv().lines().count() - 1;
    assert_eq!(rows, d.replications - a.report.failures);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rmse_is_root_mean_squared_error(seed in 0u64..10_000, r in 2usize..60) {
        let mut rng = task_rng(seed, 0);
        let truth = vec![rng.random::<f64>(), -2.0];
        let est: Vec<Vec<f64>> = (0..r)
            .map(|_| truth.iter().map(|t| t + 0.3 * rng.sample::<f64, _>(StandardNormal) + 0.1).collect())
            .collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let rep = summarize(&names, &truth, &est, None, 0).unwrap();
        for (j, p) in rep.parameters.iter().enumerate() {
            let mse = est.iter().map(|e| (e[j] - truth[j]).powi(2)).sum::<f64>() / r as f64;
            prop_assert!((p.rmse - mse.sqrt()).abs() < 1e-12);
            let rf = r as f64;
            prop_assert!((p.rmse.powi(2) - (p.bias.powi(2) + p.esd.powi(2) * (rf - 1.0) / rf)).abs() < 1e-12);
        }
    }
}
