mod common;

use cchr_core::data::{Dataset, Observation};
use cchr_core::hazard::{eval_hazard, fit_step_hazard, psi};
use cchr_core::numeric::task_rng;
use cchr_core::{Copula, CopulaFamily, WeightVector};
use common::{breslow, random_dataset, random_theta, schema, lowdep_theta};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[test]
fn independence_recursion_is_weighted_breslow() {
    for seed in 0..20 {
        let mut rng = task_rng(seed, 0);
        let data = random_dataset(&mut rng, 200);
        let theta = random_theta(&mut rng, Copula::independence());
        let kappa: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let w = WeightVector::new(kappa.clone()).unwrap();
        let h = fit_step_hazard(&theta, &data, &w, None).unwrap();
        let (times, inc) = breslow(&data, &kappa, &theta.ph);
        assert_eq!(h.times(), &times[..]);
        for (a, b) in h.increments().iter().zip(&inc) {
            assert!(rel_close(*a, *b, 1e-12), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn three_rows_full_risk_set() {
    let row = |y: f64, d1: bool| Observation {
        y,
        delta1: d1,
        delta2: false,
        z: false,
        w: false,
        x: vec![0.0, 0.0],
    };
    let data = Dataset::new(vec![row(2.0, false), row(1.0, true), row(3.0, false)], schema()).unwrap();
    let mut theta = lowdep_theta(Copula::independence());
    theta.ph.alpha = 0.0;
    theta.ph.beta = vec![0.0, 0.0];
    let h = fit_step_hazard(&theta, &data, &WeightVector::ones(3), None).unwrap();
    assert_eq!(h.times(), &[1.0]);
    assert!((h.increments()[0] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(eval_hazard(&h, 0.0), 0.0);
    assert_eq!(eval_hazard(&h, 5.0), h.total());
}

#[test]
fn doubling_weights_leaves_increments_unchanged() {
    let mut rng = task_rng(3, 0);
    let data = random_dataset(&mut rng, 300);
    let theta = lowdep_theta(Copula::from_tau(CopulaFamily::Frank, 0.25).unwrap());
    let kappa: Vec<f64> = (0..300).map(|_| 0.5 * rng.random::<f64>()).collect();
    let w = WeightVector::new(kappa).unwrap();
    let a = fit_step_hazard(&theta, &data, &w, None).unwrap();
    let b = fit_step_hazard(&theta, &data, &w.scaled(2.0), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn row_order_does_not_matter() {
    let mut rng = task_rng(4, 0);
    let data = random_dataset(&mut rng, 300);
    let theta = lowdep_theta(Copula::from_tau(CopulaFamily::Clayton180, 0.3).unwrap());
    let kappa: Vec<f64> = (0..300).map(|_| rng.random()).collect();
    let mut perm: Vec<usize> = (0..300).collect();
    perm.shuffle(&mut rng);
    let shuffled = data.select(&perm).unwrap();
    let kp = WeightVector::new(perm.iter().map(|&i| kappa[i]).collect()).unwrap();
    let a = fit_step_hazard(&theta, &data, &WeightVector::new(kappa).unwrap(), None).unwrap();
    let b = fit_step_hazard(&theta, &shuffled, &kp, None).unwrap();
    assert_eq!(a.times(), b.times());
    for (x, y) in a.increments().iter().zip(b.increments()) {
        assert!(rel_close(*x, *y, 1e-12));
    }
}

#[test]
fn recursion_is_self_consistent() {
    let mut rng = task_rng(5, 0);
    let data = random_dataset(&mut rng, 250);
    let theta = lowdep_theta(Copula::from_tau(CopulaFamily::Gumbel, 0.4).unwrap());
    let kappa: Vec<f64> = (0..250).map(|_| rng.random()).collect();
    let h = fit_step_hazard(&theta, &data, &WeightVector::new(kappa.clone()).unwrap(), None).unwrap();
    let obs = data.observations();
    let mut prev = 0.0;
    for (&t, &d) in h.times().iter().zip(h.increments()) {
        let lam = eval_hazard(&h, prev);
        let num: f64 = obs.iter().zip(&kappa).filter(|(o, _)| o.delta1 && o.y == t).map(|(_, k)| k).sum();
        let den: f64 = obs
            .iter()
            .zip(&kappa)
            .filter(|(o, _)| o.y >= t)
            .map(|(o, k)| k * psi(&theta, lam, t, o.z, &o.x).unwrap().exp())
            .sum();
        assert!(rel_close(num / den, d, 1e-12), "t={t}");
        prev = t;
    }
}

#[test]
fn events_beyond_window_are_dropped() {
    let mut rng = task_rng(6, 0);
    let data = random_dataset(&mut rng, 200);
    let theta = lowdep_theta(Copula::independence());
    let w = WeightVector::ones(200);
    let full = fit_step_hazard(&theta, &data, &w, None).unwrap();
    let cut = fit_step_hazard(&theta, &data, &w, Some(0.5)).unwrap();
    assert!(cut.times().iter().all(|&t| t <= 0.5));
    let k = cut.len();
    assert_eq!(cut.times(), &full.times()[..k]);
    assert_eq!(cut.increments(), &full.increments()[..k]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn independence_psi_is_linear_predictor(
        alpha in -2.0..2.0f64, b1 in -2.0..2.0f64, b2 in -2.0..2.0f64,
        eta0 in -2.0..2.0f64, nu in 0.3..3.0f64,
        y in 0.01..10.0f64, lam in 0.0..3.0f64,
        z in any::<bool>(), x1 in 0..2u8, x2 in 0.0..1.0f64,
    ) {
        let mut th = lowdep_theta(Copula::independence());
        th.ph.alpha = alpha;
        th.ph.beta = vec![b1, b2];
        th.cens.eta[0] = eta0;
        th.cens.nu = nu;
        let x = [x1 as f64, x2];
        let lp = th.ph.linear_predictor(z, &x);
        let v = psi(&th, lam, y, z, &x).unwrap();
        prop_assert!(rel_close(v.exp(), lp.exp(), 1e-12), "{} vs {}", v.exp(), lp.exp());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn increments_are_positive(seed in 0u64..1000, fam in 0usize..7) {
        let family = CopulaFamily::PARAMETRIC[fam];
        let (lo, hi) = family.search_tau_range();
        let mut rng = task_rng(seed, 1);
        let data = random_dataset(&mut rng, 150);
        let tau = lo + (hi - lo) * (0.2 + 0.6 * rng.random::<f64>());
        let theta = lowdep_theta(Copula::from_tau(family, tau).unwrap());
        let kappa: Vec<f64> = (0..150).map(|_| rng.random()).collect();
        let h = fit_step_hazard(&theta, &data, &WeightVector::new(kappa).unwrap(), Some(1.5)).unwrap();
        prop_assert!(h.increments().iter().all(|&d| d > 0.0));
    }
}
