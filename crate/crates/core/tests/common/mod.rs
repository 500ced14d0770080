#![allow(dead_code)]

use cchr_core::data::{CovariateSchema, Dataset, Observation};
use cchr_core::{CensoringFamily, CensoringModel, Copula, PhParams, Theta};
use rand::Rng;

pub fn schema() -> CovariateSchema {
    "x1:discrete,x2:continuous".parse().unwrap()
}

pub fn lowdep_theta(copula: Copula) -> Theta {
    Theta::new(
        PhParams::new(-0.6, vec![1.0, 0.9]),
        CensoringModel::new(CensoringFamily::Weibull, vec![1.5, -0.8, -2.0, 0.9], 1.2).unwrap(),
        copula,
    )
    .unwrap()
}

/// Rows with follow-up times on a 0.01 grid, so ties occur.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize) -> Dataset {
    let obs = (0..n)
        .map(|_| {
            let y = ((-rng.random::<f64>().ln() * 100.0).ceil() / 100.0).max(0.01);
            let r: f64 = rng.random();
            let z = rng.random_bool(0.5);
            Observation {
                y,
                delta1: r < 0.6,
                delta2: (0.6..0.9).contains(&r),
                z,
                w: z,
                x: vec![if rng.random_bool(0.5) { 1.0 } else { 0.0 }, rng.random()],
            }
        })
        .collect();
    Dataset::new(obs, schema()).unwrap()
}

pub fn random_theta<R: Rng>(rng: &mut R, copula: Copula) -> Theta {
    let mut u = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
    Theta::new(
        PhParams::new(u(-1.0, 1.0), vec![u(-1.0, 1.0), u(-1.0, 1.0)]),
        CensoringModel::new(
            CensoringFamily::Weibull,
            vec![u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0)],
            u(0.5, 2.0),
        )
        .unwrap(),
        copula,
    )
    .unwrap()
}

/// Weighted Breslow increments `Σ κ dI / Σ_{Y ≥ t} κ e^{lp}` at the distinct
/// event times, computed directly from the rows.
pub fn breslow(data: &Dataset, kappa: &[f64], ph: &PhParams) -> (Vec<f64>, Vec<f64>) {
    let obs = data.observations();
    let mut times: Vec<f64> = obs
        .iter()
        .zip(kappa)
        .filter(|(o, k)| o.delta1 && **k > 0.0)
        .map(|(o, _)| o.y)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let inc = times
        .iter()
        .map(|&t| {
            let num: f64 = obs.iter().zip(kappa).filter(|(o, _)| o.delta1 && o.y == t).map(|(_, k)| k).sum();
            let den: f64 = obs
                .iter()
                .zip(kappa)
                .filter(|(o, _)| o.y >= t)
                .map(|(o, k)| k * ph.linear_predictor(o.z, &o.x).exp())
                .sum();
            num / den
        })
        .collect();
    (times, inc)
}

/// Low-dependence design with the independence copula and every unit a
/// complier, so the naive fit is the efficient one.
pub fn independence_design(n: usize) -> cchr_core::sim::SimDesign {
    let mut d = cchr_core::sim::SimDesign::preset("lowdep").unwrap();
    d.copula = cchr_core::CopulaFamily::Independence;
    d.params_co.tau = 0.0;
    d.params_nc.tau = 0.0;
    d.complier_prob = 1.0;
    d.n = n;
    d.estimator = cchr_core::sim::Estimator::Naive;
    d
}

/// Cox partial likelihood with Breslow ties, maximised by Newton.
/// Covariates are `(z, x…)`.
pub fn cox_newton(data: &Dataset) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let obs = data.observations();
    let p = 1 + data.schema().m();
    let v: Vec<DVector<f64>> = obs
        .iter()
        .map(|o| {
            let mut r = vec![if o.z { 1.0 } else { 0.0 }];
            r.extend(&o.x);
            DVector::from_vec(r)
        })
        .collect();
    let mut times: Vec<f64> = obs.iter().filter(|o| o.delta1).map(|o| o.y).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut b = DVector::zeros(p);
    for _ in 0..100 {
        let e: Vec<f64> = v.iter().map(|vi| vi.dot(&b).exp()).collect();
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for &t in &times {
            let mut s0 = 0.0;
            let mut s1 = DVector::zeros(p);
            let mut s2 = DMatrix::zeros(p, p);
            let mut d = 0.0;
            for (i, o) in obs.iter().enumerate() {
                if o.y >= t {
                    s0 += e[i];
                    s1 += &v[i] * e[i];
                    s2 += &v[i] * v[i].transpose() * e[i];
                }
                if o.delta1 && o.y == t {
                    d += 1.0;
                    g += &v[i];
                }
            }
            g -= &s1 * (d / s0);
            h -= (s2 / s0 - &s1 * s1.transpose() / (s0 * s0)) * d;
        }
        let step = h.lu().solve(&g).unwrap();
        b -= &step;
        if step.amax() < 1e-12 {
            break;
        }
    }
    b.as_slice().to_vec()
}

/// Weibull regression MLE for `C` with `Δ2` as the event, by Newton on
/// `(η, ln ν)`. Location covariates are `(1, z, x…)`.
pub fn weibull_newton(data: &Dataset) -> (Vec<f64>, f64) {
    use nalgebra::{DMatrix, DVector};
    let obs = data.observations();
    let p = 2 + data.schema().m();
    let xt: Vec<DVector<f64>> = obs
        .iter()
        .map(|o| {
            let mut r = vec![1.0, if o.z { 1.0 } else { 0.0 }];
            r.extend(&o.x);
            DVector::from_vec(r)
        })
        .collect();
    let ly: Vec<f64> = obs.iter().map(|o| o.y.ln()).collect();
    let loglik = |eta: &DVector<f64>, s: f64| -> f64 {
        let nu = s.exp();
        obs.iter()
            .enumerate()
            .map(|(i, o)| {
                let w = (ly[i] - xt[i].dot(eta)) / nu;
                let d = if o.delta2 { 1.0 } else { 0.0 };
                d * (-s + w - ly[i]) - w.exp()
            })
            .sum()
    };
    let mut eta = DVector::zeros(p);
    eta[0] = ly.iter().sum::<f64>() / ly.len() as f64;
    let mut s: f64 = 0.0;
    for _ in 0..200 {
        let nu = s.exp();
        let mut g = DVector::zeros(p + 1);
        let mut h = DMatrix::zeros(p + 1, p + 1);
        for (i, o) in obs.iter().enumerate() {
            let w = (ly[i] - xt[i].dot(&eta)) / nu;
            let ew = w.exp();
            let d = if o.delta2 { 1.0 } else { 0.0 };
            let x = &xt[i] / nu;
            for a in 0..p {
                g[a] -= (d - ew) * x[a];
                for b in 0..p {
                    h[(a, b)] -= ew * x[a] * x[b];
                }
                let c = (-w * ew + d - ew) * x[a];
                h[(a, p)] += c;
                h[(p, a)] += c;
            }
            g[p] += -d - (d - ew) * w;
            h[(p, p)] += -w * w * ew + (d - ew) * w;
        }
        if g.amax() < 1e-9 {
            break;
        }
        // Levenberg-damped Newton ascent
        let mut lambda = 0.0;
        let neg = -h;
        let step = loop {
            let m = &neg + DMatrix::identity(p + 1, p + 1) * lambda;
            if let Some(c) = m.cholesky() {
                break c.solve(&g);
            }
            lambda = if lambda == 0.0 { 1e-3 } else { lambda * 10.0 };
        };
        let base = loglik(&eta, s);
        let mut t = 1.0;
        while t > 1e-12 {
            let e2 = &eta + step.rows(0, p) * t;
            let s2 = s + step[p] * t;
            if loglik(&e2, s2) >= base {
                eta = e2;
                s = s2;
                break;
            }
            t *= 0.5;
        }
    }
    (eta.as_slice().to_vec(), s.exp())
}
