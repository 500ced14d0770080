//! Data-generating process for the simulation designs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::design::{GroupParams, SimDesign};
use crate::copula::Copula;
use crate::data::{CovariateKind, CovariateSchema, Dataset, Observation};
use crate::error::Result;
use crate::margins::{ph_quantile, CensoringModel, PhParams};
use crate::numeric::task_rng;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Complier,
    AlwaysTaker,
    NeverTaker,
}

/// A generated sample with the latent quantities kept for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub data: Dataset,
    pub groups: Vec<Group>,
    /// Event times before censoring.
    pub latent_t: Vec<f64>,
    /// Dependent censoring times.
    pub latent_c: Vec<f64>,
    pub admin: Vec<f64>,
}

impl SimSample {
    /// `1{G = co}`.
    pub fn oracle_weights(&self) -> WeightVector {
        WeightVector {
            kappa: self
                .groups
                .iter()
                .map(|g| if *g == Group::Complier { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Rows at `indices`, repeats allowed.
    pub fn select(&self, indices: &[usize]) -> Result<SimSample> {
        Ok(SimSample {
            data: self.data.select(indices)?,
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            latent_t: indices.iter().map(|&i| self.latent_t[i]).collect(),
            latent_c: indices.iter().map(|&i| self.latent_c[i]).collect(),
            admin: indices.iter().map(|&i| self.admin[i]).collect(),
        })
    }
}

/// `x1:discrete,x2:continuous`.
pub fn sim_schema() -> CovariateSchema {
    CovariateSchema::new(
        vec!["x1".into(), "x2".into()],
        vec![CovariateKind::Discrete, CovariateKind::Continuous],
    )
    .expect("static schema is valid")
}

struct GroupModel {
    params: GroupParams,
    ph: PhParams,
    cens: CensoringModel,
    copula: Copula,
}

impl GroupModel {
    fn new(p: &GroupParams, design: &SimDesign) -> Result<Self> {
        Ok(Self {
            params: p.clone(),
            ph: PhParams::new(p.alpha, p.beta.clone()),
            cens: CensoringModel::new(design.censoring, p.eta.clone(), p.nu)?,
            copula: Copula::from_tau(design.copula, p.tau)?,
        })
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Draws `design.n` rows from the stream `task_rng(seed, 0)`.
pub fn generate_dataset(design: &SimDesign, seed: u64) -> Result<SimSample> {
    generate_with_rng(design, &mut task_rng(seed, 0))
}

pub fn generate_with_rng<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<SimSample> {
    design.validate()?;
    let co = GroupModel::new(&design.params_co, design)?;
    let nc = GroupModel::new(&design.params_nc, design)?;
    let eps = Normal::new(0.0, 0.25).expect("valid normal");
    let p = design.complier_prob;
    let n = design.n;
    let mut obs = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    let mut latent_t = Vec::with_capacity(n);
    let mut latent_c = Vec::with_capacity(n);
    let mut admin = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let x2: f64 = rng.random();
        let u: f64 = rng.random();
        let g = if u < p {
            Group::Complier
        } else if u < p + (1.0 - p) / 2.0 {
            Group::AlwaysTaker
        } else {
            Group::NeverTaker
        };
        let pi = logistic(0.5 * x1 + x2 + 2.0 * x1 * x2 + eps.sample(rng));
        let w = rng.random::<f64>() < pi;
        let z = match g {
            Group::Complier => w,
            Group::AlwaysTaker => true,
            Group::NeverTaker => false,
        };
        let model = if g == Group::Complier { &co } else { &nc };
        let x = vec![x1, x2];
        let (uu, vv) = model.copula.sample_pair(rng)?;
        let t = ph_quantile(uu, z, &x, &model.ph, &model.params.baseline);
        let c = model.cens.quantile(vv, z, &x);
        let a = design.admin_upper * (1.0 - rng.random::<f64>());
        let y = t.min(c).min(a);
        obs.push(Observation {
            y,
            delta1: t <= c && t <= a,
            delta2: c < t && c <= a,
            z,
            w,
            x,
        });
        groups.push(g);
        latent_t.push(t);
        latent_c.push(c);
        admin.push(a);
    }
    Ok(SimSample {
        data: Dataset::new(obs, sim_schema())?,
        groups,
        latent_t,
        latent_c,
        admin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sample() {
        let mut d = SimDesign::preset("lowdep").unwrap();
        d.n = 200;
        let a = generate_dataset(&d, 7).unwrap();
        let b = generate_dataset(&d, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, generate_dataset(&d, 8).unwrap().data);
    }

    #[test]
    fn treatment_follows_group() {
        let mut d = SimDesign::preset("lowdep").unwrap();
        d.n = 2000;
        let s = generate_dataset(&d, 1).unwrap();
        for (o, g) in s.data.observations().iter().zip(&s.groups) {
            match g {
                Group::Complier => assert_eq!(o.z, o.w),
                Group::AlwaysTaker => assert!(o.z),
                Group::NeverTaker => assert!(!o.z),
            }
        }
    }

    #[test]
    fn indicators_match_minimum() {
        let mut d = SimDesign::preset("lowdep-clayton90-lognormal").unwrap();
        d.n = 500;
        let s = generate_dataset(&d, 3).unwrap();
        for (i, o) in s.data.observations().iter().enumerate() {
            let (t, c, a) = (s.latent_t[i], s.latent_c[i], s.admin[i]);
            assert_eq!(o.y, t.min(c).min(a));
            assert_eq!(o.delta1, o.y == t);
            if !o.delta1 {
                assert_eq!(o.delta2, o.y == c);
            }
        }
    }
}
