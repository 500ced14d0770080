//! First-stage complier weights: stratified Nadaraya–Watson estimates of
//! `π(x) = P(W = 1 | X = x)` and of `ν_{jlk}(y, x) = P(W = 1 | Y = y, X = x,
//! Δ1 = j, Δ2 = l, Z = k)`, combined into the complier probability `κ`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};

/// Univariate sixth-order Epanechnikov kernel
/// `k(t) = (105/256)(1 - t²)(33t⁴ - 30t² + 5)` on `|t| ≤ 1`. Integrates to
/// one with vanishing second and fourth moments.
#[inline]
pub fn kernel6_1d(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let t2 = t * t;
    105.0 / 256.0 * (1.0 - t2) * (33.0 * t2 * t2 - 30.0 * t2 + 5.0)
}

/// Product kernel over coordinates.
pub fn kernel6(u: &[f64]) -> f64 {
    u.iter().map(|&t| kernel6_1d(t)).product()
}

/// `{0.01, 0.02, …, 1.00}`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (1..=100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBounds {
    pub a_l: f64,
    pub a_u: f64,
}

impl TruncationBounds {
    pub fn new(a_l: f64, a_u: f64) -> Result<Self> {
        if !(0.0 < a_l && a_l < a_u && a_u < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation bounds need 0 < a_l < a_u < 1, got ({a_l}, {a_u})"
            )));
        }
        Ok(Self { a_l, a_u })
    }

    /// `a_l = 10/n`, `a_u = 1 - 10/n`.
    pub fn for_sample_size(n: usize) -> Result<Self> {
        let a = 10.0 / n as f64;
        Self::new(a, 1.0 - a)
    }
}

/// Bandwidths and truncation for the first stage. Missing values are chosen
/// by cross-validation (`fixed_h*`) or from the sample size (`a_l`, `a_u`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub bandwidth_grid: Vec<f64>,
    pub cv_folds: usize,
    pub fixed_h1: Option<f64>,
    pub fixed_h2: Option<f64>,
    pub a_l: Option<f64>,
    pub a_u: Option<f64>,
    pub cv_seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth_grid: default_bandwidth_grid(),
            cv_folds: 10,
            fixed_h1: None,
            fixed_h2: None,
            a_l: None,
            a_u: None,
            cv_seed: 0,
        }
    }
}

impl KernelConfig {
    pub fn fixed(h1: f64, h2: f64) -> Self {
        Self {
            fixed_h1: Some(h1),
            fixed_h2: Some(h2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |h: f64| !(h > 0.0 && h.is_finite());
        if self.fixed_h1.is_some_and(bad) || self.fixed_h2.is_some_and(bad) {
            return Err(Error::InvalidParameter("bandwidths must be positive".into()));
        }
        let needs_cv = self.fixed_h1.is_none() || self.fixed_h2.is_none();
        if needs_cv {
            if self.bandwidth_grid.is_empty() || self.bandwidth_grid.iter().any(|&h| bad(h)) {
                return Err(Error::InvalidParameter(
                    "bandwidth grid must be nonempty and positive".into(),
                ));
            }
            if self.cv_folds < 2 {
                return Err(Error::InvalidParameter("cv_folds must be at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, n: usize) -> Result<TruncationBounds> {
        let default = 10.0 / n as f64;
        TruncationBounds::new(self.a_l.unwrap_or(default), self.a_u.unwrap_or(1.0 - default))
    }
}

/// Per-observation weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub kappa: Vec<f64>,
}

impl WeightVector {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if let Some(i) = kappa.iter().position(|k| !(0.0..=1.0).contains(k)) {
            return Err(Error::InvalidParameter(format!(
                "weight {} at index {i} is outside [0, 1]",
                kappa[i]
            )));
        }
        Ok(Self { kappa })
    }

    /// `κ ≡ 1`: every observation treated as a complier.
    pub fn ones(n: usize) -> Self {
        Self { kappa: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kappa: self.kappa.iter().map(|k| k * c).collect(),
        }
    }
}

/// Everything the first stage decided, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub h1: f64,
    pub h2: f64,
    pub bounds: TruncationBounds,
    pub weights: WeightVector,
}

/// Discrete cell and continuous coordinates of each row, cached so the
/// kernel loops avoid re-deriving them.
struct Layout {
    cells: Vec<Vec<f64>>,
    cont: Vec<Vec<f64>>,
    w: Vec<f64>,
}

impl Layout {
    fn new(data: &Dataset) -> Self {
        let disc = data.schema().discrete_indices();
        let cont = data.schema().continuous_indices();
        let obs = data.observations();
        Self {
            cells: obs.iter().map(|o| disc.iter().map(|&j| o.x[j]).collect()).collect(),
            cont: obs.iter().map(|o| cont.iter().map(|&j| o.x[j]).collect()).collect(),
            w: obs.iter().map(|o| if o.w { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Nadaraya–Watson ratio over `rows` with the product kernel. Returns `None`
/// when no row is in the stratum or the kernel mass is exactly zero.
fn nw<'a, I>(rows: I, point: &[f64], coords: impl Fn(usize) -> &'a [f64], w: &[f64], h: f64) -> Option<f64>
where
    I: Iterator<Item = usize>,
{
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for i in rows {
        any = true;
        let c = coords(i);
        let mut k = 1.0;
        for (a, b) in c.iter().zip(point) {
            k *= kernel6_1d((a - b) / h);
            if k == 0.0 {
                break;
            }
        }
        num += k * w[i];
        den += k;
    }
    if !any || den == 0.0 {
        None
    } else {
        Some((num / den).clamp(0.0, 1.0))
    }
}

fn kernel_error(point: &[f64], reason: &str) -> Error {
    Error::Kernel {
        point: point.to_vec(),
        reason: reason.to_string(),
    }
}

/// `π̂(x)`: kernel regression of `W` on the continuous covariates among rows
/// sharing `x`'s discrete covariates. Clamped to `[0, 1]`.
pub fn estimate_pi(x: &[f64], data: &Dataset, h1: f64) -> Result<f64> {
    let lay = Layout::new(data);
    let schema = data.schema();
    let cell: Vec<f64> = schema.discrete_indices().iter().map(|&j| x[j]).collect();
    let xc: Vec<f64> = schema.continuous_indices().iter().map(|&j| x[j]).collect();
    pi_at(&lay, &cell, &xc, h1, 0..data.n()).ok_or_else(|| kernel_error(x, "empty stratum or zero kernel mass"))
}

fn pi_at(lay: &Layout, cell: &[f64], xc: &[f64], h: f64, rows: impl Iterator<Item = usize>) -> Option<f64> {
    nw(rows.filter(|&i| lay.cells[i] == cell), xc, |i| &lay.cont[i], &lay.w, h)
}

/// Stratum key `(Δ1, Δ2, Z)`.
fn jlk(o: &Observation) -> (bool, bool, bool) {
    (o.delta1, o.delta2, o.z)
}

/// `(y, x_c)` coordinates used by the ν regression.
fn r_coords(data: &Dataset, lay: &Layout) -> Vec<Vec<f64>> {
    data.observations()
        .iter()
        .zip(&lay.cont)
        .map(|(o, c)| {
            let mut r = Vec::with_capacity(c.len() + 1);
            r.push(o.y);
            r.extend_from_slice(c);
            r
        })
        .collect()
}

/// `ν̂_{jlk}(y, x)`: kernel regression of `W` on `(Y, X_c)` within the
/// stratum `Δ1 = j, Δ2 = l, Z = k` and `x`'s discrete cell. Clamped to
/// `[0, 1]`.
///
/// When that stratum is empty, the `(j, l, k)` restriction is dropped, and if
/// the discrete cell is empty too, all rows are used.
pub fn estimate_nu(y: f64, x: &[f64], j: bool, l: bool, k: bool, data: &Dataset, h2: f64) -> Result<f64> {
    let lay = Layout::new(data);
    let schema = data.schema();
    let cell: Vec<f64> = schema.discrete_indices().iter().map(|&c| x[c]).collect();
    let mut r = vec![y];
    r.extend(schema.continuous_indices().iter().map(|&c| x[c]));
    let rc = r_coords(data, &lay);
    let strata: Vec<(bool, bool, bool)> = data.observations().iter().map(jlk).collect();
    nu_at(&lay, &rc, &strata, &cell, &r, (j, l, k), h2, &(0..data.n()).collect::<Vec<_>>())
        .ok_or_else(|| kernel_error(&r, "zero kernel mass in every fallback stratum"))
}

#[allow(clippy::too_many_arguments)]
fn nu_at(
    lay: &Layout,
    rc: &[Vec<f64>],
    strata: &[(bool, bool, bool)],
    cell: &[f64],
    r: &[f64],
    key: (bool, bool, bool),
    h: f64,
    rows: &[usize],
) -> Option<f64> {
    let coords = |i: usize| rc[i].as_slice();
    let in_cell = |i: &usize| lay.cells[*i] == cell;
    nw(
        rows.iter().copied().filter(|i| in_cell(i) && strata[*i] == key),
        r,
        coords,
        &lay.w,
        h,
    )
    .or_else(|| nw(rows.iter().copied().filter(in_cell), r, coords, &lay.w, h))
    .or_else(|| nw(rows.iter().copied(), r, coords, &lay.w, h))
}

/// `κ̂ = 1 - Z(1 - ν̂)/(1 - π̂) - (1 - Z)ν̂/π̂` with `π̂` clamped into the
/// truncation bounds, then `κ̃ = min(max(κ̂, a_l), a_u)`.
pub fn kappa_formula(z: bool, pi: f64, nu: f64, bounds: TruncationBounds) -> f64 {
    let pi = pi.clamp(bounds.a_l, bounds.a_u);
    let k = if z { 1.0 - (1.0 - nu) / (1.0 - pi) } else { 1.0 - nu / pi };
    k.clamp(bounds.a_l, bounds.a_u)
}

/// Computes `κ̃` for every row with the given bandwidths.
pub fn kappa_with_bandwidths(data: &Dataset, h1: f64, h2: f64, bounds: TruncationBounds) -> Result<WeightVector> {
    let lay = Layout::new(data);
    let rc = r_coords(data, &lay);
    let strata: Vec<(bool, bool, bool)> = data.observations().iter().map(jlk).collect();
    let all: Vec<usize> = (0..data.n()).collect();
    let kappa = data
        .observations()
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            let pi = pi_at(&lay, &lay.cells[i], &lay.cont[i], h1, 0..data.n())
                .ok_or_else(|| kernel_error(&o.x, "pi: empty stratum or zero kernel mass"))?;
            let nu = nu_at(&lay, &rc, &strata, &lay.cells[i], &rc[i], strata[i], h2, &all)
                .ok_or_else(|| kernel_error(&rc[i], "nu: zero kernel mass"))?;
            Ok(kappa_formula(o.z, pi, nu, bounds))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightVector { kappa })
}

/// Runs the first stage: bandwidth choice (fixed or cross-validated) and
/// truncated `κ̃`.
pub fn estimate_kappa(data: &Dataset, config: &KernelConfig) -> Result<FirstStage> {
    config.validate()?;
    let bounds = config.bounds(data.n())?;
    let (h1, h2) = match (config.fixed_h1, config.fixed_h2) {
        (Some(a), Some(b)) => (a, b),
        (f1, f2) => {
            let cv = cross_validate_bandwidths(data, &config.bandwidth_grid, config.cv_folds, config.cv_seed)?;
            (f1.unwrap_or(cv.0), f2.unwrap_or(cv.1))
        }
    };
    let weights = kappa_with_bandwidths(data, h1, h2, bounds)?;
    Ok(FirstStage { h1, h2, bounds, weights })
}

/// Out-of-fold squared error of `W` for every bandwidth in `grid`.
///
/// `candidates(i)` lists the training rows eligible to predict row `i`
/// (its stratum, restricted to other folds) and `coords` the kernel
/// coordinates. A held-out row with no kernel mass is predicted as 1/2, so
/// bandwidths too small to reach across folds are not rewarded with the
/// stratum mean.
fn cv_losses<'a>(
    grid: &[f64],
    n: usize,
    coords: &(dyn Fn(usize) -> &'a [f64] + Sync),
    candidates: &(dyn Fn(usize) -> Vec<usize> + Sync),
    w: &[f64],
) -> Vec<f64> {
    let hmax = grid.iter().copied().fold(0.0, f64::max);
    let per_row: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let cand = candidates(i);
            let p = coords(i);
            // neighbours within the largest bandwidth, sorted by sup-distance
            let mut nb: Vec<(f64, usize)> = cand
                .iter()
                .filter_map(|&j| {
                    let d = coords(j).iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    (d < hmax).then_some((d, j))
                })
                .collect();
            nb.sort_by(|a, b| a.0.total_cmp(&b.0));
            grid.iter()
                .map(|&h| {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(d, j) in &nb {
                        if d >= h {
                            break;
                        }
                        let k: f64 = coords(j).iter().zip(p).map(|(a, b)| kernel6_1d((a - b) / h)).product();
                        num += k * w[j];
                        den += k;
                    }
                    let pred = if den == 0.0 { 0.5 } else { (num / den).clamp(0.0, 1.0) };
                    (w[i] - pred).powi(2)
                })
                .collect()
        })
        .collect();
    (0..grid.len()).map(|g| per_row.iter().map(|r| r[g]).sum::<f64>() / n as f64).collect()
}

/// Index of the smallest loss, preferring the larger bandwidth on ties.
fn argmin_prefer_large(grid: &[f64], losses: &[f64]) -> f64 {
    let mut best = 0;
    for g in 1..grid.len() {
        let better = losses[g] < losses[best] || (losses[g] == losses[best] && grid[g] > grid[best]);
        if better {
            best = g;
        }
    }
    grid[best]
}

/// Cross-validated bandwidths with their loss curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub pi_loss: Vec<f64>,
    pub nu_loss: Vec<f64>,
    pub h1: f64,
    pub h2: f64,
}

/// Seeded `folds`-fold assignment.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

pub fn cross_validate_report(data: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter("cv_folds must be at least 2".into()));
    }
    let n = data.n();
    let lay = Layout::new(data);
    let rc = r_coords(data, &lay);
    let strata: Vec<(bool, bool, bool)> = data.observations().iter().map(jlk).collect();
    let fold = fold_assignment(n, folds, seed);

    let pi_cand = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| fold[j] != fold[i] && lay.cells[j] == lay.cells[i]).collect()
    };
    let pi_coords = |i: usize| lay.cont[i].as_slice();
    let pi_loss = cv_losses(grid, n, &pi_coords, &pi_cand, &lay.w);

    let nu_cand = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| fold[j] != fold[i] && lay.cells[j] == lay.cells[i] && strata[j] == strata[i])
            .collect()
    };
    let nu_coords = |i: usize| rc[i].as_slice();
    let nu_loss = cv_losses(grid, n, &nu_coords, &nu_cand, &lay.w);

    Ok(CvReport {
        grid: grid.to_vec(),
        h1: argmin_prefer_large(grid, &pi_loss),
        h2: argmin_prefer_large(grid, &nu_loss),
        pi_loss,
        nu_loss,
    })
}

/// `(h1, h2)` minimising out-of-fold squared error of `W`, selected
/// separately for `π̂` and `ν̂`.
pub fn cross_validate_bandwidths(data: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<(f64, f64)> {
    let r = cross_validate_report(data, grid, folds, seed)?;
    Ok((r.h1, r.h2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CovariateSchema;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel6_1d(0.0), 525.0 / 256.0);
        assert_eq!(kernel6_1d(1.0), 0.0);
        assert_eq!(kernel6_1d(-1.3), 0.0);
        assert_abs_diff_eq!(kernel6(&[0.0, 0.0]), (525.0f64 / 256.0).powi(2));
    }

    fn obs(y: f64, d1: bool, z: bool, w: bool, x: Vec<f64>) -> Observation {
        Observation {
            y,
            delta1: d1,
            delta2: false,
            z,
            w,
            x,
        }
    }

    #[test]
    fn constant_response_and_degenerate_kernel() {
        let schema: CovariateSchema = "x:continuous".parse().unwrap();
        let d = Dataset::new(
            vec![
                obs(1.0, true, true, true, vec![0.5]),
                obs(2.0, true, false, false, vec![0.5]),
                obs(3.0, false, true, true, vec![0.5]),
                obs(4.0, false, true, true, vec![0.5]),
            ],
            schema,
        )
        .unwrap();
        assert_abs_diff_eq!(estimate_pi(&[0.5], &d, 0.1).unwrap(), 0.75);
        assert!(estimate_pi(&[0.9], &d, 0.1).is_err());
    }

    #[test]
    fn kappa_formula_cases() {
        let b = TruncationBounds::new(0.01, 0.99).unwrap();
        assert_eq!(kappa_formula(true, 0.5, 1.0, b), 0.99);
        assert_eq!(kappa_formula(false, 0.5, 0.0, b), 0.99);
        assert_eq!(kappa_formula(true, 0.5, 0.0, b), 0.01);
        assert_abs_diff_eq!(kappa_formula(true, 0.5, 0.8, b), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn argmin_ties_go_large() {
        assert_eq!(argmin_prefer_large(&[0.1, 0.2, 0.3], &[1.0, 0.5, 0.5]), 0.3);
        assert_eq!(argmin_prefer_large(&[0.3, 0.2, 0.1], &[0.5, 0.5, 1.0]), 0.3);
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(95, 10, 4);
        assert_eq!(a, fold_assignment(95, 10, 4));
        for f in 0..10 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 9 || c == 10);
        }
    }
}
