//! Per-observation log-likelihood contributions and their weighted sum.

use crate::copula::CopulaFamily;
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::hazard::{margin_terms, Prepared, StepHazard, Theta};
use crate::weights::WeightVector;

/// `ln(1e-300)`: contributions are floored here.
pub const LOG_FLOOR: f64 = -690.775_527_898_213_7;

#[inline]
fn floor(v: f64) -> f64 {
    if v.is_nan() {
        LOG_FLOOR
    } else {
        v.max(LOG_FLOOR)
    }
}

/// Contribution of one row given `Λ(y)`, `ΔΛ(y)` and the linear
/// predictors. Unfloored.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn contrib_raw(
    theta: &Theta,
    d1: bool,
    d2: bool,
    ln_y: f64,
    lp: f64,
    loc: f64,
    cum: f64,
    jump: f64,
) -> f64 {
    let m = margin_terms(cum, lp.exp(), ln_y, loc, &theta.cens);
    if theta.copula.family == CopulaFamily::Independence {
        // separable: ζ1 = F_C, ζ2 = F_T, S = S_T S_C
        return if d1 {
            jump.ln() + lp - m.cum + m.sc.ln()
        } else if d2 {
            theta.cens.ln_density_at(ln_y, loc) - m.cum
        } else {
            m.sc.ln() - m.cum
        };
    }
    if d1 {
        jump.ln() + lp - m.cum + theta.copula.partial_u_complement(m.ft, m.fc).ln()
    } else if d2 {
        theta.cens.ln_density_at(ln_y, loc) + theta.copula.partial_v_complement(m.ft, m.fc).ln()
    } else {
        theta.copula.survival_from(m.ft, m.st, m.fc, m.sc).ln()
    }
}

/// Log-likelihood contribution of `o`:
///
/// * event (`Δ1 = 1`): `ln ΔΛ(Y) + lp - Λ(Y)e^{lp} + ln{1 - ζ1(F_T, F_C)}`
/// * dependent censoring (`Δ2 = 1`): `ln f_C(Y) + ln{1 - ζ2(F_T, F_C)}`
/// * administrative censoring: `ln S(Y)`
///
/// floored at `ln(1e-300)`.
pub fn loglik_contrib(o: &Observation, theta: &Theta, hazard: &StepHazard) -> Result<f64> {
    let lp = theta.ph.linear_predictor(o.z, &o.x);
    let loc = theta.cens.location(o.z, &o.x);
    let v = contrib_raw(theta, o.delta1, o.delta2, o.y.ln(), lp, loc, hazard.eval(o.y), hazard.jump_at(o.y));
    if v.is_nan() {
        return Err(Error::NonFiniteContribution { index: 0 });
    }
    Ok(v.max(LOG_FLOOR))
}

/// `Σ κ_i ℓ_i(θ, Λ)`.
pub fn weighted_loglik(data: &Dataset, weights: &WeightVector, theta: &Theta, hazard: &StepHazard) -> Result<f64> {
    if weights.len() != data.n() {
        return Err(Error::LengthMismatch {
            what: "weights",
            got: weights.len(),
            expected: data.n(),
        });
    }
    let mut total = 0.0;
    for (i, (o, &k)) in data.observations().iter().zip(&weights.kappa).enumerate() {
        if k == 0.0 {
            continue;
        }
        let c = loglik_contrib(o, theta, hazard).map_err(|_| Error::NonFiniteContribution { index: i })?;
        total += k * c;
    }
    Ok(total)
}

/// Hazard values at each row's follow-up time, cached between objective
/// evaluations that share a hazard.
pub(crate) struct HazardAtRows {
    pub cum: Vec<f64>,
    pub jump: Vec<f64>,
    /// Rows beyond `τ̄` are evaluated as administratively censored at `τ̄`.
    pub ln_y: Vec<f64>,
    pub d1: Vec<bool>,
    pub d2: Vec<bool>,
}

impl HazardAtRows {
    pub fn new(prep: &Prepared, hazard: &StepHazard, tau_bar: f64) -> Self {
        let n = prep.n();
        let mut out = Self {
            cum: Vec::with_capacity(n),
            jump: Vec::with_capacity(n),
            ln_y: Vec::with_capacity(n),
            d1: Vec::with_capacity(n),
            d2: Vec::with_capacity(n),
        };
        let ln_tau = tau_bar.ln();
        for i in 0..n {
            if prep.y[i] > tau_bar {
                out.cum.push(hazard.eval(tau_bar));
                out.jump.push(0.0);
                out.ln_y.push(ln_tau);
                out.d1.push(false);
                out.d2.push(false);
            } else {
                out.cum.push(hazard.eval(prep.y[i]));
                out.jump.push(hazard.jump_at(prep.y[i]));
                out.ln_y.push(prep.ln_y[i]);
                out.d1.push(prep.d1[i]);
                out.d2.push(prep.d2[i]);
            }
        }
        out
    }
}

/// Floored weighted log-likelihood used by the optimiser.
pub(crate) fn objective(prep: &Prepared, kappa: &[f64], theta: &Theta, hz: &HazardAtRows) -> f64 {
    let mut total = 0.0;
    for i in 0..prep.n() {
        let k = kappa[i];
        if k == 0.0 {
            continue;
        }
        let lp = theta.ph.linear_predictor(prep.z[i], &prep.x[i]);
        let loc = theta.cens.location(prep.z[i], &prep.x[i]);
        let c = contrib_raw(theta, hz.d1[i], hz.d2[i], hz.ln_y[i], lp, loc, hz.cum[i], hz.jump[i]);
        total += k * floor(c);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Copula;
    use crate::margins::{CensoringFamily, CensoringModel, PhParams};
    use approx::assert_abs_diff_eq;

    fn theta(copula: Copula) -> Theta {
        Theta::new(
            PhParams::new(-0.6, vec![1.0, 0.9]),
            CensoringModel::new(CensoringFamily::Weibull, vec![1.5, -0.8, -2.0, 0.9], 1.2).unwrap(),
            copula,
        )
        .unwrap()
    }

    fn hazard() -> StepHazard {
        StepHazard::new(vec![0.5, 1.0, 1.5], vec![0.1, 0.2, 0.15]).unwrap()
    }

    fn obs(y: f64, d1: bool, d2: bool, z: bool, x: Vec<f64>) -> Observation {
        Observation {
            y,
            delta1: d1,
            delta2: d2,
            z,
            w: z,
            x,
        }
    }

    #[test]
    fn frank_contributions_match_extended_precision() {
        // tests/oracles/direct_eval.py
        let th = theta(Copula::new(CopulaFamily::Frank, 2.371_929_518_915_690_2).unwrap());
        let h = hazard();
        let cases = [
            (obs(1.0, true, false, true, vec![1.0, 0.5]), -3.629_403_484_181_983_588),
            (obs(1.2, false, true, false, vec![0.0, 0.3]), -2.561_379_297_406_368_743_3),
            (obs(2.0, false, false, true, vec![1.0, 0.9]), -3.524_016_560_418_111_684_9),
        ];
        for (o, want) in cases {
            assert_abs_diff_eq!(loglik_contrib(&o, &th, &h).unwrap(), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn independence_reductions() {
        let th = theta(Copula::independence());
        let h = hazard();
        let x = vec![1.0, 0.5];
        let lp = th.ph.linear_predictor(true, &x);
        let fc = th.cens.cdf(2.0, true, &x).unwrap();
        let ft = 1.0 - (-h.eval(2.0) * lp.exp()).exp();
        let o = obs(2.0, false, false, true, x.clone());
        assert_abs_diff_eq!(
            loglik_contrib(&o, &th, &h).unwrap(),
            (1.0 - ft).ln() + (1.0 - fc).ln(),
            epsilon = 1e-13
        );
        let fc1 = th.cens.cdf(1.0, true, &x).unwrap();
        let o = obs(1.0, true, false, true, x);
        let want = 0.2f64.ln() + lp - 0.3 * lp.exp() + (1.0 - fc1).ln();
        assert_abs_diff_eq!(loglik_contrib(&o, &th, &h).unwrap(), want, epsilon = 1e-13);
    }
}
