//! Kendall's tau as a function of the association parameter, and back.

use std::f64::consts::PI;

use statrs::function::gamma::digamma;

use super::{Copula, CopulaError, CopulaFamily};
use crate::numeric::{brent, cached_gauss_legendre, gauss_legendre};

/// First Debye function `D1(x) = x⁻¹ ∫₀ˣ t/(eᵗ-1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    if x <= 2.0 {
        let (nodes, weights) = cached_gauss_legendre(20);
        let half = x / 2.0;
        let s: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(t, w)| {
                let t = half * (t + 1.0);
                w * t / t.exp_m1()
            })
            .sum();
        return s * half / x;
    }
    let mut tail = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-kf * x).exp() * (x / kf + 1.0 / (kf * kf));
        tail += term;
        if term < 1e-18 * tail {
            break;
        }
    }
    (PI * PI / 6.0 - tail) / x
}

pub(crate) fn frank_tau(xi: f64) -> f64 {
    if xi.abs() < 1e-3 {
        return xi / 9.0 - xi.powi(3) / 900.0;
    }
    1.0 - 4.0 * (1.0 - debye1(xi)) / xi
}

const JOE_NEAR_TWO: f64 = 1e-3;

pub(crate) fn joe_tau(xi: f64) -> f64 {
    let at_two = 2.0 - PI * PI / 6.0;
    let d = xi - 2.0;
    if d.abs() < JOE_NEAR_TWO {
        let h = JOE_NEAR_TWO;
        let lo = joe_tau_raw(2.0 - h);
        let hi = joe_tau_raw(2.0 + h);
        let slope = (hi - lo) / (2.0 * h);
        let curv = (hi - 2.0 * at_two + lo) / (h * h);
        return at_two + slope * d + 0.5 * curv * d * d;
    }
    joe_tau_raw(xi)
}

fn joe_tau_raw(xi: f64) -> f64 {
    1.0 + 2.0 / (2.0 - xi) * (digamma(2.0) - digamma(2.0 / xi + 1.0))
}

pub(crate) fn tau_of(family: CopulaFamily, xi: f64) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Frank => frank_tau(xi),
        CopulaFamily::Gumbel => 1.0 - 1.0 / xi,
        CopulaFamily::Joe => {
            if xi == 1.0 {
                0.0
            } else {
                joe_tau(xi)
            }
        }
        CopulaFamily::Gaussian => 2.0 / PI * xi.asin(),
        CopulaFamily::Clayton180 => xi / (xi + 2.0),
        CopulaFamily::Clayton90 | CopulaFamily::Clayton270 => -xi / (xi + 2.0),
    }
}

pub(crate) fn xi_of(family: CopulaFamily, tau: f64) -> Result<f64, CopulaError> {
    let (lo, hi) = family.tau_range();
    if family == CopulaFamily::Independence {
        return if tau == 0.0 {
            Ok(0.0)
        } else {
            Err(CopulaError::InadmissibleTau { family, tau })
        };
    }
    let closed_lo = matches!(family, CopulaFamily::Gumbel | CopulaFamily::Joe);
    let ok = tau.is_finite()
        && tau < hi
        && (tau > lo || (closed_lo && tau == lo));
    if !ok {
        return Err(CopulaError::InadmissibleTau { family, tau });
    }
    Ok(match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Gumbel => 1.0 / (1.0 - tau),
        CopulaFamily::Gaussian => (PI * tau / 2.0).sin(),
        CopulaFamily::Clayton90 | CopulaFamily::Clayton180 | CopulaFamily::Clayton270 => {
            2.0 * tau.abs() / (1.0 - tau.abs())
        }
        CopulaFamily::Frank => {
            if tau == 0.0 {
                return Ok(0.0);
            }
            let target = tau.abs();
            let mut hi = 1.0;
            while frank_tau(hi) < target {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(CopulaError::InadmissibleTau { family, tau });
                }
            }
            let f = |x: f64| frank_tau(x) - target;
            let xi = brent(f, 0.0, hi, -target, f(hi), 1e-14, 300)
                .map_err(|_| CopulaError::InadmissibleTau { family, tau })?;
            xi.copysign(tau)
        }
        CopulaFamily::Joe => {
            if tau == 0.0 {
                return Ok(1.0);
            }
            let mut hi = 2.0;
            while joe_tau(hi) < tau {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(CopulaError::InadmissibleTau { family, tau });
                }
            }
            let f = |x: f64| joe_tau(x) - tau;
            brent(f, 1.0, hi, -tau, f(hi), 1e-14, 300)
                .map_err(|_| CopulaError::InadmissibleTau { family, tau })?
        }
    })
}

/// Kendall's tau by two-dimensional quadrature of
/// `τ = 1 - 4 ∫∫ ∂C/∂u · ∂C/∂v du dv`, which is the integral
/// `4 ∫∫ C dC - 1` after integrating by parts and has a bounded integrand.
///
/// The rule works on the logit scale, where tail-dependent families have
/// transitions of width O(1) near the corners.
pub fn tau_by_quadrature(copula: &Copula) -> f64 {
    let (nodes, weights) = composite_rule(quadrature_panel_width(copula));
    let mut acc = 0.0;
    for (u, wu) in nodes.iter().zip(&weights) {
        let mut inner = 0.0;
        for (v, wv) in nodes.iter().zip(&weights) {
            inner += wv * copula.partial_u(*u, *v) * copula.partial_v(*u, *v);
        }
        acc += wu * inner;
    }
    1.0 - 4.0 * acc
}

/// Narrower panels for strong dependence, where the mass concentrates on a
/// band of width about `1/ξ` around a curve.
fn quadrature_panel_width(copula: &Copula) -> f64 {
    let t = copula.tau().abs();
    if t < 0.5 {
        0.5
    } else if t < 0.8 {
        0.25
    } else {
        0.1
    }
}

/// Composite 8-point Gauss–Legendre rule on the logit scale over
/// `[-30, 30]`, mapped back to `(0, 1)` with the Jacobian folded into the
/// weights.
pub(crate) fn composite_rule(width: f64) -> (Vec<f64>, Vec<f64>) {
    const L: f64 = 30.0;
    let panels = (2.0 * L / width).ceil() as usize;
    let h = 2.0 * L / panels as f64;
    let (gx, gw) = gauss_legendre(8);
    let mut nodes = Vec::with_capacity(panels * 8);
    let mut weights = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let a = -L + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            let s = a + 0.5 * h * (x + 1.0);
            let u = 1.0 / (1.0 + (-s).exp());
            nodes.push(u);
            weights.push(0.5 * h * w * u * (1.0 - u));
        }
    }
    (nodes, weights)
}
