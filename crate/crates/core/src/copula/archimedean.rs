//! Unrotated Frank, Gumbel, Joe and Clayton kernels.
//!
//! Every family here is exchangeable, so only `h(u, v) = ∂C/∂u` is provided;
//! the other partial is `h(v, u)`. `hc` is `1 - h` computed without
//! cancellation where the algebra allows it.

const FRANK_TAYLOR: f64 = 1e-5;

pub(crate) fn frank_cdf(xi: f64, u: f64, v: f64) -> f64 {
    if xi.abs() < FRANK_TAYLOR {
        let g = u * v * (1.0 - u) * (1.0 - v);
        return u * v + 0.5 * xi * g + xi * xi / 12.0 * g * (1.0 - 2.0 * u) * (1.0 - 2.0 * v);
    }
    let a = (-xi * u).exp_m1();
    let b = (-xi * v).exp_m1();
    let d = (-xi).exp_m1();
    let r = a * b / d;
    if r.abs() < 0.5 {
        -r.ln_1p() / xi
    } else {
        -(frank_den(xi, u, v) / d).ln() / xi
    }
}

/// `d + ab` written as two terms of equal sign.
#[inline]
fn frank_den(xi: f64, u: f64, v: f64) -> f64 {
    (-xi * u).exp() * (-xi * v).exp_m1() + (-xi * v).exp() * (-xi * (1.0 - v)).exp_m1()
}

pub(crate) fn frank_h(xi: f64, u: f64, v: f64) -> f64 {
    if xi.abs() < FRANK_TAYLOR {
        let vv = v * (1.0 - v);
        return v
            + 0.5 * xi * (1.0 - 2.0 * u) * vv
            + xi * xi / 12.0 * (1.0 - 6.0 * u + 6.0 * u * u) * vv * (1.0 - 2.0 * v);
    }
    (-xi * u).exp() * (-xi * v).exp_m1() / frank_den(xi, u, v)
}

pub(crate) fn frank_hc(xi: f64, u: f64, v: f64) -> f64 {
    if xi.abs() < FRANK_TAYLOR {
        return 1.0 - frank_h(xi, u, v);
    }
    (-xi * v).exp() * (-xi * (1.0 - v)).exp_m1() / frank_den(xi, u, v)
}

pub(crate) fn frank_density(xi: f64, u: f64, v: f64) -> f64 {
    if xi.abs() < FRANK_TAYLOR {
        return 1.0
            + 0.5 * xi * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
            + xi * xi / 12.0 * (1.0 - 6.0 * u + 6.0 * u * u) * (1.0 - 6.0 * v + 6.0 * v * v);
    }
    let d = (-xi).exp_m1();
    let den = frank_den(xi, u, v);
    -xi * d * (-xi * (u + v)).exp() / (den * den)
}

pub(crate) fn gumbel_cdf(xi: f64, u: f64, v: f64) -> f64 {
    let x = -u.ln();
    let y = -v.ln();
    (-(x.powf(xi) + y.powf(xi)).powf(1.0 / xi)).exp()
}

fn gumbel_parts(xi: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
    let x = -u.ln();
    let y = -v.ln();
    // A = (x^ξ + y^ξ)^{1/ξ}, scaled by max(x,y) to keep powers finite
    let m = x.max(y);
    let a = m * ((x / m).powf(xi) + (y / m).powf(xi)).powf(1.0 / xi);
    (x, y, a, (-a).exp())
}

pub(crate) fn gumbel_h(xi: f64, u: f64, v: f64) -> f64 {
    let (x, _, a, c) = gumbel_parts(xi, u, v);
    c * (x / a).powf(xi - 1.0) / u
}

pub(crate) fn gumbel_density(xi: f64, u: f64, v: f64) -> f64 {
    let (x, y, a, c) = gumbel_parts(xi, u, v);
    c / (u * v) * (x / a).powf(xi - 1.0) * (y / a).powf(xi - 1.0) * (a + xi - 1.0) / a
}

pub(crate) fn joe_cdf(xi: f64, u: f64, v: f64) -> f64 {
    1.0 - joe_s(xi, u, v).powf(1.0 / xi)
}

/// `P(U > u, V > v) = ū + v̄ - S^{1/ξ}`, taking `ū` and `v̄` directly.
pub(crate) fn joe_survival(xi: f64, ub: f64, vb: f64) -> f64 {
    let p = ub.powf(xi);
    let q = vb.powf(xi);
    ub + vb - (p + q - p * q).powf(1.0 / xi)
}

fn joe_s(xi: f64, u: f64, v: f64) -> f64 {
    let p = (1.0 - u).powf(xi);
    let q = (1.0 - v).powf(xi);
    p + q - p * q
}

pub(crate) fn joe_h(xi: f64, u: f64, v: f64) -> f64 {
    let q = (1.0 - v).powf(xi);
    let s = joe_s(xi, u, v);
    s.powf(1.0 / xi - 1.0) * (1.0 - u).powf(xi - 1.0) * (1.0 - q)
}

pub(crate) fn joe_density(xi: f64, u: f64, v: f64) -> f64 {
    let s = joe_s(xi, u, v);
    s.powf(1.0 / xi - 2.0) * (1.0 - u).powf(xi - 1.0) * (1.0 - v).powf(xi - 1.0) * (xi - 1.0 + s)
}

/// `ln(u^{-ξ} + v^{-ξ} - 1)` without overflow and without losing the
/// small-ξ limit `-ξ(ln u + ln v)`.
fn clayton_ls(xi: f64, lu: f64, lv: f64) -> f64 {
    let a = -xi * lu;
    let b = -xi * lv;
    let m = a.max(b);
    if m > 30.0 {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    } else {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    }
}

pub(crate) fn clayton_cdf(xi: f64, u: f64, v: f64) -> f64 {
    let ls = clayton_ls(xi, u.ln(), v.ln());
    (-ls / xi).exp()
}

pub(crate) fn clayton_h(xi: f64, u: f64, v: f64) -> f64 {
    let lu = u.ln();
    let ls = clayton_ls(xi, lu, v.ln());
    ((-xi - 1.0) * lu + (-1.0 / xi - 1.0) * ls).exp()
}

/// `1 - ∂C/∂u` as `-expm1(-(1 + 1/ξ) ln1p(t))` with
/// `t = u^ξ (v^{-ξ} - 1)`, accurate when `∂C/∂u` is close to one.
pub(crate) fn clayton_hc(xi: f64, u: f64, v: f64) -> f64 {
    let e = -xi * v.ln();
    let ln_em1 = if e > 30.0 { e + (-(-e).exp()).ln_1p() } else { e.exp_m1().ln() };
    let lt = xi * u.ln() + ln_em1;
    let l1p = if lt > 30.0 { lt + (-lt).exp().ln_1p() } else { lt.exp().ln_1p() };
    -(-(1.0 + 1.0 / xi) * l1p).exp_m1()
}

pub(crate) fn clayton_density(xi: f64, u: f64, v: f64) -> f64 {
    let lu = u.ln();
    let lv = v.ln();
    let ls = clayton_ls(xi, lu, lv);
    (1.0 + xi) * ((-xi - 1.0) * (lu + lv) + (-1.0 / xi - 2.0) * ls).exp()
}
