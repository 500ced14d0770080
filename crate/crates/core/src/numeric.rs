//! Small numerical kernels shared across modules: standard normal
//! functions, bracketed root finding, Gauss–Legendre rules and an
//! `O(n log n)` Kendall tau.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Inverse of the standard normal CDF. Returns `±inf` at the endpoints.
#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Halley step against the accurate CDF
    let e = norm_cdf(x) - p;
    let u = e * (0.5 * x * x + LN_SQRT_2PI).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracketError {
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Brent's method on `[lo, hi]` given the function values at the ends.
///
/// Passing the end values lets callers supply analytic limits where the
/// function itself cannot be evaluated (e.g. an h-function at 0 or 1).
pub fn brent<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, RootBracketError>
where
    F: FnMut(f64) -> f64,
{
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(RootBracketError { f_lo, f_hi });
    }
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, f_lo, f_hi);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = (n + 1) / 2;
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Cached rules for the few sizes used in hot paths.
pub(crate) fn cached_gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULE6: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static RULE12: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static RULE20: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        6 => RULE6.get_or_init(|| gauss_legendre(6)),
        12 => RULE12.get_or_init(|| gauss_legendre(12)),
        20 => RULE20.get_or_init(|| gauss_legendre(20)),
        _ => panic!("no cached Gauss-Legendre rule of size {n}"),
    }
}

/// Kendall's tau-a of paired samples, counting discordant pairs with a
/// merge sort (Knight's algorithm). Intended for continuous data; ties
/// count as neither concordant nor discordant in `x` order only.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    1.0 - 2.0 * discordant as f64 / pairs
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator; 0 for fewer than
/// two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() as f64 - 1.0)).sqrt()
}

/// Independent random stream for task `index` of a run seeded by `seed`.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
