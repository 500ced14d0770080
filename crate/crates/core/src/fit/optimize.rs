//! Nelder–Mead simplex minimisation with dimension-adaptive coefficients.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when every vertex is within `xtol` (sup norm) of the best one …
    pub xtol: f64,
    /// … and the objective spread is below `ftol`.
    pub ftol: f64,
    /// Edge length of the initial simplex along each axis.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            xtol: 1e-8,
            ftol: 1e-10,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as
/// `+∞`, so the simplex simply retreats from them.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NelderMeadResult {
            x: vec![],
            f: v,
            evals,
            converged: true,
        };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for j in 0..n {
        let mut v = x0.to_vec();
        v[j] += opts.step;
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    let mut converged = false;

    loop {
        // order vertices by objective
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        fv = idx.iter().map(|&i| fv[i]).collect();

        let spread_x = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread_f = fv[n] - fv[0];
        if spread_x <= opts.xtol && spread_f.abs() <= opts.ftol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < fv[0] {
            let xe = along(alpha * gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let xc = along(alpha * rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(fv[n]) {
            simplex[n] = xc;
            fv[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + sigma * (*x - b);
            }
            fv[i] = eval(&simplex[i], &mut evals);
        }
    }
    NelderMeadResult {
        x: simplex[0].clone(),
        f: fv[0],
        evals,
        converged,
    }
}
