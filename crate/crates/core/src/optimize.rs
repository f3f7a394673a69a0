//! Small derivative-free optimisation kernels: Nelder–Mead, golden-section
//! search and bisection.
//!
//! The variational problems solved in this crate have at most a couple of
//! dozen parameters, so a careful dense implementation is all that is needed.

/// Options for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Maximum number of objective evaluations (over all internal restarts).
    pub max_evals: usize,
    /// Convergence when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Convergence when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Number of times the simplex is rebuilt around the incumbent after
    /// convergence (guards against premature collapse).
    pub rebuilds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 20_000, f_tol: 1e-13, x_tol: 1e-10, initial_step: 0.5, rebuilds: 3 }
    }
}

/// Outcome of a minimisation.
#[derive(Debug, Clone)]
pub struct Minimum {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub f: f64,
    /// Objective evaluations used.
    pub evals: usize,
    /// Whether the tolerance was met before the evaluation budget ran out.
    pub converged: bool,
}

/// Minimises `f` with the Nelder–Mead simplex method.
///
/// Uses the dimension-adaptive coefficients of Gao & Han, which behave better
/// than the textbook ones beyond a handful of dimensions.  Non-finite
/// objective values are treated as +∞, so infeasible regions can be signalled
/// by returning `f64::INFINITY` or `NaN`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut evals = 0usize;
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum { x: vec![], f: v, evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut converged = false;

    for round in 0..=opts.rebuilds {
        let step = if round == 0 { opts.initial_step } else { opts.initial_step * 0.1f64.powi(round as i32) };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        simplex.push(best_x.clone());
        values.push(best_f);
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += step;
            values.push(eval(&v, &mut evals));
            simplex.push(v);
        }
        let start_f = best_f;
        converged = false;
        while evals < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let diam = simplex[1..].iter().map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
            if (spread.is_finite() && spread <= opts.f_tol * (1.0 + values[0].abs())) || diam <= opts.x_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let shrunk: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + sigma * (x - b)).collect();
                        values[i] = eval(&shrunk, &mut evals);
                        simplex[i] = shrunk;
                    }
                }
            }
        }
        let (i_best, _) = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        if values[i_best] <= best_f {
            best_f = values[i_best];
            best_x = simplex[i_best].clone();
        }
        if evals >= opts.max_evals {
            break;
        }
        if round > 0 && start_f - best_f <= opts.f_tol * (1.0 + best_f.abs()) {
            break;
        }
    }
    Minimum { x: best_x, f: best_f, evals, converged }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
///
/// Returns `(argmax, max)`; stops when the bracket is shorter than `tol`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 300 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    let fa = f(a);
    let fb = f(b);
    let cands = [(c, fc), (d, fd), (a, fa), (b, fb)];
    cands.into_iter().fold((a, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
}

/// Bisection for a root of `f` on `[a, b]`, given `f(a)` and `f(b)` of
/// opposite sign.  Returns `None` if the bracket does not straddle a root.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
