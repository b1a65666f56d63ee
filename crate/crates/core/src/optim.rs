//! Derivative-free Nelder-Mead simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Convergence when `f_worst - f_best <= ftol * (1 + |f_best|)`.
    pub ftol: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Number of restarts from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            max_evals: 20_000,
            initial_step: 0.1,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

// reflection, expansion, contraction, shrink
const RHO: f64 = 1.0;
const CHI: f64 = 2.0;
const GAMMA: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimizes `f` starting from `x0`.
///
/// Non-finite objective values are treated as `+inf`, so `f` may signal an
/// infeasible point by returning NaN or infinity.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(&best_x);
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let (x, fx, ok) = run_simplex(&mut eval, &best_x, opts, &mut 0);
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        converged = ok;
        if !ok {
            break;
        }
    }
    NelderMeadResult {
        x: best_x,
        fx: best_f,
        evals,
        converged,
    }
}

fn run_simplex<E>(eval: &mut E, x0: &[f64], opts: &NelderMeadOptions, used: &mut usize) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1.0 { opts.initial_step * v[i].abs() } else { opts.initial_step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    *used += dim + 1;

    let mut centroid = vec![0.0; dim];
    let trial = |base: &[f64], centroid: &[f64], coef: f64| -> Vec<f64> {
        base.iter()
            .zip(centroid)
            .map(|(b, c)| c + coef * (c - b))
            .collect::<Vec<f64>>()
    };

    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (fbest, fworst) = (values[0], values[dim]);
        if fbest.is_finite() && fworst - fbest <= opts.ftol * (1.0 + fbest.abs()) {
            return (simplex[0].clone(), fbest, true);
        }
        if *used >= opts.max_evals {
            return (simplex[0].clone(), fbest, false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }

        let xr = trial(&simplex[dim], &centroid, RHO);
        let fr = eval(&xr);
        *used += 1;
        if fr < values[0] {
            let xe = trial(&simplex[dim], &centroid, RHO * CHI);
            let fe = eval(&xe);
            *used += 1;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = trial(&simplex[dim], &centroid, RHO * GAMMA);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = trial(&simplex[dim], &centroid, -GAMMA);
            let fc = eval(&xc);
            (xc, fc)
        };
        *used += 1;
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=dim {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + SIGMA * (*x - b);
            }
            values[i] = eval(&simplex[i]);
        }
        *used += dim;
    }
}
