//! Derivative-free minimization and nonlinear least squares.
//!
//! Both solvers are deterministic: fixed coefficients, fixed iteration
//! budgets, and restart candidates ranked by (value, restart index).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Outcome of a Nelder-Mead run.
#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp_to(bounds: &[(f64, f64)], x: &mut [f64]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Bounded Nelder-Mead simplex minimization.
///
/// Candidate points are projected onto the bounds before evaluation.
/// Standard coefficients: reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    bounds: &[(f64, f64)],
    max_iter: usize,
) -> Result<SimplexResult> {
    let n = start.len();
    if n == 0 {
        return Err(Error::Config("no free parameters to optimize".into()));
    }
    if bounds.len() != n {
        return Err(Error::Config("bounds do not match parameter count".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo < hi) {
            return Err(Error::Config(format!("inverted or empty bound [{lo}, {hi}]")));
        }
    }

    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        f(x)
    };

    // Initial simplex: start point plus one vertex per dimension,
    // stepped by 10% of the bound range.
    let mut x0 = start.to_vec();
    clamp_to(bounds, &mut x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&x0);
    simplex.push((x0.clone(), v0));
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo);
        let mut xi = x0.clone();
        xi[i] = if xi[i] + step <= hi { xi[i] + step } else { xi[i] - step };
        let vi = eval(&xi);
        simplex.push((xi, vi));
    }

    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-14 * (best.abs() + 1e-14) {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }

        let point = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp_to(bounds, &mut p);
            p
        };

        let xr = point(1.0);
        let vr = eval(&xr);
        if vr < simplex[0].1 {
            let xe = point(2.0);
            let ve = eval(&xe);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
        } else if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
        } else {
            let (xc, vc) = if vr < simplex[n].1 {
                let xc = point(0.5);
                let vc = eval(&xc);
                (xc, vc)
            } else {
                let xc = point(-0.5);
                let vc = eval(&xc);
                (xc, vc)
            };
            if vc < simplex[n].1.min(vr) {
                simplex[n] = (xc, vc);
            } else {
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut xs: Vec<f64> = entry
                        .0
                        .iter()
                        .zip(&x_best)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    clamp_to(bounds, &mut xs);
                    let vs = eval(&xs);
                    *entry = (xs, vs);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Ok(SimplexResult { x, value, evaluations: evals, converged })
}

/// Outcome of a Levenberg-Marquardt run.
#[derive(Clone, Debug)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// Parameter covariance, (J^T J)^-1 at the optimum.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmResult {
    pub fn standard_error(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }
}

fn jacobian(residuals: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], m: usize) -> DMatrix<f64> {
    let n = p.len();
    let mut j = DMatrix::zeros(m, n);
    for k in 0..n {
        let h = 1e-6 * p[k].abs().max(1e-3);
        let mut pp = p.to_vec();
        pp[k] += h;
        let rp = residuals(&pp);
        pp[k] = p[k] - h;
        let rm = residuals(&pp);
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

/// Levenberg-Marquardt minimization of a weighted residual vector.
///
/// `residuals` maps parameters to (model - data) / sigma per point; the
/// Jacobian is formed by central differences.
pub fn levenberg_marquardt(
    residuals: &dyn Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    max_iter: usize,
) -> Result<LmResult> {
    let n = start.len();
    if n == 0 {
        return Err(Error::Config("no parameters to fit".into()));
    }
    let mut p = start.to_vec();
    let mut r = residuals(&p);
    let m = r.len();
    if m < n {
        return Err(Error::Config(format!("{m} residuals cannot constrain {n} parameters")));
    }
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        let j = jacobian(residuals, &p, m);
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);

        let mut stepped = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-30);
            }
            let delta = match damped.lu().solve(&(-&g)) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(pi, di)| pi + di).collect();
            let rt = residuals(&trial);
            let chi2_t: f64 = rt.iter().map(|v| v * v).sum();
            if chi2_t.is_finite() && chi2_t <= chi2 {
                let improvement = chi2 - chi2_t;
                p = trial;
                r = rt;
                chi2 = chi2_t;
                lambda = (lambda * 0.1).max(1e-14);
                stepped = true;
                if improvement <= 1e-14 * (chi2 + 1e-30) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if converged || !stepped {
            converged = converged || stepped;
            break;
        }
    }

    let j = jacobian(residuals, &p, m);
    let a = j.transpose() * &j;
    let cov = a.try_inverse().unwrap_or_else(|| DMatrix::zeros(n, n));
    let covariance = (0..n)
        .map(|i| (0..n).map(|k| cov[(i, k)]).collect())
        .collect();

    Ok(LmResult { params: p, chi2, covariance, iterations, converged })
}

/// Run Levenberg-Marquardt from several starts; keep the lowest chi-squared,
/// ties broken by start index. Fails only if every start fails to converge.
pub fn lm_multistart(
    residuals: &dyn Fn(&[f64]) -> Vec<f64>,
    starts: &[Vec<f64>],
    max_iter: usize,
) -> Result<LmResult> {
    let mut best: Option<LmResult> = None;
    for start in starts {
        if let Ok(fit) = levenberg_marquardt(residuals, start, max_iter) {
            if fit.converged {
                let better = match &best {
                    Some(b) => fit.chi2 < b.chi2,
                    None => true,
                };
                if better {
                    best = Some(fit);
                }
            }
        }
    }
    best.ok_or_else(|| Error::FitFailure("no restart converged".into()))
}
