//! Derivative-free + quasi-Newton minimization used by all model fitters, and
//! the central-difference Hessian used for observed-information standard
//! errors. Objectives are minimized over unconstrained parameterizations; a
//! non-finite objective value acts as an infinite barrier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence settings shared by the maximum-likelihood fitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Stop when the objective improves by less than this between iterations.
    pub loglik_tolerance: f64,
    /// Combined iteration budget for the simplex and quasi-Newton stages.
    pub max_iterations: usize,
    /// Relative step for the finite-difference Hessian at the optimum.
    pub hessian_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            loglik_tolerance: 1e-8,
            max_iterations: 10_000,
            hessian_step: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loglik_tolerance.is_finite() && self.loglik_tolerance > 0.0) {
            return Err(Error::InvalidArgument {
                name: "loglik_tolerance",
                reason: format!("must be a positive finite number, got {}", self.loglik_tolerance),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument {
                name: "max_iterations",
                reason: "must be at least 1".to_string(),
            });
        }
        if !(self.hessian_step.is_finite() && self.hessian_step > 0.0) {
            return Err(Error::InvalidArgument {
                name: "hessian_step",
                reason: format!("must be a positive finite number, got {}", self.hessian_step),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub fval: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Relative step for central-difference gradients (≈ cbrt of machine epsilon).
const GRAD_STEP: f64 = 6.0e-6;

pub(crate) fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut work = x.to_vec();
    for i in 0..x.len() {
        let h = GRAD_STEP * x[i].abs().max(1.0);
        work[i] = x[i] + h;
        let up = f(&work);
        work[i] = x[i] - h;
        let down = f(&work);
        work[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Max over j of |g_j| · max(1, |x_j|) / max(1, |f|): a scale-free measure of
/// how flat the objective is at `x`.
pub(crate) fn scaled_gradient_norm<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fval: f64) -> f64 {
    let g = central_gradient(f, x);
    let denom = fval.abs().max(1.0);
    g.iter()
        .zip(x)
        .map(|(gi, xi)| gi.abs() * xi.abs().max(1.0) / denom)
        .fold(0.0, f64::max)
}

/// Nelder–Mead downhill simplex. Converges when the worst-to-best objective
/// spread across the simplex falls under `tol`.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> OptimOutcome {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let eval = |p: &[f64]| {
        let v = f(p);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i] != 0.0 { 0.05 * p[i].abs() } else { 0.1 };
        simplex.push(p);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();

    let mut iterations = 0usize;
    let mut last_spread;
    let converged = loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        last_spread = if fvals[worst].is_finite() {
            fvals[worst] - fvals[best]
        } else {
            f64::INFINITY
        };
        if last_spread < tol.max(4.0 * f64::EPSILON * fvals[best].abs()) {
            break true;
        }
        if iterations >= max_iter {
            break false;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for j in 0..n {
                centroid[j] += simplex[i][j] / n as f64;
            }
        }

        let point_along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (centroid[j] - simplex[worst][j]))
                .collect()
        };

        let reflected = point_along(REFLECT);
        let f_reflected = eval(&reflected);
        if f_reflected < fvals[best] {
            let expanded = point_along(EXPAND);
            let f_expanded = eval(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                fvals[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                fvals[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < fvals[second_worst] {
            simplex[worst] = reflected;
            fvals[worst] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < fvals[worst] {
            point_along(CONTRACT)
        } else {
            point_along(-CONTRACT)
        };
        let f_contracted = eval(&contracted);
        if f_contracted < fvals[worst].min(f_reflected) {
            simplex[worst] = contracted;
            fvals[worst] = f_contracted;
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for j in 0..n {
                simplex[i][j] = anchor[j] + SHRINK * (simplex[i][j] - anchor[j]);
            }
            fvals[i] = eval(&simplex[i]);
        }
    };

    let mut best = 0;
    for i in 1..=n {
        if fvals[i] < fvals[best] {
            best = i;
        }
    }
    OptimOutcome {
        x: simplex[best].clone(),
        fval: fvals[best],
        iterations,
        converged,
        last_change: last_spread,
    }
}

/// BFGS with central-difference gradients and Armijo backtracking.
/// Converges when the objective change between accepted steps drops under `tol`.
pub(crate) fn bfgs<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> OptimOutcome {
    const ARMIJO_C1: f64 = 1e-4;
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return OptimOutcome {
            x: x0.to_vec(),
            fval: f64::INFINITY,
            iterations: 0,
            converged: false,
            last_change: f64::INFINITY,
        };
    }
    let mut g = DVector::from_vec(central_gradient(f, x.as_slice()));
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0usize;
    let mut last_change = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let mut direction = -(&h_inv * &g);
        if direction.dot(&g) >= 0.0 || !direction.iter().all(|v| v.is_finite()) {
            // curvature information went bad; restart from steepest descent
            h_inv = DMatrix::identity(n, n);
            direction = -g.clone();
        }
        let slope = direction.dot(&g);
        if slope >= 0.0 {
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let candidate = &x + t * &direction;
            let fc = f(candidate.as_slice());
            if fc.is_finite() && fc <= fx + ARMIJO_C1 * t * slope {
                accepted = Some((candidate, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no acceptable step along this direction: the surface is flat at
            // working precision
            converged = last_change <= tol || g.amax() <= 1e-6;
            break;
        };

        let g_new = DVector::from_vec(central_gradient(f, x_new.as_slice()));
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-10 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let identity = DMatrix::<f64>::identity(n, n);
            let left = &identity - rho * &s * yv.transpose();
            let right = &identity - rho * &yv * s.transpose();
            h_inv = &left * h_inv * &right + rho * &s * s.transpose();
        }

        last_change = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if last_change < tol {
            converged = true;
            break;
        }
    }

    OptimOutcome {
        x: x.as_slice().to_vec(),
        fval: fx,
        iterations,
        converged,
        last_change,
    }
}

/// Two-stage minimization: a simplex pass to find the basin, then BFGS to
/// polish. The combined iteration count is capped by `config.max_iterations`.
pub(crate) fn minimize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    config: &OptimizerConfig,
) -> OptimOutcome {
    let n = x0.len().max(1);
    let nm_budget = (400 * n).min(config.max_iterations);
    let nm = nelder_mead(f, x0, config.loglik_tolerance, nm_budget);
    let remaining = (config.max_iterations - nm.iterations.min(config.max_iterations)).max(50);
    let polish = bfgs(f, &nm.x, config.loglik_tolerance, remaining);

    let (mut best, other_iter) = if polish.fval <= nm.fval {
        (polish, nm.iterations)
    } else {
        (nm, 0)
    };
    best.iterations += other_iter;
    best
}

/// Symmetric central-difference Hessian of `objective` at `at`, with per-axis
/// steps h_j = max(step, step · |at_j|). Any non-finite objective evaluation is
/// an error. The result is symmetrized as (H + Hᵀ)/2.
pub fn numeric_hessian<F: Fn(&[f64]) -> f64>(
    objective: F,
    at: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument {
            name: "step",
            reason: format!("must be a positive finite number, got {step}"),
        });
    }
    let n = at.len();
    let eval = |p: &[f64]| -> Result<f64> {
        let v = objective(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: "evaluating the objective for the numeric Hessian".to_string(),
            })
        }
    };
    let h: Vec<f64> = at.iter().map(|&t| step.max(step * t.abs())).collect();
    let f0 = eval(at)?;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut work = at.to_vec();
    for j in 0..n {
        work[j] = at[j] + h[j];
        let up = eval(&work)?;
        work[j] = at[j] - h[j];
        let down = eval(&work)?;
        work[j] = at[j];
        hess[(j, j)] = (up - 2.0 * f0 + down) / (h[j] * h[j]);
        for k in (j + 1)..n {
            work[j] = at[j] + h[j];
            work[k] = at[k] + h[k];
            let pp = eval(&work)?;
            work[k] = at[k] - h[k];
            let pm = eval(&work)?;
            work[j] = at[j] - h[j];
            work[k] = at[k] + h[k];
            let mp = eval(&work)?;
            work[k] = at[k] - h[k];
            let mm = eval(&work)?;
            work[j] = at[j];
            work[k] = at[k];
            let value = (pp - pm - mp + mm) / (4.0 * h[j] * h[k]);
            hess[(j, k)] = value;
            hess[(k, j)] = value;
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    Ok(sym)
}

/// Invert a symmetric positive-definite matrix, falling back to an eigenvalue
/// pseudo-inverse when Cholesky fails. The result always has a nonnegative
/// diagonal.
pub(crate) fn invert_information(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = matrix.clone().cholesky() {
        return Ok(chol.inverse());
    }
    let eigen = matrix.clone().symmetric_eigen();
    let max_eig = eigen.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_eig == 0.0 || !max_eig.is_finite() {
        return Err(Error::NonFinite {
            context: "inverting a zero or non-finite information matrix".to_string(),
        });
    }
    let cutoff = 1e-12 * max_eig;
    let n = matrix.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let mut used = 0;
    for (i, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eigen.eigenvectors.column(i);
            inv += v * v.transpose() / lambda;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::NonFinite {
            context: "inverting an information matrix with no positive eigenvalues".to_string(),
        });
    }
    Ok(inv)
}
