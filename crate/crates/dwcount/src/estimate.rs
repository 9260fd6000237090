//! Maximum-likelihood estimation of the two-parameter discrete Weibull, plus
//! the fit container and Wald intervals shared by every model in the crate.
//!
//! The likelihood is maximized over the unconstrained pair
//! (a, b) = (ln(−ln q), ln β); variances are mapped back to the (q, β) scale
//! by the delta method with dq/da = q ln q and dβ/db = β.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distribution::{ln_pmf_lnq, DWParams};
use crate::error::{Error, Result};
use crate::optimize::{
    invert_information, minimize, numeric_hessian, scaled_gradient_norm, OptimizerConfig,
};
use crate::special::inverse_normal_cdf;

/// Bound on the unconstrained coordinates during likelihood search; beyond it
/// the objective is treated as an infinite barrier.
const SEARCH_BOUND: f64 = 30.0;

/// Scale-free flatness required at a reported optimum.
const GRADIENT_TOLERANCE: f64 = 1e-4;

/// A maximized likelihood with its variance matrix and information criteria.
///
/// `aic = -2ℓ + 2p` and `bic = -2ℓ + p ln n` with `p = n_params`. The `vcov`
/// diagonal is clamped to be nonnegative at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub loglik: f64,
    /// Row-major variance-covariance matrix of `estimates`.
    pub vcov: Vec<Vec<f64>>,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub n_obs: usize,
    pub n_params: usize,
    pub iterations: usize,
}

impl FitResult {
    pub(crate) fn from_parts(
        parameter_names: Vec<String>,
        estimates: Vec<f64>,
        loglik: f64,
        vcov: &DMatrix<f64>,
        converged: bool,
        n_obs: usize,
        iterations: usize,
    ) -> Self {
        let p = estimates.len();
        debug_assert_eq!(parameter_names.len(), p);
        debug_assert_eq!(vcov.nrows(), p);
        debug_assert_eq!(vcov.ncols(), p);
        let mut rows = Vec::with_capacity(p);
        for i in 0..p {
            let mut row = Vec::with_capacity(p);
            for j in 0..p {
                let value = 0.5 * (vcov[(i, j)] + vcov[(j, i)]);
                row.push(if i == j { value.max(0.0) } else { value });
            }
            rows.push(row);
        }
        let pf = p as f64;
        let nf = n_obs as f64;
        Self {
            parameter_names,
            estimates,
            loglik,
            vcov: rows,
            aic: -2.0 * loglik + 2.0 * pf,
            bic: -2.0 * loglik + pf * nf.ln(),
            converged,
            n_obs,
            n_params: p,
            iterations,
        }
    }

    /// √(vcov\[i\]\[i\]), or None when `index` is out of range.
    pub fn standard_error(&self, index: usize) -> Option<f64> {
        self.vcov.get(index).map(|row| row[index].max(0.0).sqrt())
    }
}

/// A two-sided Wald interval for one parameter of a [`FitResult`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub parameter: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// True when the standard error is zero or not finite; the interval then
    /// collapses to the point estimate and should not be trusted.
    pub degenerate: bool,
}

/// estimate ± z_{(1+level)/2} · se for the parameter at `index`.
pub fn wald_interval(fit: &FitResult, index: usize, level: f64) -> Result<ConfidenceInterval> {
    if !(level.is_finite() && level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument {
            name: "level",
            reason: format!("confidence level must lie in (0, 1), got {level}"),
        });
    }
    if index >= fit.n_params {
        return Err(Error::InvalidArgument {
            name: "index",
            reason: format!("parameter index {index} out of range for {} parameters", fit.n_params),
        });
    }
    let estimate = fit.estimates[index];
    let se = fit.standard_error(index).unwrap();
    let degenerate = !(se.is_finite() && se > 0.0);
    let (lower, upper) = if degenerate {
        (estimate, estimate)
    } else {
        let z = inverse_normal_cdf(0.5 * (1.0 + level));
        (estimate - z * se, estimate + z * se)
    };
    Ok(ConfidenceInterval {
        parameter: fit.parameter_names[index].clone(),
        estimate,
        lower,
        upper,
        level,
        degenerate,
    })
}

/// Negative log-likelihood of an i.i.d. sample under fixed (q, β). Zero-mass
/// observations are reported as degenerate rather than returned as infinity.
pub fn dw_neg_loglik(sample: &[u64], params: &DWParams) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidDataset("sample is empty".to_string()));
    }
    let ln_q = params.q().ln();
    let beta = params.beta();
    let mut total = 0.0;
    for (index, &y) in sample.iter().enumerate() {
        let lp = ln_pmf_lnq(y, ln_q, beta);
        if !lp.is_finite() {
            return Err(Error::DegenerateLikelihood { index, y });
        }
        total -= lp;
    }
    Ok(total)
}

/// Fit (q, β) by maximum likelihood. The starting point sets q from the
/// observed proportion of zeros (clamped into [0.05, 0.95], since f(0) = 1 − q)
/// and β = 1.
pub fn fit_dw_mle(sample: &[u64], config: &OptimizerConfig) -> Result<FitResult> {
    let zeros = sample.iter().filter(|&&y| y == 0).count();
    let q0 = (1.0 - zeros as f64 / sample.len().max(1) as f64).clamp(0.05, 0.95);
    fit_dw_mle_from(sample, config, q0, 1.0)
}

pub(crate) fn fit_dw_mle_from(
    sample: &[u64],
    config: &OptimizerConfig,
    q_start: f64,
    beta_start: f64,
) -> Result<FitResult> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidDataset("sample is empty".to_string()));
    }
    if sample.iter().all(|&y| y == 0) {
        return Err(Error::BoundaryMaximum {
            reason: "all observations are zero, so the likelihood pushes q to the boundary at 0"
                .to_string(),
        });
    }

    let objective = |theta: &[f64]| -> f64 {
        let (a, b) = (theta[0], theta[1]);
        if a.abs() > SEARCH_BOUND || b.abs() > SEARCH_BOUND {
            return f64::INFINITY;
        }
        let ln_q = -a.exp();
        let beta = b.exp();
        let mut total = 0.0;
        for &y in sample {
            let lp = ln_pmf_lnq(y, ln_q, beta);
            if !lp.is_finite() {
                return f64::INFINITY;
            }
            total -= lp;
        }
        total
    };

    let start = [(-q_start.ln()).ln(), beta_start.ln()];
    let outcome = minimize(&objective, &start, config);
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            last_change: outcome.last_change,
        });
    }
    let flatness = scaled_gradient_norm(&objective, &outcome.x, outcome.fval);
    if flatness.is_nan() || flatness >= GRADIENT_TOLERANCE {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            last_change: flatness,
        });
    }

    let ln_q = -outcome.x[0].exp();
    let q_hat = ln_q.exp();
    let beta_hat = outcome.x[1].exp();
    // locate any observation the fitted parameters assign zero mass to
    for (index, &y) in sample.iter().enumerate() {
        if !ln_pmf_lnq(y, ln_q, beta_hat).is_finite() {
            return Err(Error::DegenerateLikelihood { index, y });
        }
    }

    let hessian = numeric_hessian(objective, &outcome.x, config.hessian_step)?;
    let vcov_ab = invert_information(&hessian)?;
    // delta method onto (q, β)
    let jac = [q_hat * ln_q, beta_hat];
    let mut vcov = DMatrix::<f64>::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            vcov[(i, j)] = jac[i] * vcov_ab[(i, j)] * jac[j];
        }
    }

    Ok(FitResult::from_parts(
        vec!["q".to_string(), "beta".to_string()],
        vec![q_hat, beta_hat],
        -outcome.fval,
        &vcov,
        true,
        sample.len(),
        outcome.iterations,
    ))
}
