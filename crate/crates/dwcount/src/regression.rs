//! Count regressions sharing one design-matrix convention:
//!
//! * discrete Weibull: log(−log q_i) = x_i'α with one global shape β, so
//!   q_i = exp(−exp(x_i'α)); larger x'α means a smaller q and smaller counts;
//! * Poisson: log μ_i = x_i'γ, fitted by iteratively reweighted least squares;
//! * negative binomial (NB2): log μ_i = x_i'γ with Var = μ + μ²/k, fitted by
//!   joint maximum likelihood over (γ, ln k).
//!
//! The discrete Weibull likelihood never materializes q_i; it works with
//! ln q_i = −exp(η_i) directly, which stays finite and accurate when η is very
//! negative (q approaching 1) or strongly positive (q approaching 0).

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::{
    cdf_lnq, ln_pmf_lnq, mean_lnq, quantile_lnq, sample_one_lnq, variance_lnq, TruncationPolicy,
};
use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::optimize::{
    invert_information, minimize, numeric_hessian, scaled_gradient_norm, OptimizerConfig,
};
use crate::special::{ln_factorial, ln_gamma, reg_inc_beta, upper_reg_gamma};

/// Treat the linear predictor as divergent beyond this bound (barrier during
/// optimization, hard error if user-supplied covariates reach it).
const ETA_BOUND: f64 = 200.0;

/// ln β and ln k search bounds.
const SHAPE_BOUND: f64 = 25.0;

/// An NB dispersion estimate above this is reported as a boundary (k → ∞
/// collapses NB onto Poisson).
const NB_DIVERGENCE_K: f64 = 1e6;

const GRADIENT_TOLERANCE: f64 = 1e-4;

/// q = exp(−exp(η)): the inverse link of the discrete Weibull regression.
pub fn q_from_linear_predictor(eta: f64) -> f64 {
    (-eta.exp()).exp()
}

pub(crate) fn ln_q_from_eta(eta: f64) -> f64 {
    -eta.exp()
}

/// ln ln 2 ≈ −0.3665, the constant in the median-scale interpretation.
const LN_LN_2: f64 = -0.366_512_920_581_664_33;

/// Median-scale reading of a discrete Weibull regression:
/// ln(M(x) + 1) ≈ (ln ln 2 − x'α)/β, so covariate p moves ln(median + 1) by
/// −α_p/β per unit and the intercept contributes (ln ln 2 − α₀)/β.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientInterpretation {
    /// Covariate names, aligned with `effects`.
    pub names: Vec<String>,
    /// −α_p/β for each covariate.
    pub effects: Vec<f64>,
    /// (ln ln 2 − α₀)/β when the design has an intercept.
    pub baseline: Option<f64>,
}

/// A fitted discrete Weibull regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DWRegressionFit {
    /// Estimates ordered as the design columns followed by β.
    pub fit: FitResult,
    /// α̂ in design-column order (intercept first when present).
    pub coefficients: Vec<f64>,
    pub beta: f64,
    pub covariate_names: Vec<String>,
    pub add_intercept: bool,
    /// Series truncation used by `conditional_mean`/`conditional_variance`.
    pub truncation: TruncationPolicy,
}

/// A fitted Poisson log-linear regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonRegressionFit {
    pub fit: FitResult,
    pub coefficients: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub add_intercept: bool,
}

/// A fitted NB2 regression (variance μ + μ²/k).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NBRegressionFit {
    /// Estimates ordered as the design columns followed by k.
    pub fit: FitResult,
    pub coefficients: Vec<f64>,
    pub k: f64,
    pub covariate_names: Vec<String>,
    pub add_intercept: bool,
}

/// Common interface the diagnostics use to interrogate any fitted count
/// regression one observation at a time. `covariates` excludes the intercept
/// and follows the order of `covariate_names()`.
pub trait CountModel {
    fn model_name(&self) -> &'static str;
    fn covariate_names(&self) -> &[String];
    fn fit_result(&self) -> &FitResult;
    fn linear_predictor(&self, covariates: &[f64]) -> Result<f64>;
    fn conditional_cdf(&self, covariates: &[f64], y: i64) -> Result<f64>;
    fn conditional_pmf(&self, covariates: &[f64], y: u64) -> Result<f64>;
    fn conditional_mean(&self, covariates: &[f64]) -> Result<f64>;
    fn conditional_variance(&self, covariates: &[f64]) -> Result<f64>;
    /// Draw one response at these covariates from the fitted distribution.
    fn sample_response(&self, covariates: &[f64], rng: &mut dyn RngCore) -> Result<u64>;
}

fn predictor(
    coefficients: &[f64],
    add_intercept: bool,
    expected: usize,
    covariates: &[f64],
) -> Result<f64> {
    if covariates.len() != expected {
        return Err(Error::InvalidArgument {
            name: "covariates",
            reason: format!("expected {expected} covariate values, got {}", covariates.len()),
        });
    }
    let mut eta = 0.0;
    let mut idx = 0;
    if add_intercept {
        eta += coefficients[0];
        idx = 1;
    }
    for (value, coef) in covariates.iter().zip(&coefficients[idx..]) {
        eta += value * coef;
    }
    if !eta.is_finite() || eta.abs() > ETA_BOUND {
        return Err(Error::NonFinite {
            context: format!("linear predictor {eta:.3e} out of the usable range"),
        });
    }
    Ok(eta)
}

impl DWRegressionFit {
    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        predictor(
            &self.coefficients,
            self.add_intercept,
            self.covariate_names.len(),
            covariates,
        )
    }

    /// Fitted q(x) = exp(−exp(x'α)).
    pub fn fitted_q(&self, covariates: &[f64]) -> Result<f64> {
        Ok(q_from_linear_predictor(self.linear_predictor(covariates)?))
    }

    /// Closed-form conditional quantile at the fitted parameters.
    pub fn fitted_quantile(&self, covariates: &[f64], tau: f64) -> Result<u64> {
        if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument {
                name: "tau",
                reason: format!("probability level must lie in (0, 1), got {tau}"),
            });
        }
        let eta = self.linear_predictor(covariates)?;
        Ok(quantile_lnq(tau, ln_q_from_eta(eta), self.beta))
    }

    /// Conditional median M(x), the τ = 0.5 quantile.
    pub fn fitted_median(&self, covariates: &[f64]) -> Result<u64> {
        self.fitted_quantile(covariates, 0.5)
    }

    /// Conditional mean via the tail series under this fit's truncation policy.
    pub fn fitted_mean(&self, covariates: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(covariates)?;
        mean_lnq(ln_q_from_eta(eta), self.beta, &self.truncation)
    }

    /// Median-scale effects −α_p/β (and baseline for the intercept).
    pub fn interpret_coefficients(&self) -> CoefficientInterpretation {
        let slope_start = usize::from(self.add_intercept);
        let effects = self.coefficients[slope_start..]
            .iter()
            .map(|a| -a / self.beta)
            .collect();
        let baseline = self
            .add_intercept
            .then(|| (LN_LN_2 - self.coefficients[0]) / self.beta);
        CoefficientInterpretation {
            names: self.covariate_names.clone(),
            effects,
            baseline,
        }
    }
}

impl CountModel for DWRegressionFit {
    fn model_name(&self) -> &'static str {
        "discrete_weibull"
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    fn fit_result(&self) -> &FitResult {
        &self.fit
    }

    fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        DWRegressionFit::linear_predictor(self, covariates)
    }

    fn conditional_cdf(&self, covariates: &[f64], y: i64) -> Result<f64> {
        let eta = self.linear_predictor(covariates)?;
        Ok(cdf_lnq(y, ln_q_from_eta(eta), self.beta))
    }

    fn conditional_pmf(&self, covariates: &[f64], y: u64) -> Result<f64> {
        let eta = self.linear_predictor(covariates)?;
        let ln_q = ln_q_from_eta(eta);
        let y = y as i64;
        Ok(cdf_lnq(y, ln_q, self.beta) - cdf_lnq(y - 1, ln_q, self.beta))
    }

    fn conditional_mean(&self, covariates: &[f64]) -> Result<f64> {
        self.fitted_mean(covariates)
    }

    fn conditional_variance(&self, covariates: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(covariates)?;
        variance_lnq(ln_q_from_eta(eta), self.beta, &self.truncation)
    }

    fn sample_response(&self, covariates: &[f64], rng: &mut dyn RngCore) -> Result<u64> {
        let eta = self.linear_predictor(covariates)?;
        Ok(sample_one_lnq(rng, ln_q_from_eta(eta), self.beta))
    }
}

impl PoissonRegressionFit {
    fn mu(&self, covariates: &[f64]) -> Result<f64> {
        let eta = predictor(
            &self.coefficients,
            self.add_intercept,
            self.covariate_names.len(),
            covariates,
        )?;
        Ok(eta.exp())
    }
}

impl CountModel for PoissonRegressionFit {
    fn model_name(&self) -> &'static str {
        "poisson"
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    fn fit_result(&self) -> &FitResult {
        &self.fit
    }

    fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        predictor(
            &self.coefficients,
            self.add_intercept,
            self.covariate_names.len(),
            covariates,
        )
    }

    fn conditional_cdf(&self, covariates: &[f64], y: i64) -> Result<f64> {
        if y < 0 {
            return Ok(0.0);
        }
        // P(Y ≤ y) = Q(y + 1, μ)
        Ok(upper_reg_gamma(y as f64 + 1.0, self.mu(covariates)?))
    }

    fn conditional_pmf(&self, covariates: &[f64], y: u64) -> Result<f64> {
        let mu = self.mu(covariates)?;
        Ok((y as f64 * mu.ln() - mu - ln_factorial(y)).exp())
    }

    fn conditional_mean(&self, covariates: &[f64]) -> Result<f64> {
        self.mu(covariates)
    }

    fn conditional_variance(&self, covariates: &[f64]) -> Result<f64> {
        self.mu(covariates)
    }

    fn sample_response(&self, covariates: &[f64], rng: &mut dyn RngCore) -> Result<u64> {
        let mu = self.mu(covariates)?;
        let u: f64 = rng.sample(Open01);
        Ok(poisson_inverse_transform(mu, u))
    }
}

impl NBRegressionFit {
    fn mu(&self, covariates: &[f64]) -> Result<f64> {
        let eta = predictor(
            &self.coefficients,
            self.add_intercept,
            self.covariate_names.len(),
            covariates,
        )?;
        Ok(eta.exp())
    }
}

impl CountModel for NBRegressionFit {
    fn model_name(&self) -> &'static str {
        "negative_binomial"
    }

    fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    fn fit_result(&self) -> &FitResult {
        &self.fit
    }

    fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        predictor(
            &self.coefficients,
            self.add_intercept,
            self.covariate_names.len(),
            covariates,
        )
    }

    fn conditional_cdf(&self, covariates: &[f64], y: i64) -> Result<f64> {
        if y < 0 {
            return Ok(0.0);
        }
        let mu = self.mu(covariates)?;
        let p = self.k / (self.k + mu);
        // P(Y ≤ y) = I_p(k, y + 1)
        Ok(reg_inc_beta(self.k, y as f64 + 1.0, p))
    }

    fn conditional_pmf(&self, covariates: &[f64], y: u64) -> Result<f64> {
        let mu = self.mu(covariates)?;
        Ok(nb_ln_pmf(y as f64, mu, self.k).exp())
    }

    fn conditional_mean(&self, covariates: &[f64]) -> Result<f64> {
        self.mu(covariates)
    }

    fn conditional_variance(&self, covariates: &[f64]) -> Result<f64> {
        let mu = self.mu(covariates)?;
        Ok(mu + mu * mu / self.k)
    }

    fn sample_response(&self, covariates: &[f64], rng: &mut dyn RngCore) -> Result<u64> {
        let mu = self.mu(covariates)?;
        let u: f64 = rng.sample(Open01);
        Ok(nb_inverse_transform(mu, self.k, u))
    }
}

/// Sequential inverse-transform draw from Poisson(μ).
fn poisson_inverse_transform(mu: f64, u: f64) -> u64 {
    let mut y = 0u64;
    let mut p = (-mu).exp();
    let mut cum = p;
    // f(y+1) = f(y) · μ/(y+1); walk until the cumulative passes u
    while u > cum && y < 100_000_000 {
        y += 1;
        p *= mu / y as f64;
        cum += p;
        if p == 0.0 {
            break;
        }
    }
    y
}

fn nb_ln_pmf(y: f64, mu: f64, k: f64) -> f64 {
    ln_gamma(y + k) - ln_gamma(k) - ln_gamma(y + 1.0) - k * (mu / k).ln_1p()
        + y * (mu.ln() - (k + mu).ln())
}

/// Sequential inverse-transform draw from NB(μ, k).
fn nb_inverse_transform(mu: f64, k: f64, u: f64) -> u64 {
    let p_zero = (-k * (mu / k).ln_1p()).exp();
    let mut y = 0u64;
    let mut p = p_zero;
    let mut cum = p;
    let ratio = mu / (k + mu);
    while u > cum && y < 100_000_000 {
        // f(y+1) = f(y) · (k + y)/(y + 1) · μ/(k + μ)
        p *= (k + y as f64) / (y as f64 + 1.0) * ratio;
        y += 1;
        cum += p;
        if p == 0.0 {
            break;
        }
    }
    y
}

fn check_not_all_zero(data: &Dataset) -> Result<()> {
    if data.response().iter().all(|&y| y == 0) {
        return Err(Error::BoundaryMaximum {
            reason: "every response is zero, so the fitted distribution degenerates at 0"
                .to_string(),
        });
    }
    Ok(())
}

/// Fit the discrete Weibull regression by maximum likelihood over (α, ln β).
pub fn fit_dw_regression(data: &Dataset, config: &OptimizerConfig) -> Result<DWRegressionFit> {
    fit_dw_regression_with(data, config, TruncationPolicy::default())
}

/// Same as [`fit_dw_regression`] with an explicit truncation policy for the
/// moment computations attached to the returned fit.
pub fn fit_dw_regression_with(
    data: &Dataset,
    config: &OptimizerConfig,
    truncation: TruncationPolicy,
) -> Result<DWRegressionFit> {
    config.validate()?;
    truncation.validate()?;
    check_not_all_zero(data)?;

    let design = data.design_matrix();
    let y = data.response();
    let n = data.n();
    let p = design.ncols();

    let objective = |theta: &[f64]| -> f64 {
        let b = theta[p];
        if b.abs() > SHAPE_BOUND {
            return f64::INFINITY;
        }
        let beta = b.exp();
        let alpha = DVector::from_column_slice(&theta[..p]);
        let eta = &design * &alpha;
        let mut total = 0.0;
        for i in 0..n {
            let e = eta[i];
            if !e.is_finite() || e.abs() > ETA_BOUND {
                return f64::INFINITY;
            }
            let lp = ln_pmf_lnq(y[i], ln_q_from_eta(e), beta);
            if !lp.is_finite() {
                return f64::INFINITY;
            }
            total -= lp;
        }
        total
    };

    // start: intercept matching the observed zero proportion (f(0) = 1 − q),
    // slopes at zero, β = 1
    let zeros = y.iter().filter(|&&v| v == 0).count();
    let q0 = (1.0 - zeros as f64 / n as f64).clamp(0.05, 0.95);
    let mut start = vec![0.0; p + 1];
    if data.add_intercept() {
        start[0] = (-q0.ln()).ln();
    }

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

    let beta = outcome.x[p].exp();
    let alpha: Vec<f64> = outcome.x[..p].to_vec();
    // locate any observation left with zero mass at the reported optimum
    let eta_hat = &design * DVector::from_column_slice(&alpha);
    for i in 0..n {
        if !ln_pmf_lnq(y[i], ln_q_from_eta(eta_hat[i]), beta).is_finite() {
            return Err(Error::DegenerateLikelihood { index: i, y: y[i] });
        }
    }

    let hessian = numeric_hessian(objective, &outcome.x, config.hessian_step)?;
    let vcov_theta = invert_information(&hessian)?;
    // delta method: identity on α, dβ/d(ln β) = β
    let mut jac = vec![1.0; p + 1];
    jac[p] = beta;
    let mut vcov = DMatrix::<f64>::zeros(p + 1, p + 1);
    for i in 0..=p {
        for j in 0..=p {
            vcov[(i, j)] = jac[i] * vcov_theta[(i, j)] * jac[j];
        }
    }

    let mut names = data.design_names();
    names.push("beta".to_string());
    let mut estimates = alpha.clone();
    estimates.push(beta);
    let fit = FitResult::from_parts(
        names,
        estimates,
        -outcome.fval,
        &vcov,
        true,
        n,
        outcome.iterations,
    );
    Ok(DWRegressionFit {
        fit,
        coefficients: alpha,
        beta,
        covariate_names: data.covariate_names().to_vec(),
        add_intercept: data.add_intercept(),
        truncation,
    })
}

/// Fit the Poisson log-linear model by IRLS. Convergence requires the score
/// equations X'(y − μ̂) to vanish (max absolute entry below 1e-6).
pub fn fit_poisson_glm(data: &Dataset) -> Result<PoissonRegressionFit> {
    const MAX_ITER: usize = 200;
    const SCORE_TOLERANCE: f64 = 1e-6;

    check_not_all_zero(data)?;
    let design = data.design_matrix();
    let n = data.n();
    let p = design.ncols();
    let y: DVector<f64> = DVector::from_iterator(n, data.response().iter().map(|&v| v as f64));

    let mut mu: DVector<f64> = y.map(|v| v + 0.5);
    let mut eta: DVector<f64> = mu.map(f64::ln);
    let mut coef = DVector::<f64>::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut prev_loglik = f64::NEG_INFINITY;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        // weighted normal equations with W = diag(μ), working response
        // z = η + (y − μ)/μ
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in 0..n {
            let w = mu[i];
            let z = eta[i] + (y[i] - mu[i]) / mu[i];
            for a in 0..p {
                let xa = design[(i, a)];
                xtwz[a] += w * xa * z;
                for b in a..p {
                    xtwx[(a, b)] += w * xa * design[(i, b)];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let chol = xtwx.clone().cholesky().ok_or_else(|| Error::NonFinite {
            context: "solving the weighted normal equations in Poisson IRLS".to_string(),
        })?;
        coef = chol.solve(&xtwz);
        eta = &design * &coef;
        if eta.iter().any(|e| !e.is_finite() || *e > 100.0) {
            return Err(Error::NonFinite {
                context: "Poisson IRLS diverged (linear predictor ran away; possible separation)"
                    .to_string(),
            });
        }
        mu = eta.map(f64::exp);

        let loglik: f64 = (0..n)
            .map(|i| y[i] * eta[i] - mu[i] - ln_factorial(data.response()[i]))
            .sum();
        last_change = (loglik - prev_loglik).abs();
        prev_loglik = loglik;

        let score = design.transpose() * (&y - &mu);
        if score.amax() < SCORE_TOLERANCE && last_change < 1e-10 * (loglik.abs() + 1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            last_change,
        });
    }

    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        for a in 0..p {
            for b in a..p {
                xtwx[(a, b)] += mu[i] * design[(i, a)] * design[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    let vcov = invert_information(&xtwx)?;
    let fit = FitResult::from_parts(
        data.design_names(),
        coef.as_slice().to_vec(),
        prev_loglik,
        &vcov,
        true,
        n,
        iterations,
    );
    Ok(PoissonRegressionFit {
        fit,
        coefficients: coef.as_slice().to_vec(),
        covariate_names: data.covariate_names().to_vec(),
        add_intercept: data.add_intercept(),
    })
}

/// Fit the NB2 regression by joint maximum likelihood over (γ, ln k), starting
/// from the Poisson coefficients and a moment estimate of k. When k diverges
/// the data carry no overdispersion and the error returns the Poisson fit as
/// the usable fallback.
pub fn fit_nb_regression(data: &Dataset, config: &OptimizerConfig) -> Result<NBRegressionFit> {
    config.validate()?;
    check_not_all_zero(data)?;
    let poisson = fit_poisson_glm(data)?;

    let design = data.design_matrix();
    let n = data.n();
    let p = design.ncols();
    let y: Vec<f64> = data.response().iter().map(|&v| v as f64).collect();

    let objective = |theta: &[f64]| -> f64 {
        let t = theta[p];
        if t.abs() > SHAPE_BOUND {
            return f64::INFINITY;
        }
        let k = t.exp();
        let gamma = DVector::from_column_slice(&theta[..p]);
        let eta = &design * &gamma;
        let mut total = 0.0;
        for i in 0..n {
            let e = eta[i];
            if !e.is_finite() || !(-ETA_BOUND..=100.0).contains(&e) {
                return f64::INFINITY;
            }
            let lp = nb_ln_pmf(y[i], e.exp(), k);
            if !lp.is_finite() {
                return f64::INFINITY;
            }
            total -= lp;
        }
        total
    };

    // moment start for k: Var = μ + μ²/k ⇒ k ≈ μ̄²/(s² − μ̄)
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let k0 = if var > mean {
        (mean * mean / (var - mean)).clamp(0.05, 1e4)
    } else {
        100.0
    };
    let mut start = poisson.coefficients.clone();
    start.push(k0.ln());

    let outcome = minimize(&objective, &start, config);
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            last_change: outcome.last_change,
        });
    }
    let k = outcome.x[p].exp();
    if k > NB_DIVERGENCE_K {
        return Err(Error::NbDispersionDiverged {
            poisson: Box::new(poisson.fit),
        });
    }
    let flatness = scaled_gradient_norm(&objective, &outcome.x, outcome.fval);
    if flatness.is_nan() || flatness >= GRADIENT_TOLERANCE {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            last_change: flatness,
        });
    }

    let gamma: Vec<f64> = outcome.x[..p].to_vec();
    let hessian = numeric_hessian(objective, &outcome.x, config.hessian_step)?;
    let vcov_theta = invert_information(&hessian)?;
    let mut jac = vec![1.0; p + 1];
    jac[p] = k;
    let mut vcov = DMatrix::<f64>::zeros(p + 1, p + 1);
    for i in 0..=p {
        for j in 0..=p {
            vcov[(i, j)] = jac[i] * vcov_theta[(i, j)] * jac[j];
        }
    }

    let mut names = data.design_names();
    names.push("k".to_string());
    let mut estimates = gamma.clone();
    estimates.push(k);
    let fit = FitResult::from_parts(
        names,
        estimates,
        -outcome.fval,
        &vcov,
        true,
        n,
        outcome.iterations,
    );
    Ok(NBRegressionFit {
        fit,
        coefficients: gamma,
        k,
        covariate_names: data.covariate_names().to_vec(),
        add_intercept: data.add_intercept(),
    })
}
