//! Monte Carlo studies: parameter recovery for the discrete Weibull
//! regression, and a variance-ratio map over the (q, β) grid that shows where
//! Poisson and negative binomial variance assumptions break down.
//!
//! Reproducibility contract: replicate r of a study (and cell c of the map)
//! draws from stream r + 1 (c + 1) of a counter-based generator seeded with
//! the master seed, so any replicate can be regenerated in isolation and
//! results do not depend on evaluation order.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::{quantile_lnq, TruncationPolicy};
use crate::error::{Error, Result};
use crate::estimate::wald_interval;
use crate::optimize::{nelder_mead, OptimizerConfig};
use crate::regression::{fit_dw_regression, ln_q_from_eta};
use crate::special::{inverse_normal_cdf, ln_gamma};

/// How one covariate column is drawn in a simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateSpec {
    StandardNormal,
    Uniform { lower: f64, upper: f64 },
}

/// Configuration of a parameter-recovery study for the discrete Weibull
/// regression: data are generated from log(−log q_i) = x_i'α with shape β,
/// covariates redrawn each replicate, and every replicate refitted by maximum
/// likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStudyConfig {
    pub n_obs: usize,
    pub replicate_count: usize,
    /// Intercept first; one more entry than `covariates`.
    pub true_alpha: Vec<f64>,
    pub true_beta: f64,
    pub covariates: Vec<CovariateSpec>,
    pub master_seed: u64,
    /// Level for the per-parameter Wald intervals whose lengths are averaged.
    pub ci_level: f64,
}

impl Default for SimulationStudyConfig {
    fn default() -> Self {
        Self {
            n_obs: 300,
            replicate_count: 1000,
            true_alpha: vec![0.5, 0.4, -0.3],
            true_beta: 1.6,
            covariates: vec![
                CovariateSpec::StandardNormal,
                CovariateSpec::Uniform { lower: 0.0, upper: 10.0 },
            ],
            master_seed: 1,
            ci_level: 0.95,
        }
    }
}

impl SimulationStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.true_alpha.len() != self.covariates.len() + 1 {
            return Err(Error::InvalidArgument {
                name: "true_alpha",
                reason: format!(
                    "need one intercept plus one coefficient per covariate ({} values), got {}",
                    self.covariates.len() + 1,
                    self.true_alpha.len()
                ),
            });
        }
        if self.n_obs < self.true_alpha.len() + 2 {
            return Err(Error::InvalidArgument {
                name: "n_obs",
                reason: format!(
                    "need more observations than parameters, got n = {}",
                    self.n_obs
                ),
            });
        }
        if self.replicate_count == 0 {
            return Err(Error::InvalidArgument {
                name: "replicate_count",
                reason: "need at least one replicate".to_string(),
            });
        }
        if !(self.true_beta.is_finite() && self.true_beta > 0.0) {
            return Err(Error::InvalidArgument {
                name: "true_beta",
                reason: format!("shape must be positive and finite, got {}", self.true_beta),
            });
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidArgument {
                name: "ci_level",
                reason: format!("confidence level must lie in (0, 1), got {}", self.ci_level),
            });
        }
        for spec in &self.covariates {
            if let CovariateSpec::Uniform { lower, upper } = spec {
                if !(lower.is_finite() && upper.is_finite() && upper > lower) {
                    return Err(Error::InvalidArgument {
                        name: "covariates",
                        reason: format!("uniform bounds ({lower}, {upper}) are not an interval"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Recovery summary for one parameter across the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mse: f64,
    pub mean_ci_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub parameters: Vec<ParameterSummary>,
    pub n_obs: usize,
    pub replicate_count: usize,
    pub failed_replicates: usize,
    pub master_seed: u64,
    pub ci_level: f64,
}

/// Generate the dataset for one replicate (stream `replicate_index + 1` of the
/// master seed). Covariate columns are named x1, x2, ...
pub fn simulate_regression_data(
    config: &SimulationStudyConfig,
    replicate_index: u64,
) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(replicate_index + 1);

    let n = config.n_obs;
    let p = config.covariates.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut response = Vec::with_capacity(n);
    for i in 0..n {
        let mut eta = config.true_alpha[0];
        for (j, spec) in config.covariates.iter().enumerate() {
            let u: f64 = rng.sample(Open01);
            let value = match spec {
                CovariateSpec::StandardNormal => inverse_normal_cdf(u),
                CovariateSpec::Uniform { lower, upper } => lower + (upper - lower) * u,
            };
            x[(i, j)] = value;
            eta += config.true_alpha[j + 1] * value;
        }
        let u: f64 = rng.sample(Open01);
        response.push(quantile_lnq(u, ln_q_from_eta(eta), config.true_beta));
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(response, x, names, true)
}

/// Run the full study: per replicate, simulate and refit, then aggregate the
/// mean estimate, bias, mean squared error, and mean Wald-interval length per
/// parameter. Replicates whose fit fails are counted and skipped.
pub fn run_simulation_study(config: &SimulationStudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let fit_config = OptimizerConfig::default();
    let p_total = config.true_alpha.len() + 1;
    let mut estimates: Vec<Vec<f64>> = vec![Vec::new(); p_total];
    let mut ci_lengths: Vec<Vec<f64>> = vec![Vec::new(); p_total];
    let mut failed = 0usize;
    let mut names: Option<Vec<String>> = None;

    for r in 0..config.replicate_count {
        let data = match simulate_regression_data(config, r as u64) {
            Ok(d) => d,
            Err(_) => {
                failed += 1;
                continue;
            }
        };
        let fitted = match fit_dw_regression(&data, &fit_config) {
            Ok(f) => f,
            Err(_) => {
                failed += 1;
                continue;
            }
        };
        if names.is_none() {
            names = Some(fitted.fit.parameter_names.clone());
        }
        for j in 0..p_total {
            estimates[j].push(fitted.fit.estimates[j]);
            let ci = wald_interval(&fitted.fit, j, config.ci_level)?;
            ci_lengths[j].push(ci.upper - ci.lower);
        }
    }

    let successes = config.replicate_count - failed;
    if successes == 0 {
        return Err(Error::NonFinite {
            context: "every simulation replicate failed to fit".to_string(),
        });
    }
    let names = names.unwrap();
    let mut truth = config.true_alpha.clone();
    truth.push(config.true_beta);

    let parameters = (0..p_total)
        .map(|j| {
            let m = successes as f64;
            let mean_estimate = estimates[j].iter().sum::<f64>() / m;
            let bias = mean_estimate - truth[j];
            let mse = estimates[j]
                .iter()
                .map(|e| (e - truth[j]) * (e - truth[j]))
                .sum::<f64>()
                / m;
            let mean_ci_length = ci_lengths[j].iter().sum::<f64>() / m;
            ParameterSummary {
                name: names[j].clone(),
                truth: truth[j],
                mean_estimate,
                bias,
                mse,
                mean_ci_length,
            }
        })
        .collect();

    Ok(StudyResult {
        parameters,
        n_obs: config.n_obs,
        replicate_count: config.replicate_count,
        failed_replicates: failed,
        master_seed: config.master_seed,
        ci_level: config.ci_level,
    })
}

/// One cell of the dispersion map: a large i.i.d. discrete Weibull draw
/// compared against the variance a Poisson or NB fit would predict for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCell {
    pub q: f64,
    pub beta: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    /// sample variance / Poisson variance (the sample mean).
    pub vr_poisson: f64,
    /// sample variance / NB variance μ̂ + μ̂²/k̂ at the profiled k̂.
    pub vr_nb: f64,
    /// True when the NB dispersion diverged (no overdispersion to absorb);
    /// the NB variance then falls back to the Poisson one.
    pub nb_boundary: bool,
    /// Profiled k̂ when the NB fit is interior.
    pub nb_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionMap {
    pub q_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub n_per_cell: usize,
    pub master_seed: u64,
    /// Cells in row-major order: for each β in `beta_grid`, all q in `q_grid`.
    pub cells: Vec<DispersionCell>,
}

/// The default map grid: q from 0.1 to 0.9 in steps of 0.1 crossed with
/// β ∈ {0.5, 1, 1.3, 1.6, 2, 2.5, 5}.
pub fn default_dispersion_grids() -> (Vec<f64>, Vec<f64>) {
    let q_grid = (1..=9).map(|i| i as f64 / 10.0).collect();
    let beta_grid = vec![0.5, 1.0, 1.3, 1.6, 2.0, 2.5, 5.0];
    (q_grid, beta_grid)
}

/// Simulate every (q, β) cell and report variance ratios against the Poisson
/// and NB fits. Cell c uses stream c + 1 of the master seed.
pub fn dispersion_map(
    q_grid: &[f64],
    beta_grid: &[f64],
    n_per_cell: usize,
    master_seed: u64,
) -> Result<DispersionMap> {
    if q_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::InvalidArgument {
            name: "grid",
            reason: "both parameter grids must be nonempty".to_string(),
        });
    }
    for &q in q_grid {
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "grid values must lie strictly inside (0, 1)",
            });
        }
    }
    for &beta in beta_grid {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "grid values must be positive and finite",
            });
        }
    }
    if n_per_cell < 2 {
        return Err(Error::InvalidArgument {
            name: "n_per_cell",
            reason: format!("need at least 2 draws per cell, got {n_per_cell}"),
        });
    }

    let mut cells = Vec::with_capacity(q_grid.len() * beta_grid.len());
    for (row, &beta) in beta_grid.iter().enumerate() {
        for (col, &q) in q_grid.iter().enumerate() {
            let cell_index = (row * q_grid.len() + col) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(cell_index + 1);
            let ln_q = q.ln();

            let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
            let mut sum = 0.0;
            for _ in 0..n_per_cell {
                let u: f64 = rng.sample(Open01);
                let y = quantile_lnq(u, ln_q, beta);
                *counts.entry(y).or_insert(0) += 1;
                sum += y as f64;
            }
            let n = n_per_cell as f64;
            let sample_mean = sum / n;
            let sample_variance = counts
                .iter()
                .map(|(&y, &c)| {
                    let d = y as f64 - sample_mean;
                    c as f64 * d * d
                })
                .sum::<f64>()
                / (n - 1.0);
            if sample_mean.is_nan() || sample_mean <= 0.0 {
                return Err(Error::NonFinite {
                    context: format!("dispersion cell q={q}, beta={beta} drew an all-zero sample"),
                });
            }

            let vr_poisson = sample_variance / sample_mean;
            let (vr_nb, nb_boundary, nb_k) = if sample_variance <= sample_mean {
                (vr_poisson, true, None)
            } else {
                match profile_nb_k(&counts, sample_mean, n) {
                    Some(k) => {
                        let nb_variance = sample_mean + sample_mean * sample_mean / k;
                        (sample_variance / nb_variance, false, Some(k))
                    }
                    None => (vr_poisson, true, None),
                }
            };

            cells.push(DispersionCell {
                q,
                beta,
                sample_mean,
                sample_variance,
                vr_poisson,
                vr_nb,
                nb_boundary,
                nb_k,
            });
        }
    }

    Ok(DispersionMap {
        q_grid: q_grid.to_vec(),
        beta_grid: beta_grid.to_vec(),
        n_per_cell,
        master_seed,
        cells,
    })
}

/// Profile NB maximum likelihood for k with μ fixed at the sample mean (the
/// intercept-only MLE of μ is the mean at any k). Returns None on divergence.
fn profile_nb_k(counts: &BTreeMap<u64, u64>, mean: f64, n: f64) -> Option<f64> {
    let negll = |theta: &[f64]| -> f64 {
        let t = theta[0];
        if t.abs() > 20.0 {
            return f64::INFINITY;
        }
        let k = t.exp();
        let mut total = 0.0;
        for (&y, &c) in counts {
            let yf = y as f64;
            let term = ln_gamma(yf + k) - ln_gamma(k) - ln_gamma(yf + 1.0)
                + yf * (mean.ln() - (k + mean).ln());
            total -= c as f64 * term;
        }
        total += n * ((mean / k).ln_1p()) * k;
        if total.is_finite() {
            total
        } else {
            f64::INFINITY
        }
    };
    // moment start: Var = μ + μ²/k
    let var = counts
        .iter()
        .map(|(&y, &c)| {
            let d = y as f64 - mean;
            c as f64 * d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    let k0 = (mean * mean / (var - mean)).clamp(1e-3, 1e5);
    let outcome = nelder_mead(&negll, &[k0.ln()], 1e-10, 500);
    let k = outcome.x[0].exp();
    if !outcome.converged || k > 1e6 {
        None
    } else {
        Some(k)
    }
}

/// Exact (series-based) variance ratio of a discrete Weibull against Poisson
/// at the same mean: Var(Y)/E(Y). Above 1 means overdispersion.
pub fn theoretical_vr_poisson(q: f64, beta: f64, policy: &TruncationPolicy) -> Result<f64> {
    let params = crate::distribution::DWParams::new(q, beta)?;
    let mean = params.mean(policy)?;
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::NonFinite {
            context: format!("mean of DW(q={q}, beta={beta}) underflowed to zero"),
        });
    }
    Ok(params.variance(policy)? / mean)
}
