//! Type-1 discrete Weibull distribution on {0, 1, 2, ...}.
//!
//! CDF: F(y) = 1 − q^((y+1)^β) for y ≥ 0 (0 below), with 0 < q < 1, β > 0.
//! PMF: f(y) = q^(y^β) − q^((y+1)^β), so f(0) = 1 − q for every β.
//!
//! β = 1 recovers the geometric distribution with success probability 1 − q,
//! β = 2 the discrete Rayleigh, and large β concentrates all mass on {0, 1}
//! (a Bernoulli(q) limit). The mean and variance have no closed form; they are
//! evaluated as tail series μ = Σ_{y≥1} q^(y^β) and
//! E\[Y²\] = 2 Σ_{y≥1} y q^(y^β) − μ under an explicit truncation policy.
//!
//! All powers q^(y^β) are evaluated in log space as exp(y^β · ln q) so that
//! q close to 1 and large y stay finite and accurate.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation rule for the infinite moment series: accumulate terms until one
/// falls below `term_tolerance` (absolute), erroring out if `max_terms` terms
/// were not enough.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub term_tolerance: f64,
    pub max_terms: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            term_tolerance: 1e-12,
            max_terms: 10_000_000,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tolerance.is_finite() && self.term_tolerance > 0.0) {
            return Err(Error::InvalidArgument {
                name: "term_tolerance",
                reason: format!("must be a positive finite number, got {}", self.term_tolerance),
            });
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidArgument {
                name: "max_terms",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Validated parameter pair (q, β) of a discrete Weibull distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DWParams {
    q: f64,
    beta: f64,
}

impl DWParams {
    pub fn new(q: f64, beta: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "must lie strictly inside (0, 1)",
            });
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be a positive finite number",
            });
        }
        Ok(Self { q, beta })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub(crate) fn ln_q(&self) -> f64 {
        self.q.ln()
    }

    /// P(Y = y); 0 for negative y. Defined as `cdf(y) - cdf(y - 1)`, so that
    /// identity holds exactly, bit for bit.
    pub fn pmf(&self, y: i64) -> f64 {
        if y < 0 {
            return 0.0;
        }
        self.cdf(y) - self.cdf(y - 1)
    }

    /// P(Y ≤ y); 0 for negative y.
    pub fn cdf(&self, y: i64) -> f64 {
        cdf_lnq(y, self.ln_q(), self.beta)
    }

    /// P(Y ≥ y): q^(y^β) for y ≥ 1 and 1 for y ≤ 0.
    pub fn survival(&self, y: i64) -> f64 {
        if y <= 0 {
            return 1.0;
        }
        sf_lnq(y as f64, self.ln_q(), self.beta)
    }

    /// log P(Y = y), evaluated in log space so far-tail masses keep their
    /// scale instead of underflowing through the plain pmf difference.
    /// Returns −∞ when the mass underflows entirely.
    pub fn ln_pmf(&self, y: u64) -> f64 {
        ln_pmf_lnq(y, self.ln_q(), self.beta)
    }

    /// Smallest y with F(y) ≥ τ, for τ in (0, 1).
    pub fn quantile(&self, tau: f64) -> Result<u64> {
        if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidArgument {
                name: "tau",
                reason: format!("probability level must lie in (0, 1), got {tau}"),
            });
        }
        Ok(quantile_lnq(tau, self.ln_q(), self.beta))
    }

    /// μ = Σ_{y≥1} q^(y^β), truncated per `policy`.
    pub fn mean(&self, policy: &TruncationPolicy) -> Result<f64> {
        policy.validate()?;
        tail_series(self.ln_q(), self.beta, false, policy)
    }

    /// Var(Y) = 2 Σ_{y≥1} y q^(y^β) − μ − μ², truncated per `policy`.
    pub fn variance(&self, policy: &TruncationPolicy) -> Result<f64> {
        policy.validate()?;
        variance_lnq(self.ln_q(), self.beta, policy)
    }

    /// Draw `n` values by inverse transform on uniforms from the open (0, 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<u64> {
        let ln_q = self.ln_q();
        (0..n).map(|_| sample_one_lnq(rng, ln_q, self.beta)).collect()
    }
}

/// q^(y^β) = exp(y^β · ln q) for real y ≥ 0.
pub(crate) fn sf_lnq(y: f64, ln_q: f64, beta: f64) -> f64 {
    (y.powf(beta) * ln_q).exp()
}

pub(crate) fn cdf_lnq(y: i64, ln_q: f64, beta: f64) -> f64 {
    if y < 0 {
        return 0.0;
    }
    1.0 - sf_lnq((y + 1) as f64, ln_q, beta)
}

/// log f(y) = s(y) + ln(1 − exp(s(y+1) − s(y))) with s(y) = y^β ln q.
pub(crate) fn ln_pmf_lnq(y: u64, ln_q: f64, beta: f64) -> f64 {
    let ls1 = (y as f64).powf(beta) * ln_q;
    let ls2 = ((y + 1) as f64).powf(beta) * ln_q;
    // ls2 < ls1 ≤ 0, so expm1(ls2 - ls1) is in (−1, 0)
    ls1 + (-((ls2 - ls1).exp_m1())).ln()
}

/// Closed-form quantile: 0 when τ < 1 − q, otherwise
/// ⌈(ln(1−τ)/ln q)^(1/β) − 1⌉ with a 1e-9 downward nudge before the ceiling so
/// exact integer crossings are not pushed one step up by rounding noise.
pub(crate) fn quantile_lnq(tau: f64, ln_q: f64, beta: f64) -> u64 {
    if tau < -ln_q.exp_m1() {
        return 0;
    }
    let x = ((-tau).ln_1p() / ln_q).powf(1.0 / beta) - 1.0;
    let snapped = (x - 1e-9).ceil();
    if snapped <= 0.0 {
        0
    } else {
        snapped as u64
    }
}

pub(crate) fn sample_one_lnq<R: Rng + ?Sized>(rng: &mut R, ln_q: f64, beta: f64) -> u64 {
    let u: f64 = rng.sample(Open01);
    quantile_lnq(u, ln_q, beta)
}

/// Σ_{y≥1} q^(y^β) (unweighted) or Σ_{y≥1} y q^(y^β) (weighted).
fn tail_series(ln_q: f64, beta: f64, weight_by_y: bool, policy: &TruncationPolicy) -> Result<f64> {
    let mut sum = 0.0;
    let mut y = 1u64;
    loop {
        let base = sf_lnq(y as f64, ln_q, beta);
        let term = if weight_by_y { y as f64 * base } else { base };
        sum += term;
        if term < policy.term_tolerance {
            return Ok(sum);
        }
        if y >= policy.max_terms {
            return Err(Error::SeriesTruncated {
                max_terms: policy.max_terms,
                last_term: term,
            });
        }
        y += 1;
    }
}

pub(crate) fn mean_lnq(ln_q: f64, beta: f64, policy: &TruncationPolicy) -> Result<f64> {
    tail_series(ln_q, beta, false, policy)
}

pub(crate) fn variance_lnq(ln_q: f64, beta: f64, policy: &TruncationPolicy) -> Result<f64> {
    let mu = tail_series(ln_q, beta, false, policy)?;
    let weighted = tail_series(ln_q, beta, true, policy)?;
    Ok((2.0 * weighted - mu - mu * mu).max(0.0))
}
