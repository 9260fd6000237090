//! Model-adequacy checks for fitted count models: randomized quantile
//! residuals with a Kolmogorov-Smirnov normality test, simulation envelopes
//! for Q-Q plots, variance-ratio (dispersion) reports over fitted groups,
//! observed-vs-expected frequency tables, and the likelihood-ratio test.
//!
//! Every stochastic routine takes an explicit `seed` and derives its draws
//! from counter-based streams, so results are reproducible and independent of
//! evaluation order; the seed is echoed in each report.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::distribution::DWParams;
use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::regression::CountModel;
use crate::special::{chi_square_sf, inverse_normal_cdf, kolmogorov_sf, normal_cdf};

/// Randomized quantile residuals plus their normality test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    /// One residual per observation, in dataset order.
    pub residuals: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub seed: u64,
}

/// Pointwise simulation envelope for a normal Q-Q plot of the residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QQEnvelope {
    /// Observed residuals, sorted ascending.
    pub sorted_residuals: Vec<f64>,
    /// Standard normal quantiles at (i − 1/2)/n.
    pub theoretical_quantiles: Vec<f64>,
    /// Per-position lower band edge across the simulated replicates.
    pub lower: Vec<f64>,
    /// Per-position upper band edge.
    pub upper: Vec<f64>,
    pub band_level: f64,
    pub replicate_count: usize,
    pub seed: u64,
}

/// Observed/theoretical variance ratio within one fitted-predictor group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDispersion {
    pub group_size: usize,
    pub mean_linear_predictor: f64,
    pub observed_variance: f64,
    pub mean_theoretical_variance: f64,
    /// observed / theoretical; above 1 the model under-states the spread.
    pub variance_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub group_count: usize,
    pub groups: Vec<GroupDispersion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyRow {
    /// Count value, or the pooling threshold for the tail row.
    pub value: u64,
    /// True on the final row, which pools all values ≥ `value`.
    pub tail: bool,
    pub observed: usize,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
    pub tail_threshold: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Draw u uniformly from the half-open interval (lower, upper] and map it
/// through the standard normal quantile. Draws that land on 0, 1, or the
/// excluded lower endpoint through rounding are rejected and retried.
fn residual_from_interval<R: Rng + ?Sized>(
    rng: &mut R,
    lower: f64,
    upper: f64,
    index: usize,
    y: u64,
) -> Result<f64> {
    let width = upper - lower;
    if width.is_nan() || width <= 0.0 {
        return Err(Error::ZeroWidthResidualInterval { index, y });
    }
    for _ in 0..100 {
        let v: f64 = rng.sample(Open01);
        let u = upper - width * v;
        if u > lower && u <= upper && u > 0.0 && u < 1.0 {
            return Ok(inverse_normal_cdf(u));
        }
    }
    // only reachable when the interval is so narrow that every draw rounds
    // onto an excluded endpoint
    Err(Error::ZeroWidthResidualInterval { index, y })
}

/// Randomized quantile residuals of `data` under a fitted conditional model:
/// r_i = Φ⁻¹(u_i) with u_i uniform on (F(y_i − 1 | x_i), F(y_i | x_i)].
/// Exactly standard normal when the model is the truth.
pub fn randomized_quantile_residuals(
    model: &dyn CountModel,
    data: &Dataset,
    seed: u64,
) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residuals = residual_pass(model, data, &mut rng)?;
    let (ks_statistic, ks_p_value) = ks_normality_test(&residuals)?;
    Ok(ResidualReport {
        residuals,
        ks_statistic,
        ks_p_value,
        seed,
    })
}

/// Same construction for an i.i.d. sample under fixed (q, β).
pub fn randomized_quantile_residuals_iid(
    sample: &[u64],
    params: &DWParams,
    seed: u64,
) -> Result<ResidualReport> {
    if sample.is_empty() {
        return Err(Error::InvalidDataset("sample is empty".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = Vec::with_capacity(sample.len());
    for (index, &y) in sample.iter().enumerate() {
        let upper = params.cdf(y as i64);
        let lower = params.cdf(y as i64 - 1);
        residuals.push(residual_from_interval(&mut rng, lower, upper, index, y)?);
    }
    let (ks_statistic, ks_p_value) = ks_normality_test(&residuals)?;
    Ok(ResidualReport {
        residuals,
        ks_statistic,
        ks_p_value,
        seed,
    })
}

fn residual_pass<R: Rng + ?Sized>(
    model: &dyn CountModel,
    data: &Dataset,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut residuals = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let covariates = data.covariate_row(i);
        let y = data.response()[i];
        let upper = model.conditional_cdf(&covariates, y as i64)?;
        let lower = model.conditional_cdf(&covariates, y as i64 - 1)?;
        residuals.push(residual_from_interval(rng, lower, upper, i, y)?);
    }
    Ok(residuals)
}

/// One-sample Kolmogorov-Smirnov test against the standard normal. Returns
/// (D, p) with the asymptotic p-value P(K > √n·D) from the Kolmogorov series.
pub fn ks_normality_test(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::InvalidDataset("empty sample for the KS test".to_string()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "sample",
            reason: "KS test input contains a non-finite value".to_string(),
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal_cdf(x);
        let above = (i as f64 + 1.0) / n - phi;
        let below = phi - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok((d, kolmogorov_sf(n.sqrt() * d)))
}

/// Q-Q plot data with a pointwise simulation envelope: `replicate_count`
/// response vectors are drawn from the fitted model at the observed
/// covariates, their residuals recomputed and sorted, and each order statistic
/// banded at the (1 ± band_level)/2 sample quantiles. Replicate r draws from
/// stream r + 1 of the seed, the observed residuals from stream 0 (matching
/// [`randomized_quantile_residuals`] with the same seed).
pub fn qq_envelope(
    model: &dyn CountModel,
    data: &Dataset,
    replicate_count: usize,
    band_level: f64,
    seed: u64,
) -> Result<QQEnvelope> {
    if replicate_count < 2 {
        return Err(Error::InvalidArgument {
            name: "replicate_count",
            reason: format!("need at least 2 envelope replicates, got {replicate_count}"),
        });
    }
    if !(band_level.is_finite() && band_level > 0.0 && band_level < 1.0) {
        return Err(Error::InvalidArgument {
            name: "band_level",
            reason: format!("band level must lie in (0, 1), got {band_level}"),
        });
    }
    let n = data.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorted_residuals = residual_pass(model, data, &mut rng)?;
    sorted_residuals.sort_by(f64::total_cmp);

    let theoretical_quantiles: Vec<f64> = (1..=n)
        .map(|i| inverse_normal_cdf((i as f64 - 0.5) / n as f64))
        .collect();

    let covariate_rows: Vec<Vec<f64>> = (0..n).map(|i| data.covariate_row(i)).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(replicate_count); n];
    for r in 0..replicate_count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64 + 1);
        let mut replicate = Vec::with_capacity(n);
        for (i, row) in covariate_rows.iter().enumerate() {
            let y = model.sample_response(row, &mut rng)?;
            let upper = model.conditional_cdf(row, y as i64)?;
            let lower = model.conditional_cdf(row, y as i64 - 1)?;
            replicate.push(residual_from_interval(&mut rng, lower, upper, i, y)?);
        }
        replicate.sort_by(f64::total_cmp);
        for (i, value) in replicate.into_iter().enumerate() {
            columns[i].push(value);
        }
    }

    // order-statistic band: with R replicates and tail mass (1−level)/2 per
    // side, take the k-th and (R+1−k)-th sorted values, k = ⌈(1−level)/2 · R⌉
    let k = (((1.0 - band_level) / 2.0) * replicate_count as f64).ceil() as usize;
    let k = k.max(1);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for column in columns.iter_mut() {
        column.sort_by(f64::total_cmp);
        lower.push(column[k - 1]);
        upper.push(column[replicate_count - k]);
    }

    Ok(QQEnvelope {
        sorted_residuals,
        theoretical_quantiles,
        lower,
        upper,
        band_level,
        replicate_count,
        seed,
    })
}

/// Split observations into `group_count` contiguous chunks after sorting by
/// the fitted linear predictor (group sizes differ by at most one), then
/// compare the observed response variance in each chunk with the mean fitted
/// variance there.
pub fn dispersion_ratio_report(
    model: &dyn CountModel,
    data: &Dataset,
    group_count: usize,
) -> Result<DispersionReport> {
    let n = data.n();
    if group_count == 0 || group_count > n {
        return Err(Error::InvalidArgument {
            name: "group_count",
            reason: format!("group count must lie in 1..={n}, got {group_count}"),
        });
    }

    let mut eta = Vec::with_capacity(n);
    let mut theoretical = Vec::with_capacity(n);
    for i in 0..n {
        let covariates = data.covariate_row(i);
        eta.push(model.linear_predictor(&covariates)?);
        theoretical.push(model.conditional_variance(&covariates)?);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]).then(a.cmp(&b)));

    let base = n / group_count;
    let remainder = n % group_count;
    let mut groups = Vec::with_capacity(group_count);
    let mut cursor = 0usize;
    for g in 0..group_count {
        let size = base + usize::from(g < remainder);
        if size < 2 {
            return Err(Error::GroupTooSmall { group: g + 1, size });
        }
        let members = &order[cursor..cursor + size];
        cursor += size;

        let mean_y = members
            .iter()
            .map(|&i| data.response()[i] as f64)
            .sum::<f64>()
            / size as f64;
        let observed_variance = members
            .iter()
            .map(|&i| {
                let d = data.response()[i] as f64 - mean_y;
                d * d
            })
            .sum::<f64>()
            / (size as f64 - 1.0);
        let mean_theoretical_variance =
            members.iter().map(|&i| theoretical[i]).sum::<f64>() / size as f64;
        if mean_theoretical_variance.is_nan() || mean_theoretical_variance <= 0.0 {
            return Err(Error::NonFinite {
                context: format!("group {} has nonpositive fitted variance", g + 1),
            });
        }
        let mean_linear_predictor = members.iter().map(|&i| eta[i]).sum::<f64>() / size as f64;
        groups.push(GroupDispersion {
            group_size: size,
            mean_linear_predictor,
            observed_variance,
            mean_theoretical_variance,
            variance_ratio: observed_variance / mean_theoretical_variance,
        });
    }

    Ok(DispersionReport {
        group_count,
        groups,
    })
}

/// Observed vs model-expected frequencies for counts 0..tail_threshold−1, with
/// everything ≥ tail_threshold pooled into a final tail row. Expected counts
/// sum over observations, so the whole table totals n.
pub fn frequency_table(
    model: &dyn CountModel,
    data: &Dataset,
    tail_threshold: u64,
) -> Result<FrequencyTable> {
    if tail_threshold == 0 {
        return Err(Error::InvalidArgument {
            name: "tail_threshold",
            reason: "tail threshold must be at least 1".to_string(),
        });
    }
    let n = data.n();
    let mut rows: Vec<FrequencyRow> = (0..tail_threshold)
        .map(|value| FrequencyRow {
            value,
            tail: false,
            observed: 0,
            expected: 0.0,
        })
        .collect();
    let mut tail_row = FrequencyRow {
        value: tail_threshold,
        tail: true,
        observed: 0,
        expected: 0.0,
    };

    for i in 0..n {
        let covariates = data.covariate_row(i);
        let y = data.response()[i];
        if y < tail_threshold {
            rows[y as usize].observed += 1;
        } else {
            tail_row.observed += 1;
        }
        for row in rows.iter_mut() {
            row.expected += model.conditional_pmf(&covariates, row.value)?;
        }
        tail_row.expected += 1.0 - model.conditional_cdf(&covariates, tail_threshold as i64 - 1)?;
    }
    rows.push(tail_row);
    Ok(FrequencyTable {
        rows,
        tail_threshold,
    })
}

/// Likelihood-ratio test of a nested pair: 2(ℓ_alt − ℓ_null) against
/// chi-square with df = the parameter-count difference.
pub fn likelihood_ratio_test(null: &FitResult, alt: &FitResult) -> Result<LrTest> {
    if null.n_obs != alt.n_obs {
        return Err(Error::NotNested(format!(
            "fits use different observation counts ({} vs {})",
            null.n_obs, alt.n_obs
        )));
    }
    if alt.n_params < null.n_params {
        return Err(Error::NotNested(format!(
            "the alternative has fewer parameters ({}) than the null ({})",
            alt.n_params, null.n_params
        )));
    }
    let df = alt.n_params - null.n_params;
    let raw = 2.0 * (alt.loglik - null.loglik);
    if raw < -1e-6 {
        return Err(Error::NegativeLrStatistic { statistic: raw });
    }
    let statistic = raw.max(0.0);
    if df == 0 {
        if statistic > 1e-6 {
            return Err(Error::NotNested(
                "equal parameter counts with different likelihoods cannot form a nested pair"
                    .to_string(),
            ));
        }
        return Ok(LrTest {
            statistic,
            df,
            p_value: 1.0,
        });
    }
    Ok(LrTest {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DMatrix;

    #[test]
    fn ks_on_perfect_normal_scores_is_tiny() {
        let n = 1000;
        let sample: Vec<f64> = (1..=n)
            .map(|i| inverse_normal_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let (d, p) = ks_normality_test(&sample).unwrap();
        assert!(d < 0.001, "D = {d}");
        assert!(p > 0.999, "p = {p}");
        assert_abs_diff_eq!(d, 0.5 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn ks_rejects_an_obviously_shifted_sample() {
        let n = 500;
        let sample: Vec<f64> = (1..=n)
            .map(|i| 1.5 + inverse_normal_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let (_, p) = ks_normality_test(&sample).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn ks_input_validation() {
        assert!(ks_normality_test(&[]).is_err());
        assert!(ks_normality_test(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn lr_test_matches_frozen_chi_square_values() {
        let vcov = DMatrix::zeros(2, 2);
        let null = FitResult::from_parts(
            vec!["a".into(), "b".into()],
            vec![0.0, 0.0],
            -320.0,
            &vcov,
            true,
            108,
            0,
        );
        let vcov3 = DMatrix::zeros(3, 3);
        let alt = FitResult::from_parts(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.0, 0.0, 0.0],
            -320.0 + 73.024 / 2.0,
            &vcov3,
            true,
            108,
            0,
        );
        let lr = likelihood_ratio_test(&null, &alt).unwrap();
        assert_eq!(lr.df, 1);
        assert_relative_eq!(lr.statistic, 73.024, max_relative = 1e-12);
        assert_relative_eq!(lr.p_value, 1.280_828_245_404_357e-17, max_relative = 1e-9);
    }

    #[test]
    fn lr_test_edge_cases() {
        let vcov = DMatrix::zeros(1, 1);
        let a = FitResult::from_parts(vec!["a".into()], vec![0.0], -10.0, &vcov, true, 50, 0);
        let b = FitResult::from_parts(vec!["a".into()], vec![0.0], -10.0, &vcov, true, 50, 0);
        let same = likelihood_ratio_test(&a, &b).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);

        let worse = FitResult::from_parts(
            vec!["a".into(), "b".into()],
            vec![0.0, 0.0],
            -11.0,
            &DMatrix::zeros(2, 2),
            true,
            50,
            0,
        );
        assert!(matches!(
            likelihood_ratio_test(&a, &worse),
            Err(Error::NegativeLrStatistic { .. })
        ));

        let other_n = FitResult::from_parts(vec!["a".into()], vec![0.0], -9.0, &vcov, true, 51, 0);
        assert!(matches!(
            likelihood_ratio_test(&a, &other_n),
            Err(Error::NotNested(_))
        ));
    }
}
