//! CSV and plain-text renderings of the command payloads. JSON is the
//! primary format; CSV exports the most table-like artifact of each command
//! (for `diagnose` that is the Q-Q plot data), and text is a human summary.

use std::fmt::Write as _;

use crate::payloads::*;
use crate::CliError;

fn csv_from_rows(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .and_then(|_| rows.iter().try_for_each(|r| writer.write_record(r)))
        .map_err(|e| CliError::data(format!("cannot render CSV: {e}")))?;
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::data(format!("cannot render CSV: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::data(format!("CSV is not valid UTF-8: {e}")))
}

fn fnum(v: f64) -> String {
    format!("{v:.6}")
}

// ---------- fit / compare ----------

fn model_rows(report: &ModelReport) -> Vec<Vec<String>> {
    let fit = &report.fit;
    fit.parameter_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            vec![
                report.model.clone(),
                name.clone(),
                fnum(fit.estimates[i]),
                fnum(fit.standard_error(i).unwrap_or(f64::NAN)),
                fnum(fit.loglik),
                fnum(fit.aic),
                fnum(fit.bic),
            ]
        })
        .collect()
}

pub fn fit_csv(payload: &FitPayload) -> Result<String, CliError> {
    let rows = payload.models.iter().flat_map(model_rows).collect();
    csv_from_rows(
        &["model", "parameter", "estimate", "std_error", "loglik", "aic", "bic"],
        rows,
    )
}

pub fn compare_csv(payload: &ComparePayload) -> Result<String, CliError> {
    let rows = payload
        .models
        .iter()
        .map(|m| {
            vec![
                m.model.clone(),
                m.fit.n_params.to_string(),
                fnum(m.fit.loglik),
                fnum(m.fit.aic),
                fnum(m.fit.bic),
            ]
        })
        .collect();
    csv_from_rows(&["model", "n_params", "loglik", "aic", "bic"], rows)
}

fn model_text(out: &mut String, report: &ModelReport) {
    let fit = &report.fit;
    let _ = writeln!(
        out,
        "model {} (n = {}, loglik = {:.4}, aic = {:.4}, bic = {:.4}, iterations = {})",
        report.model, fit.n_obs, fit.loglik, fit.aic, fit.bic, fit.iterations
    );
    let _ = writeln!(out, "  {:<16} {:>12} {:>12}", "parameter", "estimate", "std_error");
    for (i, name) in fit.parameter_names.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:<16} {:>12.5} {:>12.5}",
            name,
            fit.estimates[i],
            fit.standard_error(i).unwrap_or(f64::NAN)
        );
    }
    if let Some(interp) = &report.interpretation {
        let _ = writeln!(out, "  median-scale effects (change in ln(median + 1)):");
        if let Some(base) = interp.baseline {
            let _ = writeln!(out, "    baseline {base:.5}");
        }
        for (name, effect) in interp.names.iter().zip(&interp.effects) {
            let _ = writeln!(out, "    {name:<14} {effect:.5}");
        }
    }
}

pub fn fit_text(payload: &FitPayload) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fit of {} (response {}, covariates [{}], intercept: {})",
        payload.input,
        payload.response,
        payload.covariates.join(", "),
        payload.add_intercept
    );
    for model in &payload.models {
        model_text(&mut out, model);
    }
    if payload.nb_boundary {
        let _ = writeln!(
            out,
            "note: the negative binomial dispersion diverged (no overdispersion); use the Poisson fit"
        );
    }
    out
}

pub fn compare_text(payload: &ComparePayload) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "model comparison on {} (n = {})",
        payload.input, payload.n_obs
    );
    let _ = writeln!(
        out,
        "  {:<20} {:>8} {:>12} {:>12} {:>12}",
        "model", "params", "loglik", "aic", "bic"
    );
    for m in &payload.models {
        let _ = writeln!(
            out,
            "  {:<20} {:>8} {:>12.4} {:>12.4} {:>12.4}",
            m.model, m.fit.n_params, m.fit.loglik, m.fit.aic, m.fit.bic
        );
    }
    if let Some(lr) = &payload.lr_nb_vs_poisson {
        let _ = writeln!(
            out,
            "  LR test NB vs Poisson: statistic = {:.4}, df = {}, p = {:.4e}",
            lr.statistic, lr.df, lr.p_value
        );
    }
    if payload.nb_boundary {
        let _ = writeln!(
            out,
            "  note: negative binomial dispersion diverged; the Poisson fit is the usable baseline"
        );
    }
    for m in &payload.models {
        if let Some(interp) = &m.interpretation {
            let _ = writeln!(out, "  {} median-scale effects:", m.model);
            if let Some(base) = interp.baseline {
                let _ = writeln!(out, "    baseline {base:.5}");
            }
            for (name, effect) in interp.names.iter().zip(&interp.effects) {
                let _ = writeln!(out, "    {name:<14} {effect:.5}");
            }
        }
    }
    out
}

// ---------- diagnose ----------

pub fn diagnose_csv(payload: &DiagnosePayload) -> Result<String, CliError> {
    let env = &payload.envelope;
    let rows = (0..env.sorted_residuals.len())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                fnum(env.theoretical_quantiles[i]),
                fnum(env.sorted_residuals[i]),
                fnum(env.lower[i]),
                fnum(env.upper[i]),
            ]
        })
        .collect();
    csv_from_rows(
        &["position", "theoretical", "residual", "band_lower", "band_upper"],
        rows,
    )
}

pub fn diagnose_text(payload: &DiagnosePayload) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "diagnostics for {} on {} (n = {}, seed = {})",
        payload.model, payload.input, payload.n_obs, payload.residuals.seed
    );
    let _ = writeln!(
        out,
        "  residual normality: KS D = {:.5}, p = {:.4}",
        payload.residuals.ks_statistic, payload.residuals.ks_p_value
    );
    let inside = payload
        .envelope
        .sorted_residuals
        .iter()
        .zip(payload.envelope.lower.iter().zip(&payload.envelope.upper))
        .filter(|(r, (lo, hi))| r >= lo && r <= hi)
        .count();
    let _ = writeln!(
        out,
        "  Q-Q envelope ({} replicates, level {:.2}): {}/{} residuals inside the band",
        payload.envelope.replicate_count,
        payload.envelope.band_level,
        inside,
        payload.envelope.sorted_residuals.len()
    );
    let _ = writeln!(out, "  dispersion by fitted-predictor group:");
    let _ = writeln!(
        out,
        "    {:<6} {:>6} {:>12} {:>14} {:>10}",
        "group", "size", "observed", "theoretical", "ratio"
    );
    for (g, group) in payload.dispersion.groups.iter().enumerate() {
        let _ = writeln!(
            out,
            "    {:<6} {:>6} {:>12.4} {:>14.4} {:>10.4}",
            g + 1,
            group.group_size,
            group.observed_variance,
            group.mean_theoretical_variance,
            group.variance_ratio
        );
    }
    let _ = writeln!(out, "  observed vs expected frequencies:");
    let _ = writeln!(out, "    {:<8} {:>9} {:>10}", "count", "observed", "expected");
    for row in &payload.frequency.rows {
        let label = if row.tail {
            format!("{}+", row.value)
        } else {
            row.value.to_string()
        };
        let _ = writeln!(out, "    {:<8} {:>9} {:>10.2}", label, row.observed, row.expected);
    }
    out
}

// ---------- simulate ----------

pub fn recovery_csv(payload: &RecoveryPayload) -> Result<String, CliError> {
    let rows = payload
        .study
        .parameters
        .iter()
        .map(|p| {
            vec![
                p.name.clone(),
                fnum(p.truth),
                fnum(p.mean_estimate),
                fnum(p.bias),
                fnum(p.mse),
                fnum(p.mean_ci_length),
            ]
        })
        .collect();
    csv_from_rows(
        &["parameter", "truth", "mean_estimate", "bias", "mse", "mean_ci_length"],
        rows,
    )
}

pub fn recovery_text(payload: &RecoveryPayload) -> String {
    let mut out = String::new();
    let study = &payload.study;
    let _ = writeln!(
        out,
        "parameter recovery: n = {}, replicates = {} ({} failed), seed = {}",
        study.n_obs, study.replicate_count, study.failed_replicates, study.master_seed
    );
    let _ = writeln!(
        out,
        "  {:<14} {:>9} {:>12} {:>10} {:>10} {:>10}",
        "parameter", "truth", "mean est.", "bias", "mse", "ci length"
    );
    for p in &study.parameters {
        let _ = writeln!(
            out,
            "  {:<14} {:>9.4} {:>12.4} {:>10.4} {:>10.4} {:>10.4}",
            p.name, p.truth, p.mean_estimate, p.bias, p.mse, p.mean_ci_length
        );
    }
    out
}

pub fn map_csv(payload: &MapPayload) -> Result<String, CliError> {
    let rows = payload
        .map
        .cells
        .iter()
        .map(|c| {
            vec![
                fnum(c.q),
                fnum(c.beta),
                fnum(c.sample_mean),
                fnum(c.sample_variance),
                fnum(c.vr_poisson),
                fnum(c.vr_nb),
                c.nb_boundary.to_string(),
                c.nb_k.map(fnum).unwrap_or_default(),
            ]
        })
        .collect();
    csv_from_rows(
        &["q", "beta", "sample_mean", "sample_variance", "vr_poisson", "vr_nb", "nb_boundary", "nb_k"],
        rows,
    )
}

pub fn map_text(payload: &MapPayload) -> String {
    let map = &payload.map;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dispersion map: {} draws per cell, seed = {} (entries are VR against Poisson)",
        map.n_per_cell, map.master_seed
    );
    let _ = write!(out, "  {:>6}", "beta\\q");
    for q in &map.q_grid {
        let _ = write!(out, " {q:>7.2}");
    }
    let _ = writeln!(out);
    for (row, beta) in map.beta_grid.iter().enumerate() {
        let _ = write!(out, "  {beta:>6.2}");
        for col in 0..map.q_grid.len() {
            let cell = &map.cells[row * map.q_grid.len() + col];
            let _ = write!(out, " {:>7.3}", cell.vr_poisson);
        }
        let _ = writeln!(out);
    }
    out
}

// ---------- predict ----------

pub fn predict_csv(payload: &PredictPayload) -> Result<String, CliError> {
    let mut header: Vec<String> = vec!["row".to_string()];
    header.extend(payload.covariates.iter().cloned());
    header.push("median".to_string());
    header.push("mean".to_string());
    if let Some(first) = payload.rows.first() {
        for q in &first.quantiles {
            header.push(format!("q{}", q.tau));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = payload
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.row.to_string()];
            row.extend(r.covariates.iter().map(|v| fnum(*v)));
            row.push(r.median.to_string());
            row.push(r.mean.map(fnum).unwrap_or_default());
            row.extend(r.quantiles.iter().map(|q| q.value.to_string()));
            row
        })
        .collect();
    csv_from_rows(&header_refs, rows)
}

pub fn predict_text(payload: &PredictPayload) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "predictions from {} on {}",
        payload.fit_file, payload.input
    );
    for r in &payload.rows {
        let covs: Vec<String> = payload
            .covariates
            .iter()
            .zip(&r.covariates)
            .map(|(n, v)| format!("{n} = {v}"))
            .collect();
        let quantiles: Vec<String> = r
            .quantiles
            .iter()
            .map(|q| format!("Q({}) = {}", q.tau, q.value))
            .collect();
        let mean = r.mean.map(|m| format!(", mean = {m:.4}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "  row {}: {} -> median = {}{}{}",
            r.row,
            covs.join(", "),
            r.median,
            mean,
            if quantiles.is_empty() {
                String::new()
            } else {
                format!(", {}", quantiles.join(", "))
            }
        );
    }
    out
}
