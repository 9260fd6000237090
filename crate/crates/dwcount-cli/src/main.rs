//! `dwcount` — fit and check count models built on the type-1 discrete
//! Weibull distribution, with Poisson and negative binomial baselines.
//!
//! Subcommands: `fit`, `compare`, `diagnose`, `simulate recovery`,
//! `simulate dispersion-map`, and `predict`. Results go to stdout (or
//! `--output`) as JSON (default), CSV, or a plain-text summary. Exit codes:
//! 0 success, 2 usage errors, 3 data/ingestion errors, 4 numerical failures.

mod ingest;
mod payloads;
mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dwcount::{
    default_dispersion_grids, dispersion_map, dispersion_ratio_report, fit_dw_regression,
    fit_nb_regression, fit_poisson_glm, frequency_table, likelihood_ratio_test, qq_envelope,
    randomized_quantile_residuals, run_simulation_study, CountModel, CovariateSpec,
    DWRegressionFit, Error as DwError, OptimizerConfig, SimulationStudyConfig,
};

use payloads::{
    ComparePayload, DiagnosePayload, Envelope, FitPayload, MapPayload, ModelReport,
    PredictPayload, PredictRow, QuantileValue, RecoveryPayload, SCHEMA_VERSION,
};

/// A failure with the process exit code it should produce.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<DwError> for CliError {
    fn from(e: DwError) -> Self {
        let code = match &e {
            DwError::InvalidDataset(_) | DwError::RankDeficient { .. } => 3,
            DwError::InvalidArgument { .. } | DwError::InvalidParameter { .. } => 2,
            _ => 4,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(
    name = "dwcount",
    version,
    about = "Discrete Weibull count models: fitting, diagnostics, and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one or more count models to a CSV dataset
    Fit(FitArgs),
    /// Fit all three models, rank them by AIC/BIC, and test NB against Poisson
    Compare(CompareArgs),
    /// Residual, dispersion, and frequency diagnostics for one fitted model
    Diagnose(DiagnoseArgs),
    /// Monte Carlo studies of the estimators
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Medians and quantiles at new covariate values from a saved fit
    Predict(PredictArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Response column holding nonnegative integer counts
    #[arg(long)]
    response: String,
    /// Comma-separated covariate columns (omit for an intercept-only model)
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Drop the intercept from the design
    #[arg(long)]
    no_intercept: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Write the result to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    /// Discrete Weibull regression
    Dw,
    /// Poisson log-linear regression
    Poisson,
    /// Negative binomial (NB2) regression
    Nb,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Dw => "dw",
            ModelKind::Poisson => "poisson",
            ModelKind::Nb => "nb",
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Models to fit, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dw")]
    model: Vec<ModelKind>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Model to diagnose
    #[arg(long, value_enum, default_value_t = ModelKind::Dw)]
    model: ModelKind,
    /// Seed for the randomized residuals and the envelope replicates
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulated replicates behind the Q-Q envelope
    #[arg(long, default_value_t = 99)]
    replicates: usize,
    /// Pointwise coverage level of the envelope band
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Number of fitted-predictor groups in the variance-ratio table
    #[arg(long, default_value_t = 5)]
    groups: usize,
    /// Pool observed/expected frequencies at and above this count
    #[arg(long, default_value_t = 10)]
    tail_from: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Parameter recovery study for the discrete Weibull regression MLE
    Recovery(RecoveryArgs),
    /// Sample-dispersion map over a (q, beta) grid
    DispersionMap(DispersionMapArgs),
}

#[derive(Args)]
struct RecoveryArgs {
    /// Observations per replicate
    #[arg(long, default_value_t = 300)]
    n_obs: usize,
    /// Number of Monte Carlo replicates
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// True coefficients, intercept first, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0.5,0.4,-0.3"
    )]
    alpha: Vec<f64>,
    /// True shape parameter
    #[arg(long, default_value_t = 1.6)]
    beta: f64,
    /// Covariate generator per non-intercept coefficient:
    /// `normal` or `uniform:<low>:<high>`
    #[arg(long = "covariate", value_name = "SPEC", default_values = ["normal", "uniform:0:10"])]
    covariates: Vec<String>,
    /// Level of the Wald intervals summarized by mean length
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Master seed; replicate r draws from stream r + 1
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DispersionMapArgs {
    /// Comma-separated q grid, each value in (0, 1); default 0.1..0.9
    #[arg(long, value_delimiter = ',')]
    q_grid: Vec<f64>,
    /// Comma-separated beta grid; default 0.5,1,1.3,1.6,2,2.5,5
    #[arg(long, value_delimiter = ',')]
    beta_grid: Vec<f64>,
    /// Monte Carlo draws per grid cell
    #[arg(long, default_value_t = 100_000)]
    n_per_cell: usize,
    /// Master seed; each cell draws from its own stream
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// JSON file written by `dwcount fit` containing a discrete Weibull model
    #[arg(long)]
    fit: PathBuf,
    /// CSV file holding the fit's covariate columns
    #[arg(long)]
    input: PathBuf,
    /// Extra quantile levels to report, comma separated, each in (0, 1)
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    /// Also report the fitted mean of each row
    #[arg(long)]
    mean: bool,
    #[command(flatten)]
    output: OutputArgs,
}

/// The slice of a saved `fit` JSON document that `predict` needs back.
#[derive(Deserialize)]
struct SavedFitFile {
    schema_version: u32,
    result: SavedFitResult,
}

#[derive(Deserialize)]
struct SavedFitResult {
    dw_model: Option<DWRegressionFit>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Simulate(SimulateCommand::Recovery(args)) => cmd_recovery(args),
        Command::Simulate(SimulateCommand::DispersionMap(args)) => cmd_dispersion_map(args),
        Command::Predict(args) => cmd_predict(args),
    }
}

fn write_out(content: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit<T: Serialize>(
    envelope: Envelope<T>,
    out: &OutputArgs,
    csv: impl FnOnce(&T) -> Result<String, CliError>,
    text: impl FnOnce(&T) -> String,
) -> Result<(), CliError> {
    let content = match out.format {
        OutputFormat::Json => {
            let mut body = serde_json::to_string_pretty(&envelope)
                .map_err(|e| CliError::numeric(format!("cannot serialize the result: {e}")))?;
            body.push('\n');
            body
        }
        OutputFormat::Csv => csv(&envelope.result)?,
        OutputFormat::Text => text(&envelope.result),
    };
    write_out(&content, out.output.as_deref())
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let data = ingest::load_dataset(
        &args.input.input,
        &args.input.response,
        &args.input.covariates,
        !args.input.no_intercept,
    )?;
    let config = OptimizerConfig::default();

    let mut requested = Vec::new();
    for kind in &args.model {
        if !requested.contains(kind) {
            requested.push(*kind);
        }
    }

    let mut models = Vec::new();
    let mut nb_boundary = false;
    let mut dw_model = None;
    for kind in requested.iter().copied() {
        match kind {
            ModelKind::Dw => {
                let fitted = fit_dw_regression(&data, &config)?;
                models.push(ModelReport {
                    model: kind.name().to_string(),
                    fit: fitted.fit.clone(),
                    interpretation: Some(fitted.interpret_coefficients()),
                });
                dw_model = Some(fitted);
            }
            ModelKind::Poisson => {
                let fitted = fit_poisson_glm(&data)?;
                models.push(ModelReport {
                    model: kind.name().to_string(),
                    fit: fitted.fit,
                    interpretation: None,
                });
            }
            ModelKind::Nb => match fit_nb_regression(&data, &config) {
                Ok(fitted) => models.push(ModelReport {
                    model: kind.name().to_string(),
                    fit: fitted.fit,
                    interpretation: None,
                }),
                // with other models in play a diverged NB is a finding, not
                // a failure: flag it and keep the rest of the report
                Err(DwError::NbDispersionDiverged { .. }) if requested.len() > 1 => {
                    nb_boundary = true;
                }
                Err(e) => return Err(e.into()),
            },
        }
    }

    let payload = FitPayload {
        input: args.input.input.display().to_string(),
        response: args.input.response.clone(),
        covariates: args.input.covariates.clone(),
        add_intercept: !args.input.no_intercept,
        n_obs: data.n(),
        models,
        nb_boundary,
        dw_model,
    };
    emit(
        Envelope::new("fit", None, payload),
        &args.output,
        render::fit_csv,
        render::fit_text,
    )
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let data = ingest::load_dataset(
        &args.input.input,
        &args.input.response,
        &args.input.covariates,
        !args.input.no_intercept,
    )?;
    let config = OptimizerConfig::default();

    let dw = fit_dw_regression(&data, &config)?;
    let poisson = fit_poisson_glm(&data)?;
    let mut models = vec![
        ModelReport {
            model: "dw".to_string(),
            fit: dw.fit.clone(),
            interpretation: Some(dw.interpret_coefficients()),
        },
        ModelReport {
            model: "poisson".to_string(),
            fit: poisson.fit.clone(),
            interpretation: None,
        },
    ];
    let (lr_nb_vs_poisson, nb_boundary) = match fit_nb_regression(&data, &config) {
        Ok(nb) => {
            let lr = likelihood_ratio_test(&poisson.fit, &nb.fit)?;
            models.push(ModelReport {
                model: "nb".to_string(),
                fit: nb.fit,
                interpretation: None,
            });
            (Some(lr), false)
        }
        Err(DwError::NbDispersionDiverged { .. }) => (None, true),
        Err(e) => return Err(e.into()),
    };

    let payload = ComparePayload {
        input: args.input.input.display().to_string(),
        response: args.input.response.clone(),
        covariates: args.input.covariates.clone(),
        add_intercept: !args.input.no_intercept,
        n_obs: data.n(),
        models,
        nb_boundary,
        lr_nb_vs_poisson,
    };
    emit(
        Envelope::new("compare", None, payload),
        &args.output,
        render::compare_csv,
        render::compare_text,
    )
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let data = ingest::load_dataset(
        &args.input.input,
        &args.input.response,
        &args.input.covariates,
        !args.input.no_intercept,
    )?;
    let config = OptimizerConfig::default();
    let model: Box<dyn CountModel> = match args.model {
        ModelKind::Dw => Box::new(fit_dw_regression(&data, &config)?),
        ModelKind::Poisson => Box::new(fit_poisson_glm(&data)?),
        ModelKind::Nb => Box::new(fit_nb_regression(&data, &config)?),
    };

    let residuals = randomized_quantile_residuals(model.as_ref(), &data, args.seed)?;
    let envelope = qq_envelope(model.as_ref(), &data, args.replicates, args.level, args.seed)?;
    let dispersion = dispersion_ratio_report(model.as_ref(), &data, args.groups)?;
    let frequency = frequency_table(model.as_ref(), &data, args.tail_from)?;

    let payload = DiagnosePayload {
        input: args.input.input.display().to_string(),
        response: args.input.response.clone(),
        covariates: args.input.covariates.clone(),
        add_intercept: !args.input.no_intercept,
        n_obs: data.n(),
        model: model.model_name().to_string(),
        fit: model.fit_result().clone(),
        residuals,
        envelope,
        dispersion,
        frequency,
    };
    emit(
        Envelope::new("diagnose", Some(args.seed), payload),
        &args.output,
        render::diagnose_csv,
        render::diagnose_text,
    )
}

fn parse_covariate_spec(spec: &str) -> Result<CovariateSpec, CliError> {
    if spec == "normal" {
        return Ok(CovariateSpec::StandardNormal);
    }
    if let Some(rest) = spec.strip_prefix("uniform:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() == 2 {
            let lower: f64 = parts[0]
                .parse()
                .map_err(|_| CliError::usage(format!("bad uniform bound `{}`", parts[0])))?;
            let upper: f64 = parts[1]
                .parse()
                .map_err(|_| CliError::usage(format!("bad uniform bound `{}`", parts[1])))?;
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(CliError::usage(format!(
                    "uniform bounds must be finite with low < high, got `{spec}`"
                )));
            }
            return Ok(CovariateSpec::Uniform { lower, upper });
        }
    }
    Err(CliError::usage(format!(
        "unknown covariate spec `{spec}`; use `normal` or `uniform:<low>:<high>`"
    )))
}

fn cmd_recovery(args: RecoveryArgs) -> Result<(), CliError> {
    let covariates = args
        .covariates
        .iter()
        .map(|s| parse_covariate_spec(s))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SimulationStudyConfig {
        n_obs: args.n_obs,
        replicate_count: args.replicates,
        true_alpha: args.alpha.clone(),
        true_beta: args.beta,
        covariates,
        master_seed: args.seed,
        ci_level: args.ci_level,
    };
    config.validate()?;
    let study = run_simulation_study(&config)?;
    let payload = RecoveryPayload { config, study };
    emit(
        Envelope::new("simulate-recovery", Some(args.seed), payload),
        &args.output,
        render::recovery_csv,
        render::recovery_text,
    )
}

fn cmd_dispersion_map(args: DispersionMapArgs) -> Result<(), CliError> {
    let (default_q, default_beta) = default_dispersion_grids();
    let q_grid = if args.q_grid.is_empty() { default_q } else { args.q_grid.clone() };
    let beta_grid = if args.beta_grid.is_empty() { default_beta } else { args.beta_grid.clone() };
    let map = dispersion_map(&q_grid, &beta_grid, args.n_per_cell, args.seed)?;
    emit(
        Envelope::new("simulate-dispersion-map", Some(args.seed), MapPayload { map }),
        &args.output,
        render::map_csv,
        render::map_text,
    )
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let raw = fs::read_to_string(&args.fit)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.fit.display())))?;
    let saved: SavedFitFile = serde_json::from_str(&raw).map_err(|e| {
        CliError::data(format!("{} is not a saved fit: {e}", args.fit.display()))
    })?;
    if saved.schema_version != SCHEMA_VERSION {
        return Err(CliError::data(format!(
            "{} has schema version {}, this build reads version {SCHEMA_VERSION}",
            args.fit.display(),
            saved.schema_version
        )));
    }
    let model = saved.result.dw_model.ok_or_else(|| {
        CliError::usage(
            "the fit file holds no discrete Weibull model; create one with `dwcount fit --model dw`",
        )
    })?;

    let rows = ingest::load_covariate_rows(&args.input, &model.covariate_names)?;
    let mut out_rows = Vec::with_capacity(rows.len());
    for (i, covariates) in rows.iter().enumerate() {
        let median = model.fitted_median(covariates)?;
        let mean = args
            .mean
            .then(|| model.fitted_mean(covariates))
            .transpose()?;
        let quantiles = args
            .tau
            .iter()
            .map(|&tau| {
                model
                    .fitted_quantile(covariates, tau)
                    .map(|value| QuantileValue { tau, value })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out_rows.push(PredictRow {
            row: i + 1,
            covariates: covariates.clone(),
            median,
            mean,
            quantiles,
        });
    }

    let payload = PredictPayload {
        fit_file: args.fit.display().to_string(),
        input: args.input.display().to_string(),
        covariates: model.covariate_names.clone(),
        rows: out_rows,
    };
    emit(
        Envelope::new("predict", None, payload),
        &args.output,
        render::predict_csv,
        render::predict_text,
    )
}
