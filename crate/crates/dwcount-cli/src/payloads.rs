//! Serializable result schemas for the JSON output mode. Every artifact is
//! wrapped in an [`Envelope`] carrying the schema version, the subcommand
//! name, and the seed (when the command consumed one), so downstream tooling
//! can rely on a stable shape and reruns can be checked for identity.

use dwcount::{
    CoefficientInterpretation, DWRegressionFit, DispersionMap, DispersionReport, FitResult,
    FrequencyTable, LrTest, QQEnvelope, ResidualReport, SimulationStudyConfig, StudyResult,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    /// Seed consumed by the command; null for fully deterministic commands.
    pub seed: Option<u64>,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &'static str, seed: Option<u64>, result: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            seed,
            result,
        }
    }
}

/// One fitted model inside a `fit`/`compare` payload.
#[derive(Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub fit: FitResult,
    /// Median-scale reading of the coefficients (discrete Weibull only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<CoefficientInterpretation>,
}

#[derive(Serialize)]
pub struct FitPayload {
    pub input: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub add_intercept: bool,
    pub n_obs: usize,
    pub models: Vec<ModelReport>,
    /// True when a requested negative binomial fit hit the k → ∞ boundary;
    /// its entry is then absent from `models`.
    pub nb_boundary: bool,
    /// Full discrete Weibull fit for reuse by `predict`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dw_model: Option<DWRegressionFit>,
}

#[derive(Serialize)]
pub struct ComparePayload {
    pub input: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub add_intercept: bool,
    pub n_obs: usize,
    pub models: Vec<ModelReport>,
    pub nb_boundary: bool,
    /// Likelihood-ratio test of NB against its Poisson null (absent when the
    /// NB fit diverged).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_nb_vs_poisson: Option<LrTest>,
}

#[derive(Serialize)]
pub struct DiagnosePayload {
    pub input: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub add_intercept: bool,
    pub n_obs: usize,
    pub model: String,
    pub fit: FitResult,
    pub residuals: ResidualReport,
    pub envelope: QQEnvelope,
    pub dispersion: DispersionReport,
    pub frequency: FrequencyTable,
}

#[derive(Serialize)]
pub struct RecoveryPayload {
    pub config: SimulationStudyConfig,
    pub study: StudyResult,
}

#[derive(Serialize)]
pub struct MapPayload {
    pub map: DispersionMap,
}

#[derive(Serialize)]
pub struct QuantileValue {
    pub tau: f64,
    pub value: u64,
}

#[derive(Serialize)]
pub struct PredictRow {
    /// 1-based data row in the input file.
    pub row: usize,
    pub covariates: Vec<f64>,
    pub median: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    pub quantiles: Vec<QuantileValue>,
}

#[derive(Serialize)]
pub struct PredictPayload {
    pub fit_file: String,
    pub input: String,
    pub covariates: Vec<String>,
    pub rows: Vec<PredictRow>,
}
