use crate::estimate::FitResult;

/// Errors produced by distribution evaluation, model fitting, and diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution or model parameter is outside its valid domain.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A function argument (probability level, grid, group count, ...) is invalid.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// A series evaluation hit the term cap before meeting the tolerance.
    #[error("series did not converge within {max_terms} terms (last term {last_term:.3e}); loosen the tolerance or raise the term cap")]
    SeriesTruncated { max_terms: u64, last_term: f64 },

    /// The likelihood assigns zero mass to an observation, so its log-likelihood
    /// is not finite.
    #[error("degenerate likelihood: zero probability mass at observation {index} (y = {y})")]
    DegenerateLikelihood { index: usize, y: u64 },

    /// The maximum lies on the boundary of the parameter space.
    #[error("likelihood maximum on parameter boundary: {reason}")]
    BoundaryMaximum { reason: String },

    /// The negative binomial dispersion parameter diverged, meaning the data show
    /// no overdispersion relative to Poisson. The Poisson fit is attached as the
    /// usable fallback.
    #[error("negative binomial dispersion diverged (no overdispersion detected); use the attached Poisson fit")]
    NbDispersionDiverged { poisson: Box<FitResult> },

    /// The optimizer exhausted its iteration budget without meeting the
    /// convergence criterion.
    #[error("optimizer did not converge after {iterations} iterations (last objective change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    /// An objective, gradient, or Hessian evaluation returned NaN or infinity.
    #[error("non-finite value while {context}")]
    NonFinite { context: String },

    /// The design matrix has linearly dependent columns.
    #[error("design matrix is rank deficient; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// The input data are structurally unusable (empty, mismatched lengths, ...).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// A residual interval has zero width because the model assigns no mass to
    /// the observed value.
    #[error("zero-width residual interval at observation {index}: model assigns no mass to y = {y}")]
    ZeroWidthResidualInterval { index: usize, y: u64 },

    /// Grouped diagnostics need at least two observations per group.
    #[error("dispersion group {group} has {size} observation(s); need at least 2 — lower the group count")]
    GroupTooSmall { group: usize, size: usize },

    /// The two fits handed to the likelihood-ratio test are not a nested pair.
    #[error("fits are not a nested pair: {0}")]
    NotNested(String),

    /// The likelihood-ratio statistic is materially negative, which means the
    /// larger model was optimized worse than the smaller one.
    #[error("negative likelihood-ratio statistic {statistic:.6e}; the larger model is not optimized to at least the smaller model's likelihood")]
    NegativeLrStatistic { statistic: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
