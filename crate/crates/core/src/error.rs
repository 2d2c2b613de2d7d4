use thiserror::Error;

/// Errors raised by the model, solvers, simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("singular linear system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("simulation diverged at step {step} (t = {time:.6e} s): {detail}")]
    Divergence { step: u64, time: f64, detail: String },

    #[error("series too short: need {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("negative sideband area ({area:.3e}): floor exceeds the peak region")]
    NegativeArea { area: f64 },

    #[error("spectrum has no negative-frequency data")]
    MissingNegativeFrequency,

    #[error("sample rate {rate_hz:.3e} Hz aliases the signal (need > {min_hz:.3e} Hz)")]
    Aliasing { rate_hz: f64, min_hz: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.to_string(), reason: reason.into() }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Parse(_) | Error::UnknownParameter(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// ω_d > ω̄_M/5: the slow-modulation assumption is questionable.
    FastModulation { omega_d: f64, omega_m: f64 },
    /// Perturbative expansion used outside ḡ, ω_2 ≪ κ, ω̄_M.
    StrongCoupling { g_bar: f64, omega_2: f64 },
    /// Bessel series truncated while the neglected weight is still above tolerance.
    TruncationInsufficient { neglected: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::FastModulation { omega_d, omega_m } => {
                write!(f, "modulation not slow: omega_d = {omega_d:.4e} > omega_m/5 = {:.4e}", omega_m / 5.0)
            }
            Warning::StrongCoupling { g_bar, omega_2 } => {
                write!(f, "perturbative expansion outside its regime (g_bar = {g_bar:.4e}, omega_2 = {omega_2:.4e})")
            }
            Warning::TruncationInsufficient { neglected } => {
                write!(f, "line expansion truncated with neglected weight {neglected:.3e}")
            }
        }
    }
}
