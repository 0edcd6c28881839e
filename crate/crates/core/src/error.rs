use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigen-solver failed to converge at phi = {phi}")]
    EigenFailure { phi: f64 },

    #[error("parameter range [{lo}, {hi}] does not bracket the destabilization (max Re lambda: {g_lo:e}, {g_hi:e})")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("regular point assumption violated at phi0 = {phi0}: critical eigenvalue is not simple")]
    RegularPointViolated { phi0: f64 },

    #[error("tangency point has non-real kappa1 (imaginary part {imag:e})")]
    ComplexKappa1 { imag: f64 },

    #[error("nonresonance condition violated: smallest singular value {sigma_min:e}")]
    NonresonanceViolated { sigma_min: f64 },

    #[error("nonlinearity not cubic at origin: {0}")]
    NotCubic(String),

    #[error("anti-diffusive amplitude equation: ill-posed beyond cutoff (Re kappa3 = {re_kappa3:e})")]
    IllPosed { re_kappa3: f64 },

    #[error("amplitude field blew up at T2 = {time}")]
    BlowUp { time: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("tangent vectors collapsed after {attempts} attempts (last renormalization interval {interval})")]
    TangentCollapse { attempts: usize, interval: f64 },

    #[error("no Hopf crossing for k below {k_max}")]
    NoHopf { k_max: f64 },

    #[error("no transition to chaos found below k = {k_max}")]
    NoTransition { k_max: f64 },

    #[error("attractor classification undetermined in [{lo}, {hi}]")]
    Undetermined { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for errors caused by bad input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidModel(_)
                | Error::InvalidArgument(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
