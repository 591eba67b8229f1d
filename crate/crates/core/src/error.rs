use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid loss profile: {0}")]
    InvalidProfile(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The adaptive integrator could not take a step above the minimum size.
    #[error("stiffness failure at t = {t:e}: step size {step:e} underflowed, worst component at n = {n}, k = {k}")]
    Stiffness { t: f64, step: f64, n: usize, k: usize },

    #[error("integration exceeded {0} steps")]
    StepLimit(usize),

    /// Zero segments of the profile have different lengths, so no initial
    /// state with a positive diagonal can relax to a pure state.
    #[error("zero segments have unequal lengths {lengths:?}; the stationary state is necessarily mixed")]
    UnequalZeroSpacing { lengths: Vec<Option<usize>> },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Stiffness { .. } | Error::StepLimit(_))
    }
}
