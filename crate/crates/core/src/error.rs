use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (grid, parameters, run settings).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments it does not support.
    #[error("usage error: {0}")]
    Usage(String),

    /// A time or acceleration outside the domain where the quantity is defined.
    #[error("range error: {0}")]
    Range(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no bound state: ground-state energy {energy} is not negative")]
    NoBoundState { energy: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("no discontinuity found up to derivative order {n_max}")]
    NoDiscontinuity { n_max: usize },

    #[error("resonant drive: motion frequency {drive} equals trap frequency {trap}")]
    Resonance { drive: f64, trap: f64 },

    #[error("degenerate levels: energy gap is zero")]
    Degeneracy,

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::NoBoundState { .. }
                | Error::Fit(_)
                | Error::NoDiscontinuity { .. }
                | Error::Resonance { .. }
                | Error::Degeneracy
                | Error::Accuracy(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
