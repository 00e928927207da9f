use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `key` is the dotted path
    /// of the offending entry, e.g. `grid.bin_width_ns`.
    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("could not parse configuration at `{path}`: {message}")]
    ConfigParse { path: String, message: String },

    /// Timing of the controller or optics cannot place photons where the
    /// protocol requires them.
    #[error("infeasible timing: {0}")]
    Feasibility(String),

    #[error("gates overlap: gate at {first_start_ns} ns (width {first_width_ns} ns) overlaps gate at {second_start_ns} ns")]
    OverlappingGates {
        first_start_ns: f64,
        first_width_ns: f64,
        second_start_ns: f64,
    },

    #[error("{quantity} is undefined: {reason}")]
    Undefined {
        quantity: &'static str,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("photon-number cutoff {cutoff} leaves tail mass {tail:e} (limit {limit:e})")]
    CutoffTooSmall { cutoff: usize, tail: f64, limit: f64 },

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user configuration rather than by the run
    /// itself; the CLI maps the two classes to different exit codes.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::ConfigParse { .. }
                | Error::Feasibility(_)
                | Error::OverlappingGates { .. }
                | Error::InvalidParameter { .. }
                | Error::UnknownAxis(_)
        )
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
