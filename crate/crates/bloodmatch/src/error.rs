use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] bloodmatch_core::Error),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    /// Malformed user input: bad ids, missing values, bad flags.
    #[error("{0}")]
    Input(String),
}

impl Error {
    /// Whether the error is the caller's fault (bad file, bad flag) rather
    /// than a failure while computing.
    pub fn is_input_error(&self) -> bool {
        use bloodmatch_core::Error as C;
        match self {
            Error::Read { .. } | Error::Json { .. } | Error::Csv { .. } | Error::Input(_) => true,
            Error::Write { .. } => false,
            Error::Core(e) => matches!(
                e,
                C::InvalidScenario(_)
                    | C::NonPositiveNormalization { .. }
                    | C::MissingNormalization
                    | C::InvalidParameter(_)
                    | C::Unsupported(_)
                    | C::StepOutOfRange { .. }
            ),
        }
    }
}
