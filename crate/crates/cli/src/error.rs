use thiserror::Error;

/// Failures of a CLI invocation, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    ModelInvalid(oqho_core::Error),
    #[error("invalid input: {0}")]
    Input(oqho_core::Error),
    #[error("numerical failure: {0}")]
    Numerical(oqho_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl From<oqho_core::Error> for CliError {
    fn from(e: oqho_core::Error) -> Self {
        use oqho_core::Error as E;
        match e {
            E::NoConvergence { .. }
            | E::MissingTailBound { .. }
            | E::EigenFailure
            | E::IllConditioned { .. }
            | E::Overflow { .. }
            | E::LinearSolveFailure(_)
            | E::CertificateViolation { .. }
            | E::DefectiveAndUnstableShift
            | E::StepperConstructionFailure(_)
            | E::VarianceBlowup { .. } => CliError::Numerical(e),
            _ => CliError::Input(e),
        }
    }
}
