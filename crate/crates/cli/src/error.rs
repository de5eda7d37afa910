use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;
pub const EXIT_DATA: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}: field '{field}': {message}")]
    Field {
        source_name: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{source_name}: missing required field '{field}'")]
    MissingField { source_name: String, field: String },

    #[error("{source_name}:{line}: {message}")]
    Syntax {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    NotConverged(String),

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Core(#[from] emlab_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> u8 {
        use emlab_core::Error as E;
        match self {
            CliError::Field { .. } | CliError::MissingField { .. } | CliError::Syntax { .. } | CliError::Usage(_) => {
                EXIT_CONFIG
            }
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Csv { .. } | CliError::Json(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                E::Config(_) | E::Argument(_) | E::Split(_) => EXIT_CONFIG,
                E::Resource(_) => EXIT_RESOURCE,
                E::Parse { .. } | E::Undefined(_) | E::InsufficientData(_) | E::Json(_) => EXIT_DATA,
                _ => EXIT_FAILURE,
            },
            CliError::Io(_) => EXIT_FAILURE,
        }
    }
}
