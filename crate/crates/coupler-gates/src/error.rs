use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ambiguous labeling for {label}: maximum overlap {overlap:.4} < 0.5")]
    Ambiguous { label: String, overlap: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular denominator `{name}` = {value:e} GHz")]
    Singularity { name: &'static str, value: f64 },

    #[error("propagator is not CZ-like: diagonal magnitudes {magnitudes:?}")]
    NotCzLike { magnitudes: [f64; 4] },

    #[error("numerical error in {module}: {message}")]
    Numerical { module: &'static str, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no bracket: {0}")]
    Bracket(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn numerical(module: &'static str, message: impl Into<String>) -> Self {
        Error::Numerical {
            module,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Validation(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            4 => "io",
            _ => "numerical",
        }
    }
}
