use thiserror::Error;

/// Errors produced by the tracking engine.
///
/// Variants map onto the CLI exit-code contract: `Parse` -> 2, `Config` -> 3,
/// `Divergence` -> 4, `Correspondence` -> 5. Everything else is an input
/// problem and reports as 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch at layer {layer}: {message}")]
    Dimension { layer: usize, message: String },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("correspondence error: {0}")]
    Correspondence(String),

    #[error("attribution error: {0}")]
    Attribution(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("stream error: {0}")]
    Stream(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Exit code for the CLI contract: 0 success, 2 input parse, 3 config,
    /// 4 divergence, 5 correspondence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension { .. } => 3,
            Error::Divergence(_) => 4,
            Error::Correspondence(_) => 5,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
