use std::fmt;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no positive root: {0}")]
    NoRoot(String),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("environment contract violated: {0}")]
    Contract(String),
    #[error("demonstration generation failed: {0}")]
    GenerationFailed(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Machine-readable error category, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    InvalidInput,
    NoRoot,
    Degenerate,
    Contract,
    GenerationFailed,
    Parse,
    Config,
    Io,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::InvalidInput => "invalid_input",
            Category::NoRoot => "no_root",
            Category::Degenerate => "degenerate",
            Category::Contract => "contract",
            Category::GenerationFailed => "generation_failed",
            Category::Parse => "parse",
            Category::Config => "config",
            Category::Io => "io",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::InvalidInput => 2,
            Category::Config => 3,
            Category::Parse => 4,
            Category::Io => 5,
            Category::NoRoot => 10,
            Category::Degenerate => 11,
            Category::Contract => 12,
            Category::GenerationFailed => 13,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::InvalidInput(_) => Category::InvalidInput,
            Error::NoRoot(_) => Category::NoRoot,
            Error::Degenerate(_) => Category::Degenerate,
            Error::Contract(_) => Category::Contract,
            Error::GenerationFailed(_) => Category::GenerationFailed,
            Error::Parse { .. } => Category::Parse,
            Error::Config(_) => Category::Config,
            Error::Io(_) => Category::Io,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
