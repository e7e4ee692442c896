use std::fmt;
use std::path::Path;

use aeromix_core::Error as CoreError;

/// Machine-readable failure category, printed as `error[class]: message`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// A required input file or directory does not exist.
    InputMissing,
    /// Bad configuration or command-line value.
    Config,
    /// A file exists but does not follow its format.
    Parse,
    /// Records or grids violate a domain invariant.
    Validation,
    /// Reading or writing failed for another reason.
    Io,
    /// The computation itself failed (singular systems, too little data).
    Compute,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::InputMissing => "input-missing",
            ErrorClass::Config => "config",
            ErrorClass::Parse => "parse",
            ErrorClass::Validation => "validation",
            ErrorClass::Io => "io",
            ErrorClass::Compute => "compute",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::InputMissing => 2,
            ErrorClass::Config => 3,
            ErrorClass::Parse => 4,
            ErrorClass::Validation => 5,
            ErrorClass::Io => 6,
            ErrorClass::Compute => 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppError {
    pub class: ErrorClass,
    pub message: String,
}

impl AppError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        // Keep the report on one line.
        let message = message.into().replace(['\n', '\r'], " ");
        AppError { class, message }
    }

    pub fn config(message: impl Into<String>) -> Self {
        AppError::new(ErrorClass::Config, message)
    }

    pub fn parse(path: &Path, line: usize, message: impl fmt::Display) -> Self {
        AppError::new(
            ErrorClass::Parse,
            format!("{}:{line}: {message}", path.display()),
        )
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        if err.kind() == std::io::ErrorKind::NotFound {
            AppError::new(
                ErrorClass::InputMissing,
                format!("{}: not found", path.display()),
            )
        } else {
            AppError::new(ErrorClass::Io, format!("{}: {err}", path.display()))
        }
    }

    /// Wraps a core error raised while handling `context`.
    pub fn core(context: impl fmt::Display, err: CoreError) -> Self {
        let class = match err {
            CoreError::Validation { .. }
            | CoreError::Mismatch(_)
            | CoreError::OutsideGrid { .. }
            | CoreError::DuplicateKey(_) => ErrorClass::Validation,
            CoreError::Config(_) | CoreError::Hyperparams(_) => ErrorClass::Config,
            _ => ErrorClass::Compute,
        };
        AppError::new(class, format!("{context}: {err}"))
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.name(), self.message)
    }
}

impl std::error::Error for AppError {}

pub type AppResult<T> = Result<T, AppError>;
