use std::fmt;

use flowinfer::Error;

/// Process exit codes.
pub const USAGE: i32 = 1;
pub const NUMERICAL: i32 = 2;
pub const IO: i32 = 3;

/// A failure that carries its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: USAGE, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: NUMERICAL, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Exit code for an error chain: explicit failures first, then library and I/O errors.
pub fn code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::SolverFailure { .. } | Error::Numerical(_) | Error::Undefined(_) => NUMERICAL,
                Error::Io(_) => IO,
                _ => USAGE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return USAGE;
        }
    }
    USAGE
}
