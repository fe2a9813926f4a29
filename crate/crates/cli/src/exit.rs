//! Process exit codes and the error type that carries them.

use std::fmt;
use std::path::Path;

use statgeo::Error;

pub const OK: u8 = 0;
/// Files that cannot be read or written, malformed matrix files.
pub const IO: u8 = 2;
/// One or more images failed feature extraction.
pub const EXTRACTION: u8 = 3;
/// Bad configuration, missing or unusable database, database that does not
/// match the requested settings.
pub const CONFIG: u8 = 4;
/// Geodesic solver did not converge.
pub const NO_CONVERGENCE: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(CONFIG, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(IO, message)
    }

    /// Error touching `path`, with the default code for its kind.
    pub fn at(path: &Path, e: Error) -> Self {
        let code = code_for(&e);
        Self::new(code, format!("{}: {e}", path.display()))
    }

    /// Any failure to use a database file is a configuration problem.
    pub fn database(path: &Path, e: Error) -> Self {
        Self::config(format!("database {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new(code_for(&e), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        // A closed stdout (`statgeo synth ... | head`) ends the command quietly.
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Self::new(OK, "");
        }
        Self::io(e.to_string())
    }
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::CorruptFile(_) | Error::EmptyDataset(_) => IO,
        Error::Decode { .. }
        | Error::UnsupportedFormat(_)
        | Error::ImageTooSmall { .. }
        | Error::DegenerateSubband(_)
        | Error::DegenerateSample(_)
        | Error::Subband { .. }
        | Error::Convergence { .. } => EXTRACTION,
        Error::NoConvergence(_) | Error::LeftDomain { .. } => NO_CONVERGENCE,
        _ => CONFIG,
    }
}
