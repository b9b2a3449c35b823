//! Library half of the pulseforge command line: configuration, bit-exact
//! import/export of pulses and trajectories, and the scenario drivers.

pub mod config;
pub mod io;
pub mod scenario;

/// Process exit codes used by the binary.
pub mod exit_codes {
    pub const OK: u8 = 0;
    pub const RUNTIME: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const REPRESENTABILITY: u8 = 3;
    pub const THRESHOLD: u8 = 4;
}

/// Errors carried up to the binary, tagged with the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Representability(String),
    Threshold(Vec<String>),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit_codes::CONFIG,
            CliError::Representability(_) => exit_codes::REPRESENTABILITY,
            CliError::Threshold(_) => exit_codes::THRESHOLD,
            CliError::Runtime(_) => exit_codes::RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Representability(m) => write!(f, "representability failure: {m}"),
            CliError::Threshold(fails) => {
                writeln!(f, "verification thresholds failed:")?;
                for line in fails {
                    writeln!(f, "  - {line}")?;
                }
                Ok(())
            }
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<pulseforge::PulseError> for CliError {
    fn from(e: pulseforge::PulseError) -> Self {
        if e.is_representability() {
            CliError::Representability(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
