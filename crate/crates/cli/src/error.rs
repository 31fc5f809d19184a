use std::fmt;

/// Failure classes, each with its own process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration, missing inputs, I/O.
    Config(String),
    /// A hypothesis of the requested construction does not hold.
    Hypothesis(String),
    /// An iteration failed to converge or a target could not be reached.
    Convergence(String),
    /// `verify` found failing checks.
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Hypothesis(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Verify(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Hypothesis(m) => write!(f, "hypothesis violated: {m}"),
            CliError::Convergence(m) => write!(f, "convergence failure: {m}"),
            CliError::Verify(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rotstar::Error> for CliError {
    fn from(e: rotstar::Error) -> Self {
        use rotstar::Error as E;
        let msg = e.to_string();
        match e {
            E::Hypothesis(_) | E::SupportViolation { .. } | E::NotSpherical(_) => CliError::Hypothesis(msg),
            E::RadiusNotFound(_)
            | E::Convergence(_)
            | E::ShiftTooSmall { .. }
            | E::Stagnation { .. }
            | E::NonFinite { .. }
            | E::Degenerate(_)
            | E::Internal(_) => CliError::Convergence(msg),
            E::InvalidGrid(_) | E::GridMismatch(_) | E::Domain(_) | E::Parse { .. } | E::Io(_) => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}
