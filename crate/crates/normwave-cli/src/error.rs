use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error(transparent)]
    Solver(#[from] normwave::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_HYPOTHESIS: u8 = 3;
pub const EXIT_NO_CONVERGENCE: u8 = 4;
pub const EXIT_NO_BRACKET: u8 = 5;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use normwave::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Hypothesis(_) => EXIT_HYPOTHESIS,
            CliError::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            CliError::Solver(e) => match e {
                E::InvalidModel(_)
                | E::InvalidArgument(_)
                | E::GridMismatch(_)
                | E::Parse(_)
                | E::Precondition(_)
                | E::Io(_)
                | E::Json(_) => EXIT_CONFIG,
                E::Hypothesis(_) => EXIT_HYPOTHESIS,
                E::NoBracket(_) | E::NotStraddling(_) => EXIT_NO_BRACKET,
                E::ZeroMass
                | E::Singular(_)
                | E::NoConvergence(_)
                | E::StepUnderflow(_)
                | E::Invariant(_) => EXIT_NO_CONVERGENCE,
            },
        }
    }
}
