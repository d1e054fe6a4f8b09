use vtmos::experiments::ExperimentError;
use vtmos::measure::MeasureError;
use vtmos::netlist::{Diagnostic, GateError};
use vtmos::solver::{SolverError, WaveformError};

/// Exit status contract.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", render(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<WaveformError> for CliError {
    fn from(e: WaveformError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(e) if e.is_convergence() => EXIT_SOLVER,
            CliError::Experiment(e) if e.is_solver_failure() => EXIT_SOLVER,
            CliError::Measure(_) | CliError::Experiment(ExperimentError::Measure(_)) => {
                EXIT_VERDICT
            }
            _ => EXIT_INPUT,
        }
    }
}
