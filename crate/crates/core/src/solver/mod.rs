//! Modified nodal analysis engine: Newton DC operating point with gmin and
//! source stepping, DC sweeps, and adaptive transient integration.

mod dc;
mod mna;
mod transient;
mod waveform;

use std::fmt;
use std::str::FromStr;

pub use dc::{dc_operating_point, dc_sweep, SweepPoint};
pub use mna::{assemble, AssembleMode, CapState, MnaSystem};
pub use transient::{transient, TransientResult};
pub use waveform::{Waveform, WaveformError};

use crate::netlist::Diagnostic;
use crate::units::parse_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    Trapezoidal,
    BackwardEuler,
}

impl Integration {
    /// Local order of accuracy.
    pub fn order(self) -> i32 {
        match self {
            Integration::Trapezoidal => 2,
            Integration::BackwardEuler => 1,
        }
    }
}

impl FromStr for Integration {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trap" | "trapezoidal" => Ok(Integration::Trapezoidal),
            "be" | "euler" | "backward_euler" => Ok(Integration::BackwardEuler),
            other => Err(SolverError::Option(format!(
                "unknown integration `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub reltol: f64,
    /// Absolute voltage tolerance (V).
    pub vntol: f64,
    /// Absolute current tolerance (A).
    pub abstol: f64,
    /// Conductance from every node to ground (S).
    pub gmin: f64,
    pub max_newton_iters: usize,
    pub integration: Integration,
    pub lte_tol: f64,
    pub min_step: f64,
    /// `None` picks the shortest source period / 200.
    pub max_step: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            reltol: 1e-4,
            vntol: 1e-6,
            abstol: 1e-12,
            gmin: 1e-12,
            max_newton_iters: 100,
            integration: Integration::Trapezoidal,
            lte_tol: 1.0,
            min_step: 1e-15,
            max_step: None,
        }
    }
}

impl SolverOptions {
    pub const KEYS: [&'static str; 9] = [
        "reltol",
        "vntol",
        "abstol",
        "gmin",
        "max_newton_iters",
        "integration",
        "lte_tol",
        "min_step",
        "max_step",
    ];

    /// Applies a `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SolverError> {
        if key == "integration" {
            self.integration = value.parse()?;
            return Ok(());
        }
        let v = parse_value(value).map_err(SolverError::Option)?;
        match key {
            "reltol" => self.reltol = v,
            "vntol" => self.vntol = v,
            "abstol" => self.abstol = v,
            "gmin" => self.gmin = v,
            "max_newton_iters" => self.max_newton_iters = v as usize,
            "lte_tol" => self.lte_tol = v,
            "min_step" => self.min_step = v,
            "max_step" => self.max_step = Some(v),
            _ => {
                return Err(SolverError::Option(format!(
                    "unknown solver option `{key}`"
                )))
            }
        }
        self.check()
    }

    pub fn check(&self) -> Result<(), SolverError> {
        let positive = [
            self.reltol,
            self.vntol,
            self.abstol,
            self.gmin,
            self.lte_tol,
            self.min_step,
            self.max_step.unwrap_or(1.0),
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(SolverError::Option(
                "solver tolerances and steps must be positive".into(),
            ));
        }
        if self.max_newton_iters < 10 {
            return Err(SolverError::Option("max_newton_iters must be >= 10".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Newton,
    GminStepping,
    SourceStepping,
    Transient,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Newton => "newton",
            Stage::GminStepping => "gmin stepping",
            Stage::SourceStepping => "source stepping",
            Stage::Transient => "transient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("no convergence in {stage} after {iteration} iterations (worst node `{worst_node}`{})",
        time.map(|t| format!(", t = {t:e} s")).unwrap_or_default())]
    NonConvergence {
        stage: Stage,
        iteration: usize,
        worst_node: String,
        time: Option<f64>,
    },
    #[error("time step fell below min_step at t = {time:e} s")]
    StepUnderflow { time: f64 },
    #[error("sweep failed at {source_name} = {value} V: {cause}")]
    SweepPoint {
        source_name: String,
        value: f64,
        cause: Box<SolverError>,
    },
    #[error("circuit is not simulable: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("{0}")]
    Option(String),
}

impl SolverError {
    /// True for errors raised by the numerical method rather than the input.
    pub fn is_convergence(&self) -> bool {
        match self {
            SolverError::NonConvergence { .. } | SolverError::StepUnderflow { .. } => true,
            SolverError::SweepPoint { cause, .. } => cause.is_convergence(),
            _ => false,
        }
    }
}

/// Node voltages and voltage-source branch currents at one solution.
///
/// Branch current is positive when flowing into the `+` terminal through the
/// source (SPICE convention), so a supply delivering power reads negative.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub node_names: Vec<String>,
    pub voltages: Vec<f64>,
    pub source_names: Vec<String>,
    pub currents: Vec<f64>,
}

impl SolutionPoint {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        if node == crate::netlist::GROUND {
            return Some(0.0);
        }
        self.node_names
            .iter()
            .position(|n| n == node)
            .map(|i| self.voltages[i])
    }

    pub fn current(&self, source: &str) -> Option<f64> {
        self.source_names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(source))
            .map(|i| self.currents[i])
    }

    /// `name,value` rows: `v(node)` then `i(source)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        for (n, v) in self.node_names.iter().zip(&self.voltages) {
            out.push_str(&format!("v({n}),{v:e}\n"));
        }
        for (n, i) in self.source_names.iter().zip(&self.currents) {
            out.push_str(&format!("i({n}),{i:e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_overrides() {
        let mut o = SolverOptions::default();
        o.set("reltol", "1e-5").unwrap();
        o.set("max_step", "1n").unwrap();
        o.set("integration", "be").unwrap();
        assert_eq!(o.reltol, 1e-5);
        assert_eq!(o.max_step, Some(1e-9));
        assert_eq!(o.integration, Integration::BackwardEuler);
        assert!(o.set("bogus", "1").is_err());
        assert!(o.set("max_newton_iters", "5").is_err());
        assert!(o.set("gmin", "-1").is_err());
    }
}
