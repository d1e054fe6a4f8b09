//! Named experiments that regenerate each result table, plus the verdicts
//! computed from those tables.
//!
//! | id                | tables                              | verdicts            |
//! |-------------------|-------------------------------------|---------------------|
//! | `iv-curves`       | `iv_vgs.csv`, `iv_vds.csv`          | V6a, V6b            |
//! | `vtc`             | `vtc.csv`, `noise_margins.csv`      | V7b                 |
//! | `bias-sweep`      | `bias_sweep.csv`                    | V1–V4, V7a          |
//! | `frequency-sweep` | `frequency_sweep.csv`               | V5                  |
//! | `random-vectors`  | `random_vectors.csv`                | V8a, V8b            |

mod config;
mod gate_run;
mod parallel;
mod runs;
mod table;
pub mod verdicts;

use std::path::{Path, PathBuf};

pub use config::{
    default_frequencies, parse_seed, ExperimentConfig, ExperimentId, SweepSpec, SweepStimulus,
    BASE_FREQUENCY, DEFAULT_BITS, DEFAULT_SEED, DEFAULT_VDD, DEFAULT_V_AN, MIN_PRBS_BITS,
};
pub use gate_run::{
    label, logic_sample_times, measure_gate, measure_run, simulate_gate, RunPlan, PRBS_SETTLE_BITS,
};
pub use parallel::{default_jobs, par_map};
pub use runs::REPORT_COLUMNS;
pub use table::{fmt_num, Table};
pub use verdicts::Verdict;

use crate::device::DeviceError;
use crate::measure::MeasureError;
use crate::netlist::GateError;
use crate::solver::{SolverError, WaveformError};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Card(#[from] DeviceError),
    #[error("unknown experiment `{0}` (expected one of: {names})", names = ExperimentId::names())]
    UnknownExperiment(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// True when the numerical engine, not the input, gave up.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, ExperimentError::Solver(e) if e.is_convergence())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub id: ExperimentId,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentResult {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Contents of `verdicts.txt`.
    pub fn verdict_text(&self) -> String {
        let mut out = format!("# {}\n", self.id);
        for v in &self.verdicts {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// Writes every table and `verdicts.txt` under `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = dir.join(&t.name);
            std::fs::write(&p, t.to_csv()).map_err(io(&p))?;
            paths.push(p);
        }
        let p = dir.join("verdicts.txt");
        std::fs::write(&p, self.verdict_text()).map_err(io(&p))?;
        paths.push(p);
        Ok(paths)
    }
}

/// Runs one experiment and judges it from its own CSV output.
pub fn run_experiment(
    id: ExperimentId,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    let sweep = SweepSpec::new(id, cfg)?;
    let tables = match id {
        ExperimentId::IvCurves => runs::iv_curves(&sweep)?,
        ExperimentId::Vtc => runs::vtc(&sweep)?,
        ExperimentId::BiasSweep => runs::bias_sweep(&sweep)?,
        ExperimentId::FrequencySweep => runs::frequency_sweep(&sweep)?,
        ExperimentId::RandomVectors => runs::random_vectors(&sweep)?,
    };
    // judge the serialized form so verdicts depend on nothing but the CSV
    let reparsed = tables
        .iter()
        .map(|t| Table::parse(&t.name, &t.to_csv()))
        .collect::<Result<Vec<_>, _>>()?;
    let verdicts = verdicts::evaluate(id, &reparsed)?;
    Ok(ExperimentResult {
        id,
        tables,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            v_an: vec![0.0, 0.2],
            jobs: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn iv_table_shape() {
        let r = run_experiment(ExperimentId::IvCurves, &quick()).unwrap();
        assert_eq!(r.table("iv_vgs.csv").unwrap().rows.len(), 2 * 21);
        assert_eq!(r.table("iv_vds.csv").unwrap().rows.len(), 2 * 21);
        assert!(r.verdict("V6a").unwrap().pass);
        assert!(r.verdict("iv.zero-vds").unwrap().pass);
    }

    #[test]
    fn vtc_rows_cover_grid() {
        let r = run_experiment(ExperimentId::Vtc, &quick()).unwrap();
        // cmos plus two biases, 101 points each
        assert_eq!(r.table("vtc.csv").unwrap().rows.len(), 3 * 101);
        assert_eq!(r.table("noise_margins.csv").unwrap().rows.len(), 3);
        assert!(r.all_pass(), "{}", r.verdict_text());
    }

    #[test]
    fn writes_outputs() {
        let dir = std::env::temp_dir().join(format!("vtmos-exp-{}", std::process::id()));
        let r = run_experiment(ExperimentId::IvCurves, &quick()).unwrap();
        let paths = r.write(&dir).unwrap();
        assert_eq!(paths.len(), 3);
        let text = std::fs::read_to_string(dir.join("verdicts.txt")).unwrap();
        assert!(text.starts_with("# iv-curves\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
