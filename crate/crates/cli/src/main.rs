//! `vtmos`: simulate netlists, generate body-biased gates, run the named
//! experiments and measure recorded waveforms.
//!
//! Exit status: 0 success, 1 a verdict or measurement failed, 2 bad input
//! (usage, parse or validation), 3 the solver did not converge.

mod commands;
mod error;
mod gnuplot;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vtmos::units::parse_value;

#[derive(Debug, Parser)]
#[command(
    name = "vtmos",
    version,
    about = "Sub-threshold CMOS/DTMOS/VTMOS gate simulator"
)]
pub struct Cli {
    /// Override a setting, e.g. `solver.reltol=1e-5` or `nmos.vth0=0.25` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Print progress to stderr
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an analysis on a netlist
    Sim(SimArgs),
    /// Write the netlist of a generated gate
    Gate(GateArgs),
    /// Run a named experiment and judge its verdicts
    Exp(ExpArgs),
    /// Measure delay, power and logic levels from a transient CSV
    Measure(MeasureArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Netlist file
    pub netlist: PathBuf,
    #[command(subcommand)]
    pub analysis: Analysis,
    /// Output directory
    #[arg(long, default_value = ".", global = true)]
    pub out: PathBuf,
    /// Also write a gnuplot script for the result
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Analysis {
    /// DC operating point
    Op,
    /// Sweep one source: dc SOURCE START STOP STEP
    Dc {
        source: String,
        #[arg(value_parser = parse_quantity, allow_negative_numbers = true)]
        start: f64,
        #[arg(value_parser = parse_quantity, allow_negative_numbers = true)]
        stop: f64,
        #[arg(value_parser = parse_quantity)]
        step: f64,
    },
    /// Transient to T_STOP (e.g. 100u)
    Tran {
        #[arg(value_parser = parse_quantity)]
        t_stop: f64,
    },
}

#[derive(Debug, Args)]
pub struct GateArgs {
    /// inverter, nand2 or nor2
    pub gate: String,
    /// cmos, dtmos or vtmos
    pub style: String,
    /// NMOS gate-to-body offset for vtmos (V)
    #[arg(value_parser = parse_quantity)]
    pub v_an: Option<f64>,
    /// PMOS body-to-gate offset (defaults to V_AN)
    #[arg(long, value_parser = parse_quantity)]
    pub v_ap: Option<f64>,
    /// Supply voltage
    #[arg(long, default_value = "0.2", value_parser = parse_quantity)]
    pub vdd: f64,
    /// Input pulse frequency
    #[arg(long, default_value = "100k", value_parser = parse_quantity)]
    pub freq: f64,
    /// Output load capacitance
    #[arg(long, default_value = "1f", value_parser = parse_quantity)]
    pub load_cap: f64,
    /// Model card file (reference card when absent)
    #[arg(long)]
    pub card: Option<PathBuf>,
    /// Output directory; the netlist goes to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    /// iv-curves, vtc, bias-sweep, frequency-sweep or random-vectors
    pub experiment: String,
    /// Experiment config file (`key = value` lines)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's out_dir)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write gnuplot scripts for the tables
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// CSV written by `sim ... tran`
    pub csv: PathBuf,
    /// Supply voltage
    #[arg(long, value_parser = parse_quantity)]
    pub vdd: f64,
    /// Input node (repeatable)
    #[arg(long = "input", required = true)]
    pub inputs: Vec<String>,
    /// Output node
    #[arg(long)]
    pub output: String,
    /// Supply source name
    #[arg(long, default_value = "vdd")]
    pub supply: String,
    /// Extra source whose power counts, as NAME=VOLTS (repeatable)
    #[arg(long = "bias", value_parser = parse_override)]
    pub bias: Vec<(String, String)>,
    /// Measurement window start and end (default: second half of the record)
    #[arg(long, num_args = 2, value_names = ["T0", "T1"], value_parser = parse_quantity)]
    pub window: Option<Vec<f64>>,
    /// Output follows the input instead of inverting it
    #[arg(long)]
    pub non_inverting: bool,
    /// Output directory for measure.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Writes to stdout, ignoring a closed pipe (e.g. output piped to `head`).
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

#[macro_export]
macro_rules! say {
    ($($arg:tt)*) => {
        $crate::emit(&format!("{}\n", format_args!($($arg)*)))
    };
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_quantity(s: &str) -> Result<f64, String> {
    parse_value(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_si_suffixes() {
        let cli = Cli::try_parse_from(["vtmos", "sim", "rc.cir", "tran", "100u"]).unwrap();
        let Command::Sim(args) = cli.command else {
            panic!()
        };
        assert!(
            matches!(args.analysis, Analysis::Tran { t_stop } if (t_stop - 1e-4).abs() < 1e-18)
        );
    }

    #[test]
    fn override_needs_equals() {
        assert!(parse_override("reltol").is_err());
        assert_eq!(parse_override("a = 1").unwrap(), ("a".into(), "1".into()));
    }
}
