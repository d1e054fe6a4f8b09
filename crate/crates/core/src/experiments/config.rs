//! Experiment configuration files and the sweep grids derived from them.
//!
//! A config is a flat `key = value` file with `#` comments:
//!
//! ```text
//! experiment = bias-sweep
//! card = models/ref65.card
//! seed = 0xACE1
//! out_dir = out/bias
//! jobs = 4
//! v_an = 0, 0.05, 0.1, 0.15, 0.2
//! solver.reltol = 1e-4
//! nmos.vth0 = 0.22
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::parallel::default_jobs;
use super::ExperimentError;
use crate::device::ModelCard;
use crate::lfsr::Lfsr16;
use crate::netlist::{BodyStyle, GateKind, GateSpec, InputStimulus, DEFAULT_LOAD_CAP};
use crate::solver::SolverOptions;
use crate::units::parse_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    IvCurves,
    Vtc,
    BiasSweep,
    FrequencySweep,
    RandomVectors,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::IvCurves,
        ExperimentId::Vtc,
        ExperimentId::BiasSweep,
        ExperimentId::FrequencySweep,
        ExperimentId::RandomVectors,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::IvCurves => "iv-curves",
            ExperimentId::Vtc => "vtc",
            ExperimentId::BiasSweep => "bias-sweep",
            ExperimentId::FrequencySweep => "frequency-sweep",
            ExperimentId::RandomVectors => "random-vectors",
        }
    }

    pub fn names() -> String {
        Self::ALL.map(|e| e.as_str()).join(", ")
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_string()))
    }
}

pub const DEFAULT_SEED: u16 = 0xACE1;
pub const DEFAULT_VDD: f64 = 0.2;
pub const DEFAULT_BITS: usize = 128;
/// Shortest measured PRBS sequence accepted.
pub const MIN_PRBS_BITS: usize = 64;
pub const DEFAULT_V_AN: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];
/// Pulse frequency for the bias sweep and the PRBS bit rate (Hz).
pub const BASE_FREQUENCY: f64 = 100e3;

/// Twelve log-spaced points from 100 kHz to 16 MHz.
pub fn default_frequencies() -> Vec<f64> {
    let n = 12;
    (0..n)
        .map(|k| {
            let f = BASE_FREQUENCY * 160f64.powf(k as f64 / (n - 1) as f64);
            // keep the grid on readable values
            let digits = 10f64.powi(f.log10().floor() as i32 - 3);
            (f / digits).round() * digits
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentId>,
    pub card: Option<PathBuf>,
    pub card_overrides: Vec<(String, f64)>,
    pub seed: u16,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub bits: usize,
    pub vdd: f64,
    pub load_cap: f64,
    pub v_an: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            card: None,
            card_overrides: Vec::new(),
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("out"),
            jobs: default_jobs(),
            bits: DEFAULT_BITS,
            vdd: DEFAULT_VDD,
            load_cap: DEFAULT_LOAD_CAP,
            v_an: DEFAULT_V_AN.to_vec(),
            frequencies: default_frequencies(),
            solver: SolverOptions::default(),
        }
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_value)
        .collect()
}

pub fn parse_seed(value: &str) -> Result<u16, String> {
    let v = value.trim();
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16),
        None => v.parse(),
    };
    match parsed {
        Ok(0) => Err("seed must be non-zero".into()),
        Ok(s) => Ok(s),
        Err(_) => Err(format!("bad seed `{v}`")),
    }
}

impl ExperimentConfig {
    /// Every key accepted by [`ExperimentConfig::set`] apart from the
    /// `solver.*`, `nmos.*` and `pmos.*` families.
    pub const KEYS: [&'static str; 10] = [
        "experiment",
        "card",
        "seed",
        "out_dir",
        "jobs",
        "bits",
        "vdd",
        "load_cap",
        "v_an",
        "frequencies",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = || parse_value(value);
        let count = || -> Result<usize, String> {
            let v = num()?;
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("`{key}` must be a positive integer"))
            }
        };
        match key {
            "experiment" => {
                self.experiment = Some(value.parse().map_err(|e: ExperimentError| e.to_string())?)
            }
            "card" => self.card = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_seed(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "jobs" => self.jobs = count()?,
            "bits" => self.bits = count()?,
            "vdd" => self.vdd = num()?,
            "load_cap" => self.load_cap = num()?,
            "v_an" => self.v_an = parse_list(value)?,
            "frequencies" => self.frequencies = parse_list(value)?,
            _ => {
                if let Some(opt) = key.strip_prefix("solver.") {
                    self.solver.set(opt, value).map_err(|e| e.to_string())?;
                } else if key.starts_with("nmos.") || key.starts_with("pmos.") {
                    let v = num()?;
                    // validate the key now rather than at load time
                    ModelCard::reference()
                        .set(key, v)
                        .map_err(|e| e.to_string())?;
                    self.card_overrides.push((key.to_string(), v));
                } else {
                    return Err(format!("unknown key `{key}`"));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| ExperimentError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; a relative `card` path is taken relative to the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(card), Some(dir)) = (&cfg.card, path.parent()) {
            if card.is_relative() {
                cfg.card = Some(dir.join(card));
            }
        }
        Ok(cfg)
    }

    /// The reference card, or the configured card file, with overrides.
    pub fn model_card(&self) -> Result<ModelCard, ExperimentError> {
        let mut card = match &self.card {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                ModelCard::parse(&text)?
            }
            None => ModelCard::reference(),
        };
        for (k, v) in &self.card_overrides {
            card.set(k, *v)?;
        }
        card.nmos.validate()?;
        card.pmos.validate()?;
        Ok(card)
    }

    /// Three seed pairs drawn from the LFSR started at `seed`: successive
    /// 16-bit words of its output state.
    pub fn seed_pairs(&self) -> [[u16; 2]; 3] {
        let mut l = Lfsr16::new(self.seed).expect("seed validated non-zero");
        let mut word = || {
            for _ in 0..16 {
                l.next_bit();
            }
            l.state()
        };
        [[word(), word()], [word(), word()], [word(), word()]]
    }
}

/// Stimulus family of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepStimulus {
    Pulse,
    Prbs { seeds: Vec<[u16; 2]>, bits: usize },
}

/// The grid one experiment walks.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub id: ExperimentId,
    pub gates: Vec<GateKind>,
    pub styles: Vec<BodyStyle>,
    pub v_an: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub stimulus: SweepStimulus,
    pub card: ModelCard,
    pub solver: SolverOptions,
    pub vdd: f64,
    pub load_cap: f64,
    /// Worker threads for independent grid points.
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(id: ExperimentId, cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let (gates, styles, frequencies, stimulus) = match id {
            ExperimentId::IvCurves | ExperimentId::Vtc => (
                vec![GateKind::Inverter],
                vec![BodyStyle::Cmos, BodyStyle::Vtmos],
                vec![BASE_FREQUENCY],
                SweepStimulus::Pulse,
            ),
            ExperimentId::BiasSweep => (
                GateKind::ALL.to_vec(),
                vec![BodyStyle::Cmos, BodyStyle::Vtmos],
                vec![BASE_FREQUENCY],
                SweepStimulus::Pulse,
            ),
            ExperimentId::FrequencySweep => (
                vec![GateKind::Nand2],
                vec![BodyStyle::Cmos, BodyStyle::Vtmos],
                cfg.frequencies.clone(),
                SweepStimulus::Pulse,
            ),
            ExperimentId::RandomVectors => (
                vec![GateKind::Nand2, GateKind::Nor2],
                vec![BodyStyle::Cmos, BodyStyle::Vtmos],
                vec![BASE_FREQUENCY],
                SweepStimulus::Prbs {
                    seeds: cfg.seed_pairs().to_vec(),
                    bits: cfg.bits,
                },
            ),
        };
        let v_an = match id {
            // the crossover and PRBS runs compare CMOS with the strongest bias
            ExperimentId::FrequencySweep | ExperimentId::RandomVectors => {
                vec![cfg.v_an.iter().copied().fold(f64::NAN, f64::max)]
            }
            _ => cfg.v_an.clone(),
        };
        let spec = Self {
            id,
            gates,
            styles,
            v_an,
            frequencies,
            stimulus,
            card: cfg.model_card()?,
            solver: cfg.solver,
            vdd: cfg.vdd,
            load_cap: cfg.load_cap,
            jobs: cfg.jobs,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.gates.is_empty()
            || self.styles.is_empty()
            || self.v_an.is_empty()
            || self.frequencies.is_empty()
        {
            return bad("sweep grids must be non-empty");
        }
        if self.v_an.iter().any(|v| !(0.0..=self.vdd).contains(v)) {
            return bad("every v_an must lie in [0, vdd]");
        }
        if self.frequencies.iter().any(|f| !(*f > 0.0)) {
            return bad("frequencies must be positive");
        }
        if !(self.vdd > 0.0) || !(self.load_cap >= 0.0) {
            return bad("vdd must be positive and load_cap non-negative");
        }
        if let SweepStimulus::Prbs { seeds, bits } = &self.stimulus {
            if seeds.iter().any(|s| s[0] == s[1]) {
                return bad("each PRBS input needs its own seed");
            }
            if *bits < MIN_PRBS_BITS {
                return bad("bits must be at least 64");
            }
        }
        Ok(())
    }

    /// A gate built from this sweep's card and supply.
    pub fn gate(
        &self,
        gate: GateKind,
        style: BodyStyle,
        v_an: f64,
        stimulus: InputStimulus,
    ) -> GateSpec {
        let mut g = GateSpec::new(gate, style);
        if style == BodyStyle::Vtmos {
            g.v_an = v_an;
            g.v_ap = v_an;
        }
        g.vdd = self.vdd;
        g.nmos = self.card.nmos;
        g.pmos = self.card.pmos;
        g.load_cap = self.load_cap;
        g.stimulus = stimulus;
        g
    }
}
