//! Generator for inverter / NAND2 / NOR2 in CMOS, DTMOS and VTMOS body-tie
//! styles.
//!
//! * CMOS ties NMOS bodies to ground and PMOS bodies to `vdd`.
//! * DTMOS ties every body to its own gate.
//! * VTMOS keeps the gate tie but inserts a floating DC source per device:
//!   `V_AN` from NMOS gate (+) to body (-), and `V_AP` from PMOS body (+)
//!   to gate (-), so the NMOS gate sits above its body and the PMOS gate
//!   below its body.
//!
//! Node names: inputs `in` (inverter) or `a`/`b`, output `out`, supply
//! `vdd`, series node `x1`, VTMOS bodies `bn<k>`/`bp<k>`. Sources: `vdd`,
//! `vin`/`va`/`vb`, bias sources `van<k>`/`vap<k>`.

use std::fmt;
use std::str::FromStr;

use super::circuit::{Circuit, Element, Model, Prbs, Pulse, SourceSpec, GROUND};
use crate::device::MosfetParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Inverter,
    Nand2,
    Nor2,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::Inverter, GateKind::Nand2, GateKind::Nor2];

    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::Inverter => "inverter",
            GateKind::Nand2 => "nand2",
            GateKind::Nor2 => "nor2",
        }
    }

    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            GateKind::Inverter => &["in"],
            _ => &["a", "b"],
        }
    }

    /// Output for the given input levels.
    pub fn logic(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::Inverter => !a,
            GateKind::Nand2 => !(a && b),
            GateKind::Nor2 => !(a || b),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inverter" | "inv" | "not" => Ok(GateKind::Inverter),
            "nand2" | "nand" => Ok(GateKind::Nand2),
            "nor2" | "nor" => Ok(GateKind::Nor2),
            other => Err(GateError::Unknown(format!("gate `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyStyle {
    Cmos,
    Dtmos,
    Vtmos,
}

impl BodyStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            BodyStyle::Cmos => "cmos",
            BodyStyle::Dtmos => "dtmos",
            BodyStyle::Vtmos => "vtmos",
        }
    }
}

impl fmt::Display for BodyStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyStyle {
    type Err = GateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cmos" => Ok(BodyStyle::Cmos),
            "dtmos" => Ok(BodyStyle::Dtmos),
            "vtmos" => Ok(BodyStyle::Vtmos),
            other => Err(GateError::Unknown(format!("style `{other}`"))),
        }
    }
}

/// How the gate inputs are driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputStimulus {
    /// Input A is a square pulse at `frequency`; input B runs at half that
    /// frequency, shifted by a quarter A-period, so all four input pairs
    /// occur once per B period.
    Pulse { frequency: f64, edge: f64 },
    /// Independent LFSR streams per input; B is shifted by a quarter bit.
    Prbs {
        bit_period: f64,
        seeds: [u16; 2],
        edge: f64,
    },
    /// Constant inputs.
    Dc([f64; 2]),
}

impl InputStimulus {
    /// Pulse stimulus with edges scaled as period/400 (25 ns at 100 kHz).
    pub fn pulse(frequency: f64) -> Self {
        InputStimulus::Pulse {
            frequency,
            edge: 1.0 / frequency / 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSpec {
    pub gate: GateKind,
    pub style: BodyStyle,
    /// NMOS gate-to-body offset (V).
    pub v_an: f64,
    /// PMOS body-to-gate offset magnitude (V).
    pub v_ap: f64,
    pub vdd: f64,
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
    pub load_cap: f64,
    pub stimulus: InputStimulus,
}

/// Default output load (F).
pub const DEFAULT_LOAD_CAP: f64 = 1e-15;

impl GateSpec {
    /// Reference devices, 0.2 V supply, 100 kHz pulse input.
    pub fn new(gate: GateKind, style: BodyStyle) -> Self {
        Self {
            gate,
            style,
            v_an: 0.0,
            v_ap: 0.0,
            vdd: 0.2,
            nmos: MosfetParams::reference_nmos(),
            pmos: MosfetParams::reference_pmos(),
            load_cap: DEFAULT_LOAD_CAP,
            stimulus: InputStimulus::pulse(100e3),
        }
    }

    /// VTMOS with symmetric offsets `V_AP = V_AN = bias`.
    pub fn vtmos(gate: GateKind, bias: f64) -> Self {
        Self {
            v_an: bias,
            v_ap: bias,
            ..Self::new(gate, BodyStyle::Vtmos)
        }
    }

    pub fn check(&self) -> Result<(), GateError> {
        if !(self.vdd > 0.0) {
            return Err(GateError::Invalid("vdd must be positive".into()));
        }
        if !(self.load_cap >= 0.0) {
            return Err(GateError::Invalid("load_cap must be >= 0".into()));
        }
        match self.style {
            BodyStyle::Vtmos => {
                for (name, v) in [("V_AN", self.v_an), ("V_AP", self.v_ap)] {
                    if !(0.0..=self.vdd).contains(&v) {
                        return Err(GateError::BiasLimit {
                            name,
                            value: v,
                            vdd: self.vdd,
                        });
                    }
                }
            }
            BodyStyle::Dtmos if self.v_an != 0.0 || self.v_ap != 0.0 => {
                return Err(GateError::Invalid(
                    "DTMOS takes no bias offsets; use VTMOS".into(),
                ));
            }
            _ => {}
        }
        match self.stimulus {
            InputStimulus::Pulse { frequency, edge } => {
                if !(frequency > 0.0) || !(edge >= 0.0) || edge * 2.0 >= 0.5 / frequency {
                    return Err(GateError::Invalid(
                        "pulse edge must fit in a half period".into(),
                    ));
                }
            }
            InputStimulus::Prbs {
                bit_period,
                seeds,
                edge,
            } => {
                if seeds.contains(&0) {
                    return Err(GateError::Invalid("LFSR seeds must be non-zero".into()));
                }
                if !(bit_period > 0.0) || !(edge >= 0.0) || edge >= bit_period / 4.0 {
                    return Err(GateError::Invalid(
                        "PRBS edge must be < bit_period / 4".into(),
                    ));
                }
            }
            InputStimulus::Dc(_) => {}
        }
        self.nmos
            .validate()
            .map_err(|e| GateError::Invalid(e.to_string()))?;
        self.pmos
            .validate()
            .map_err(|e| GateError::Invalid(e.to_string()))
    }

    /// Interval after which the input pattern repeats (B period for pulse
    /// stimuli on two-input gates).
    pub fn super_period(&self) -> Option<f64> {
        match self.stimulus {
            InputStimulus::Pulse { frequency, .. } => Some(match self.gate {
                GateKind::Inverter => 1.0 / frequency,
                _ => 2.0 / frequency,
            }),
            _ => None,
        }
    }

    fn input_sources(&self) -> Vec<(String, SourceSpec)> {
        let names: &[&str] = match self.gate {
            GateKind::Inverter => &["vin"],
            _ => &["va", "vb"],
        };
        names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let spec = match self.stimulus {
                    InputStimulus::Pulse { frequency, edge } => {
                        let period = if k == 0 { 1.0 } else { 2.0 } / frequency;
                        SourceSpec::Pulse(Pulse {
                            v0: 0.0,
                            v1: self.vdd,
                            delay: if k == 0 { 0.0 } else { 0.25 / frequency },
                            rise: edge,
                            fall: edge,
                            width: period / 2.0 - edge,
                            period,
                        })
                    }
                    InputStimulus::Prbs {
                        bit_period,
                        seeds,
                        edge,
                    } => SourceSpec::Prbs(Prbs {
                        v0: 0.0,
                        v1: self.vdd,
                        bit_period,
                        seed: seeds[k],
                        edge,
                        delay: if k == 0 { 0.0 } else { bit_period / 4.0 },
                    }),
                    InputStimulus::Dc(levels) => SourceSpec::Dc(levels[k]),
                };
                (name.to_string(), spec)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GateError {
    #[error(
        "{name} = {value} V is outside [0, V_dd = {vdd} V]; body bias must stay below the supply"
    )]
    BiasLimit {
        name: &'static str,
        value: f64,
        vdd: f64,
    },
    #[error("invalid gate spec: {0}")]
    Invalid(String),
    #[error("unknown {0}")]
    Unknown(String),
}

struct Builder<'a> {
    spec: &'a GateSpec,
    c: Circuit,
    bias_count: [usize; 2],
}

impl Builder<'_> {
    fn mos(&mut self, name: &str, pmos: bool, drain: &str, gate: &str, source: &str) {
        let body = match self.spec.style {
            BodyStyle::Cmos => (if pmos { "vdd" } else { GROUND }).to_string(),
            BodyStyle::Dtmos => gate.to_string(),
            BodyStyle::Vtmos => {
                let slot = &mut self.bias_count[pmos as usize];
                *slot += 1;
                let k = *slot;
                let (body, src, plus, minus, v) = if pmos {
                    let b = format!("bp{k}");
                    (
                        b.clone(),
                        format!("vap{k}"),
                        b,
                        gate.to_string(),
                        self.spec.v_ap,
                    )
                } else {
                    let b = format!("bn{k}");
                    (
                        b.clone(),
                        format!("van{k}"),
                        gate.to_string(),
                        b,
                        self.spec.v_an,
                    )
                };
                self.c.elements.push(Element::VSource {
                    name: src,
                    plus,
                    minus,
                    spec: SourceSpec::Dc(v),
                });
                body
            }
        };
        // keep the MOSFET ahead of its bias source
        let at = self.c.elements.len() - usize::from(self.spec.style == BodyStyle::Vtmos);
        self.c.elements.insert(
            at,
            Element::Mosfet {
                name: name.to_string(),
                drain: drain.to_string(),
                gate: gate.to_string(),
                source: source.to_string(),
                body,
                model: (if pmos { "pch" } else { "nch" }).to_string(),
            },
        );
    }
}

/// Builds the transistor-level circuit for a gate.
pub fn build_gate(spec: &GateSpec) -> Result<Circuit, GateError> {
    spec.check()?;
    let title = match spec.style {
        BodyStyle::Vtmos => format!(
            "{} {} v_an={} v_ap={}",
            spec.style, spec.gate, spec.v_an, spec.v_ap
        ),
        _ => format!("{} {}", spec.style, spec.gate),
    };
    let mut c = Circuit::new(title);
    c.models.insert("nch".into(), Model::Mosfet(spec.nmos));
    c.models.insert("pch".into(), Model::Mosfet(spec.pmos));
    c.elements.push(Element::VSource {
        name: "vdd".into(),
        plus: "vdd".into(),
        minus: GROUND.into(),
        spec: SourceSpec::Dc(spec.vdd),
    });
    for ((name, src), node) in spec.input_sources().into_iter().zip(spec.gate.inputs()) {
        c.elements.push(Element::VSource {
            name,
            plus: node.to_string(),
            minus: GROUND.into(),
            spec: src,
        });
    }
    let mut b = Builder {
        spec,
        c,
        bias_count: [0, 0],
    };
    match spec.gate {
        GateKind::Inverter => {
            b.mos("mp1", true, "out", "in", "vdd");
            b.mos("mn1", false, "out", "in", GROUND);
        }
        GateKind::Nand2 => {
            b.mos("mp1", true, "out", "a", "vdd");
            b.mos("mp2", true, "out", "b", "vdd");
            b.mos("mn1", false, "out", "a", "x1");
            b.mos("mn2", false, "x1", "b", GROUND);
        }
        GateKind::Nor2 => {
            b.mos("mp1", true, "x1", "a", "vdd");
            b.mos("mp2", true, "out", "b", "x1");
            b.mos("mn1", false, "out", "a", GROUND);
            b.mos("mn2", false, "out", "b", GROUND);
        }
    }
    let mut c = b.c;
    if spec.load_cap > 0.0 {
        c.elements.push(Element::Capacitor {
            name: "cl".into(),
            a: "out".into(),
            b: GROUND.into(),
            farads: spec.load_cap,
        });
    }
    Ok(c)
}

/// Names of the VTMOS offset sources in a generated gate.
pub fn bias_source_names(c: &Circuit) -> Vec<String> {
    c.elements
        .iter()
        .filter_map(|e| match e {
            Element::VSource { name, .. } if name.starts_with("van") || name.starts_with("vap") => {
                Some(name.clone())
            }
            _ => None,
        })
        .collect()
}
