use std::collections::BTreeMap;

use crate::device::{DiodeParams, MosfetParams};
use crate::lfsr::Lfsr16;

pub const GROUND: &str = "0";

/// Trapezoidal pulse, SPICE `PULSE(v0 v1 delay rise fall width period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub v0: f64,
    pub v1: f64,
    pub delay: f64,
    pub rise: f64,
    pub fall: f64,
    pub width: f64,
    pub period: f64,
}

impl Pulse {
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.delay {
            return self.v0;
        }
        let tau = (t - self.delay) % self.period;
        if tau < self.rise {
            self.v0 + (self.v1 - self.v0) * tau / self.rise
        } else if tau < self.rise + self.width {
            self.v1
        } else if tau < self.rise + self.width + self.fall {
            self.v1 + (self.v0 - self.v1) * (tau - self.rise - self.width) / self.fall
        } else {
            self.v0
        }
    }

    pub fn breakpoints(&self, t_stop: f64, out: &mut Vec<f64>) {
        let corners = [
            0.0,
            self.rise,
            self.rise + self.width,
            self.rise + self.width + self.fall,
        ];
        let mut k = 0u64;
        loop {
            let start = self.delay + k as f64 * self.period;
            if start > t_stop {
                break;
            }
            out.extend(corners.iter().map(|c| start + c).filter(|&t| t <= t_stop));
            k += 1;
        }
    }
}

/// Pseudo-random bit stream from a 16-bit LFSR.
///
/// Bit `k` occupies `[delay + k*bit_period, delay + (k+1)*bit_period)`; a
/// change of level ramps linearly over `edge` at the start of the bit.
/// Before `delay` the output sits at `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prbs {
    pub v0: f64,
    pub v1: f64,
    pub bit_period: f64,
    pub seed: u16,
    pub edge: f64,
    pub delay: f64,
}

impl Prbs {
    /// Bits needed to cover `[0, t_stop]`.
    pub fn bits_until(&self, t_stop: f64) -> Vec<bool> {
        let n = ((t_stop - self.delay).max(0.0) / self.bit_period).floor() as usize + 2;
        Lfsr16::new(self.seed)
            .map(|l| l.take(n).collect())
            .unwrap_or_default()
    }

    fn level(&self, bit: bool) -> f64 {
        if bit {
            self.v1
        } else {
            self.v0
        }
    }

    /// Value at `t` given precomputed bits (see [`Prbs::bits_until`]).
    pub fn value_with_bits(&self, t: f64, bits: &[bool]) -> f64 {
        if t < self.delay || bits.is_empty() {
            return self.v0;
        }
        let pos = (t - self.delay) / self.bit_period;
        let k = (pos.floor() as usize).min(bits.len() - 1);
        let now = self.level(bits[k]);
        let before = if k == 0 {
            self.v0
        } else {
            self.level(bits[k - 1])
        };
        let into = t - self.delay - k as f64 * self.bit_period;
        if into < self.edge && self.edge > 0.0 {
            before + (now - before) * into / self.edge
        } else {
            now
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.value_with_bits(t, &self.bits_until(t))
    }

    pub fn breakpoints(&self, t_stop: f64, out: &mut Vec<f64>) {
        let bits = self.bits_until(t_stop);
        let mut prev = false;
        for (k, &b) in bits.iter().enumerate() {
            let start = self.delay + k as f64 * self.bit_period;
            if start > t_stop {
                break;
            }
            if b != prev {
                out.push(start);
                if start + self.edge <= t_stop {
                    out.push(start + self.edge);
                }
            }
            prev = b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Dc(f64),
    Pulse(Pulse),
    Prbs(Prbs),
}

impl SourceSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Dc(v) => *v,
            SourceSpec::Pulse(p) => p.value_at(t),
            SourceSpec::Prbs(p) => p.value_at(t),
        }
    }

    /// Repetition interval of the stimulus, if any.
    pub fn period(&self) -> Option<f64> {
        match self {
            SourceSpec::Dc(_) => None,
            SourceSpec::Pulse(p) => Some(p.period),
            SourceSpec::Prbs(p) => Some(p.bit_period),
        }
    }

    pub fn breakpoints(&self, t_stop: f64, out: &mut Vec<f64>) {
        match self {
            SourceSpec::Dc(_) => {}
            SourceSpec::Pulse(p) => p.breakpoints(t_stop, out),
            SourceSpec::Prbs(p) => p.breakpoints(t_stop, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Mosfet {
        name: String,
        drain: String,
        gate: String,
        source: String,
        body: String,
        model: String,
    },
    VSource {
        name: String,
        plus: String,
        minus: String,
        spec: SourceSpec,
    },
    Resistor {
        name: String,
        a: String,
        b: String,
        ohms: f64,
    },
    Capacitor {
        name: String,
        a: String,
        b: String,
        farads: f64,
    },
    Diode {
        name: String,
        anode: String,
        cathode: String,
        model: String,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Mosfet { name, .. }
            | Element::VSource { name, .. }
            | Element::Resistor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::Diode { name, .. } => name,
        }
    }

    pub fn nodes(&self) -> Vec<&str> {
        match self {
            Element::Mosfet {
                drain,
                gate,
                source,
                body,
                ..
            } => vec![drain, gate, source, body],
            Element::VSource { plus, minus, .. } => vec![plus, minus],
            Element::Resistor { a, b, .. } | Element::Capacitor { a, b, .. } => vec![a, b],
            Element::Diode { anode, cathode, .. } => vec![anode, cathode],
        }
    }

    pub fn model(&self) -> Option<&str> {
        match self {
            Element::Mosfet { model, .. } | Element::Diode { model, .. } => Some(model),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Mosfet(MosfetParams),
    Diode(DiodeParams),
}

/// A flat circuit: title, elements, and named model cards.
///
/// Names and nodes are stored lower-case; node `0` is ground.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub title: String,
    pub elements: Vec<Element>,
    pub models: BTreeMap<String, Model>,
}

impl Circuit {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    /// Distinct nodes in order of first appearance (ground included).
    pub fn nodes(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.elements {
            for n in e.nodes() {
                if !seen.contains(&n) {
                    seen.push(n);
                }
            }
        }
        seen
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements
            .iter()
            .find(|e| e.name().eq_ignore_ascii_case(name))
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements
            .iter_mut()
            .find(|e| e.name().eq_ignore_ascii_case(name))
    }

    /// Number of elements of each kind: (mosfets, vsources, resistors, capacitors, diodes).
    pub fn census(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for e in &self.elements {
            let i = match e {
                Element::Mosfet { .. } => 0,
                Element::VSource { .. } => 1,
                Element::Resistor { .. } => 2,
                Element::Capacitor { .. } => 3,
                Element::Diode { .. } => 4,
            };
            c[i] += 1;
        }
        c
    }

    /// Removes every zero-valued DC source and merges its two nodes into
    /// whichever appears first (ground always wins).
    pub fn collapse_zero_sources(&self) -> Circuit {
        let mut out = self.clone();
        loop {
            let found = out.elements.iter().position(
                |e| matches!(e, Element::VSource { spec: SourceSpec::Dc(v), .. } if *v == 0.0),
            );
            let Some(idx) = found else { break };
            let order: Vec<String> = out.nodes().into_iter().map(String::from).collect();
            let Element::VSource { plus, minus, .. } = out.elements.remove(idx) else {
                unreachable!()
            };
            let rank = |n: &str| order.iter().position(|x| x == n).unwrap_or(usize::MAX);
            let keep_minus = plus != GROUND && (minus == GROUND || rank(&minus) < rank(&plus));
            let (keep, drop) = if keep_minus {
                (minus, plus)
            } else {
                (plus, minus)
            };
            for e in &mut out.elements {
                rename_node(e, &drop, &keep);
            }
        }
        out
    }
}

fn rename_node(e: &mut Element, from: &str, to: &str) {
    let slots: Vec<&mut String> = match e {
        Element::Mosfet {
            drain,
            gate,
            source,
            body,
            ..
        } => vec![drain, gate, source, body],
        Element::VSource { plus, minus, .. } => vec![plus, minus],
        Element::Resistor { a, b, .. } | Element::Capacitor { a, b, .. } => vec![a, b],
        Element::Diode { anode, cathode, .. } => vec![anode, cathode],
    };
    for s in slots {
        if s == from {
            *s = to.to_string();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse() -> Pulse {
        Pulse {
            v0: 0.0,
            v1: 0.2,
            delay: 1.0,
            rise: 0.1,
            fall: 0.2,
            width: 0.4,
            period: 2.0,
        }
    }

    #[test]
    fn pulse_shape() {
        let p = pulse();
        assert_eq!(p.value_at(0.5), 0.0);
        assert!((p.value_at(1.05) - 0.1).abs() < 1e-12);
        assert_eq!(p.value_at(1.3), 0.2);
        assert!((p.value_at(1.6) - 0.1).abs() < 1e-12);
        assert_eq!(p.value_at(1.9), 0.0);
        assert_eq!(p.value_at(3.3), 0.2);
    }

    #[test]
    fn pulse_breakpoints() {
        let mut bp = Vec::new();
        pulse().breakpoints(3.2, &mut bp);
        let expect = [1.0, 1.1, 1.5, 1.7, 3.0, 3.1];
        assert_eq!(bp.len(), expect.len());
        for (a, b) in bp.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prbs_follows_lfsr() {
        let p = Prbs {
            v0: 0.0,
            v1: 0.2,
            bit_period: 1.0,
            seed: 0xACE1,
            edge: 0.1,
            delay: 0.0,
        };
        let bits = Lfsr16::sequence(0xACE1, 20).unwrap();
        for (k, &b) in bits.iter().enumerate() {
            let v = p.value_at(k as f64 + 0.5);
            assert_eq!(v, if b { 0.2 } else { 0.0 });
        }
        let mut bp = Vec::new();
        p.breakpoints(19.0, &mut bp);
        assert!(bp.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_source_collapse_merges_nodes() {
        let mut c = Circuit::new("t");
        c.elements.push(Element::VSource {
            name: "v1".into(),
            plus: "a".into(),
            minus: "b".into(),
            spec: SourceSpec::Dc(0.0),
        });
        c.elements.push(Element::Resistor {
            name: "r1".into(),
            a: "b".into(),
            b: "0".into(),
            ohms: 1.0,
        });
        let d = c.collapse_zero_sources();
        assert_eq!(d.elements.len(), 1);
        assert_eq!(d.elements[0].nodes(), vec!["a", "0"]);
    }
}
