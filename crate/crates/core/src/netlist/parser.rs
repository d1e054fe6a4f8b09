//! Minimal SPICE-subset reader and writer.
//!
//! ```text
//! <title line>
//! * comment
//! Mname drain gate source body model
//! Vname plus minus [DC] value
//! Vname plus minus PULSE(v0 v1 delay rise fall width period)
//! Vname plus minus PRBS(v0 v1 bit_period seed [edge [delay]])
//! Rname a b ohms
//! Cname a b farads
//! Dname anode cathode model
//! .model name NMOS|PMOS key=value ...
//! .model name D [is=..] [n=..] [cj=..]
//! .end
//! ```
//!
//! Everything except the title is case-insensitive and stored lower-case.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use super::circuit::{Circuit, Element, Model, Prbs, Pulse, SourceSpec, GROUND};
use crate::device::{DiodeParams, MosKind, MosfetParams};
use crate::units::{format_value, parse_value};

/// A located parse or validation message. Line and column are 1-based;
/// zero means "not tied to a location".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn global(message: impl Into<String>) -> Self {
        Self::new(0, 0, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(
                f,
                "line {}, column {}: {}",
                self.line, self.column, self.message
            )
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        let sep = c.is_whitespace() || matches!(c, '(' | ')' | ',');
        if c == '=' {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
            out.push(Token {
                text: &line[i..i + 1],
                column: i + 1,
            });
        } else if sep {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

struct LineCtx<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
    raw_len: usize,
}

impl<'a> LineCtx<'a> {
    fn err(&self, tok: usize, msg: impl Into<String>) -> Diagnostic {
        let column = self
            .tokens
            .get(tok)
            .map(|t| t.column)
            .unwrap_or(self.raw_len + 1);
        Diagnostic::new(self.line, column, msg)
    }

    fn name(&self, i: usize) -> String {
        self.tokens[i].text.to_ascii_lowercase()
    }

    fn value(&self, i: usize) -> Result<f64, Diagnostic> {
        let tok = self
            .tokens
            .get(i)
            .ok_or_else(|| self.err(i, "missing value"))?;
        parse_value(tok.text).map_err(|m| self.err(i, m))
    }

    fn positive(&self, i: usize, what: &str) -> Result<f64, Diagnostic> {
        let v = self.value(i)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(i, format!("{what} must be positive")))
        }
    }

    fn arity(&self, expected: usize, what: &str) -> Result<(), Diagnostic> {
        if self.tokens.len() != expected {
            Err(self.err(
                expected.min(self.tokens.len()),
                format!(
                    "{what} expects {} fields, found {}",
                    expected,
                    self.tokens.len()
                ),
            ))
        } else {
            Ok(())
        }
    }
}

fn parse_seed(text: &str) -> Option<u16> {
    let t = text.to_ascii_lowercase();
    match t.strip_prefix("0x") {
        Some(hex) => u16::from_str_radix(hex, 16).ok(),
        None => t.parse().ok(),
    }
}

fn parse_source(ctx: &LineCtx<'_>) -> Result<SourceSpec, Diagnostic> {
    let t = &ctx.tokens;
    if t.len() < 4 {
        return Err(ctx.err(t.len(), "voltage source expects `V name plus minus spec`"));
    }
    let kw = t[3].text.to_ascii_lowercase();
    match kw.as_str() {
        "dc" => {
            ctx.arity(5, "DC source")?;
            Ok(SourceSpec::Dc(ctx.value(4)?))
        }
        "pulse" => {
            ctx.arity(11, "PULSE source")?;
            let p = Pulse {
                v0: ctx.value(4)?,
                v1: ctx.value(5)?,
                delay: ctx.value(6)?,
                rise: ctx.value(7)?,
                fall: ctx.value(8)?,
                width: ctx.value(9)?,
                period: ctx.positive(10, "period")?,
            };
            if p.rise < 0.0 || p.fall < 0.0 || p.width < 0.0 || p.delay < 0.0 {
                return Err(ctx.err(6, "pulse delay, rise, fall and width must be >= 0"));
            }
            if p.rise + p.width + p.fall > p.period {
                return Err(ctx.err(10, "pulse does not fit in its period"));
            }
            Ok(SourceSpec::Pulse(p))
        }
        "prbs" => {
            if !(8..=10).contains(&t.len()) {
                return Err(ctx.err(t.len().min(10), "PRBS expects 4 to 6 parameters"));
            }
            let seed = parse_seed(t[7].text).ok_or_else(|| ctx.err(7, "invalid LFSR seed"))?;
            if seed == 0 {
                return Err(ctx.err(7, "LFSR seed must be non-zero"));
            }
            let bit_period = ctx.positive(6, "bit period")?;
            let edge = if t.len() > 8 {
                ctx.value(8)?
            } else {
                bit_period / 400.0
            };
            let delay = if t.len() > 9 { ctx.value(9)? } else { 0.0 };
            if edge < 0.0 || edge >= bit_period || delay < 0.0 {
                return Err(ctx.err(8, "PRBS edge must be in [0, bit period) and delay >= 0"));
            }
            Ok(SourceSpec::Prbs(Prbs {
                v0: ctx.value(4)?,
                v1: ctx.value(5)?,
                bit_period,
                seed,
                edge,
                delay,
            }))
        }
        _ => {
            ctx.arity(4, "DC source")?;
            Ok(SourceSpec::Dc(ctx.value(3)?))
        }
    }
}

fn parse_model(ctx: &LineCtx<'_>) -> Result<(String, Model), Diagnostic> {
    let t = &ctx.tokens;
    if t.len() < 3 {
        return Err(ctx.err(t.len(), ".model expects a name and a type"));
    }
    let name = ctx.name(1);
    let kind = t[2].text.to_ascii_lowercase();
    let mut pairs = Vec::new();
    let mut i = 3;
    while i < t.len() {
        if i + 2 >= t.len() || t[i + 1].text != "=" {
            return Err(ctx.err(i, "expected `key=value`"));
        }
        pairs.push((i, t[i].text.to_ascii_lowercase(), ctx.value(i + 2)?));
        i += 3;
    }
    match kind.as_str() {
        "nmos" | "pmos" => {
            let mk: MosKind = kind.parse().map_err(|_| ctx.err(2, "bad kind"))?;
            let mut p = MosfetParams::reference(mk);
            for (col, key, v) in pairs {
                p.set(&key, v)
                    .map_err(|_| ctx.err(col, format!("unknown MOSFET parameter `{key}`")))?;
            }
            p.validate().map_err(|e| ctx.err(1, e.to_string()))?;
            Ok((name, Model::Mosfet(p)))
        }
        "d" => {
            let mut d = DiodeParams::default();
            for (col, key, v) in pairs {
                match key.as_str() {
                    "is" => d.i_sat = v,
                    "n" => d.emission = v,
                    "cj" => d.cap = v,
                    _ => return Err(ctx.err(col, format!("unknown diode parameter `{key}`"))),
                }
            }
            d.validate().map_err(|e| ctx.err(1, e.to_string()))?;
            Ok((name, Model::Diode(d)))
        }
        other => Err(ctx.err(2, format!("unknown model type `{other}`"))),
    }
}

/// Parses netlist text into a structurally checked [`Circuit`].
///
/// Reports every problem found, each with line and column.
pub fn parse_netlist(text: &str) -> Result<Circuit, Vec<Diagnostic>> {
    let mut lines = text.lines().enumerate();
    let title = lines
        .next()
        .map(|(_, l)| l.trim().to_string())
        .unwrap_or_default();
    let mut circuit = Circuit::new(title);
    let mut diags = Vec::new();
    let mut element_lines = Vec::new();
    let mut names = BTreeSet::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let ctx = LineCtx {
            line: line_no,
            tokens: tokenize(raw),
            raw_len: raw.len(),
        };
        let head = ctx.tokens[0].text.to_ascii_lowercase();
        if head == ".end" {
            break;
        }
        if head == ".model" {
            match parse_model(&ctx) {
                Ok((name, model)) => {
                    if circuit.models.insert(name.clone(), model).is_some() {
                        diags.push(ctx.err(1, format!("duplicate model `{name}`")));
                    }
                }
                Err(d) => diags.push(d),
            }
            continue;
        }
        if head.starts_with('.') {
            diags.push(ctx.err(0, format!("unsupported directive `{head}`")));
            continue;
        }
        let parsed = match head.chars().next() {
            Some('m') => ctx.arity(6, "MOSFET").map(|_| Element::Mosfet {
                name: head.clone(),
                drain: ctx.name(1),
                gate: ctx.name(2),
                source: ctx.name(3),
                body: ctx.name(4),
                model: ctx.name(5),
            }),
            Some('v') => parse_source(&ctx).map(|spec| Element::VSource {
                name: head.clone(),
                plus: ctx.name(1),
                minus: ctx.name(2),
                spec,
            }),
            Some('r') => ctx.arity(4, "resistor").and_then(|_| {
                Ok(Element::Resistor {
                    name: head.clone(),
                    a: ctx.name(1),
                    b: ctx.name(2),
                    ohms: ctx.positive(3, "resistance")?,
                })
            }),
            Some('c') => ctx.arity(4, "capacitor").and_then(|_| {
                Ok(Element::Capacitor {
                    name: head.clone(),
                    a: ctx.name(1),
                    b: ctx.name(2),
                    farads: ctx.positive(3, "capacitance")?,
                })
            }),
            Some('d') => ctx.arity(4, "diode").map(|_| Element::Diode {
                name: head.clone(),
                anode: ctx.name(1),
                cathode: ctx.name(2),
                model: ctx.name(3),
            }),
            _ => Err(ctx.err(
                0,
                format!("unknown element prefix in `{}`", ctx.tokens[0].text),
            )),
        };
        match parsed {
            Ok(e) => {
                if !names.insert(e.name().to_string()) {
                    diags.push(ctx.err(0, format!("duplicate element name `{}`", e.name())));
                } else {
                    element_lines.push((line_no, ctx.tokens.last().map(|t| t.column).unwrap_or(1)));
                    circuit.elements.push(e);
                }
            }
            Err(d) => diags.push(d),
        }
    }

    for (e, &(line, col)) in circuit.elements.iter().zip(&element_lines) {
        if let Some(m) = e.model() {
            let ok = matches!(
                (e, circuit.models.get(m)),
                (Element::Mosfet { .. }, Some(Model::Mosfet(_)))
                    | (Element::Diode { .. }, Some(Model::Diode(_)))
            );
            if !ok {
                diags.push(Diagnostic::new(
                    line,
                    col,
                    format!("undefined model reference `{m}` for `{}`", e.name()),
                ));
            }
        }
    }
    if !circuit.nodes().contains(&GROUND) {
        diags.push(Diagnostic::global("no ground node `0`"));
    }

    if diags.is_empty() {
        Ok(circuit)
    } else {
        Err(diags)
    }
}

/// Writes a circuit in the dialect read by [`parse_netlist`].
pub fn print_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", c.title);
    for (name, model) in &c.models {
        match model {
            Model::Mosfet(p) => {
                let _ = write!(out, ".model {} {}", name, p.kind);
                for (k, v) in p.entries() {
                    let _ = write!(out, " {}={}", k, format_value(v));
                }
            }
            Model::Diode(d) => {
                let _ = write!(
                    out,
                    ".model {} d is={} n={} cj={}",
                    name,
                    format_value(d.i_sat),
                    format_value(d.emission),
                    format_value(d.cap)
                );
            }
        }
        out.push('\n');
    }
    let f = format_value;
    for e in &c.elements {
        let _ = match e {
            Element::Mosfet {
                name,
                drain,
                gate,
                source,
                body,
                model,
            } => writeln!(out, "{name} {drain} {gate} {source} {body} {model}"),
            Element::VSource {
                name,
                plus,
                minus,
                spec,
            } => {
                let s = match spec {
                    SourceSpec::Dc(v) => format!("dc {}", f(*v)),
                    SourceSpec::Pulse(p) => format!(
                        "pulse({} {} {} {} {} {} {})",
                        f(p.v0),
                        f(p.v1),
                        f(p.delay),
                        f(p.rise),
                        f(p.fall),
                        f(p.width),
                        f(p.period)
                    ),
                    SourceSpec::Prbs(p) => format!(
                        "prbs({} {} {} 0x{:04x} {} {})",
                        f(p.v0),
                        f(p.v1),
                        f(p.bit_period),
                        p.seed,
                        f(p.edge),
                        f(p.delay)
                    ),
                };
                writeln!(out, "{name} {plus} {minus} {s}")
            }
            Element::Resistor { name, a, b, ohms } => writeln!(out, "{name} {a} {b} {}", f(*ohms)),
            Element::Capacitor { name, a, b, farads } => {
                writeln!(out, "{name} {a} {b} {}", f(*farads))
            }
            Element::Diode {
                name,
                anode,
                cathode,
                model,
            } => writeln!(out, "{name} {anode} {cathode} {model}"),
        };
    }
    out.push_str(".end\n");
    out
}
