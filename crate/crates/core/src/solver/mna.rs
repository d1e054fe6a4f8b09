//! Circuit compilation and MNA stamping.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per voltage source. [`assemble`] produces the residual `f(x)` (sum of
//! currents leaving each node, plus the source constraint rows) and its
//! Jacobian; Newton solves `J dx = -f`.

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::device::{diode_current, evaluate, DiodeParams, MosKind, MosfetParams, OperatingPoint};
use crate::netlist::{validate, Circuit, Element, Model, SourceSpec, GROUND};

/// Junction temperature for stand-alone diodes.
const DIODE_TEMP: f64 = 300.0;

type Node = Option<usize>;

#[derive(Debug, Clone)]
pub(crate) enum SourceWave {
    Fixed(SourceSpec),
    Prbs {
        spec: crate::netlist::Prbs,
        bits: Vec<bool>,
    },
}

impl SourceWave {
    fn value(&self, t: f64) -> f64 {
        match self {
            SourceWave::Fixed(s) => s.value_at(t),
            SourceWave::Prbs { spec, bits } => spec.value_with_bits(t, bits),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SourceBranch {
    pub name: String,
    pub plus: Node,
    pub minus: Node,
    pub wave: SourceWave,
    pub spec: SourceSpec,
}

#[derive(Debug, Clone, Copy)]
struct Cap {
    a: Node,
    b: Node,
    farads: f64,
}

#[derive(Debug, Clone, Copy)]
struct Junction {
    anode: Node,
    cathode: Node,
    params: DiodeParams,
    temp: f64,
}

#[derive(Debug, Clone, Copy)]
struct Mos {
    d: Node,
    g: Node,
    s: Node,
    b: Node,
    params: MosfetParams,
}

/// Capacitor history for the companion model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CapState {
    pub voltage: f64,
    pub current: f64,
}

/// A circuit lowered to index form, ready for stamping.
#[derive(Debug, Clone)]
pub struct MnaSystem {
    pub(crate) node_names: Vec<String>,
    pub(crate) sources: Vec<SourceBranch>,
    resistors: Vec<(Node, Node, f64)>,
    caps: Vec<Cap>,
    junctions: Vec<Junction>,
    mosfets: Vec<Mos>,
}

/// What kind of equation set to assemble.
#[derive(Debug, Clone, Copy)]
pub enum AssembleMode<'a> {
    /// Capacitors open; sources at time `t` scaled by `source_scale`.
    Dc {
        t: f64,
        source_scale: f64,
        gmin: f64,
    },
    /// One implicit step of size `h` ending at `t` from capacitor history.
    Transient {
        t: f64,
        h: f64,
        trapezoidal: bool,
        history: &'a [CapState],
        gmin: f64,
    },
}

impl MnaSystem {
    /// Validates and lowers a circuit. PRBS bit streams are expanded up to
    /// `horizon` seconds.
    pub fn compile(c: &Circuit, horizon: f64) -> Result<Self, SolverError> {
        let diags = validate(c);
        if !diags.is_empty() {
            return Err(SolverError::Invalid(diags));
        }
        let node_names: Vec<String> = c
            .nodes()
            .into_iter()
            .filter(|n| *n != GROUND)
            .map(String::from)
            .collect();
        let ix = |n: &str| -> Node { node_names.iter().position(|x| x == n) };
        let mut sys = MnaSystem {
            node_names: node_names.clone(),
            sources: Vec::new(),
            resistors: Vec::new(),
            caps: Vec::new(),
            junctions: Vec::new(),
            mosfets: Vec::new(),
        };
        for e in &c.elements {
            match e {
                Element::Resistor { a, b, ohms, .. } => {
                    sys.resistors.push((ix(a), ix(b), 1.0 / ohms))
                }
                Element::Capacitor { a, b, farads, .. } => sys.caps.push(Cap {
                    a: ix(a),
                    b: ix(b),
                    farads: *farads,
                }),
                Element::VSource {
                    name,
                    plus,
                    minus,
                    spec,
                } => {
                    let wave = match spec {
                        SourceSpec::Prbs(p) => SourceWave::Prbs {
                            spec: *p,
                            bits: p.bits_until(horizon),
                        },
                        other => SourceWave::Fixed(*other),
                    };
                    sys.sources.push(SourceBranch {
                        name: name.clone(),
                        plus: ix(plus),
                        minus: ix(minus),
                        wave,
                        spec: *spec,
                    });
                }
                Element::Diode {
                    anode,
                    cathode,
                    model,
                    ..
                } => {
                    let Some(Model::Diode(params)) = c.models.get(model) else {
                        unreachable!("validated")
                    };
                    sys.junctions.push(Junction {
                        anode: ix(anode),
                        cathode: ix(cathode),
                        params: *params,
                        temp: DIODE_TEMP,
                    });
                    if params.cap > 0.0 {
                        sys.caps.push(Cap {
                            a: ix(anode),
                            b: ix(cathode),
                            farads: params.cap,
                        });
                    }
                }
                Element::Mosfet {
                    drain,
                    gate,
                    source,
                    body,
                    model,
                    ..
                } => {
                    let Some(Model::Mosfet(params)) = c.models.get(model) else {
                        unreachable!("validated")
                    };
                    let (d, g, s, b) = (ix(drain), ix(gate), ix(source), ix(body));
                    sys.mosfets.push(Mos {
                        d,
                        g,
                        s,
                        b,
                        params: *params,
                    });
                    for (x, y, farads) in [
                        (g, s, params.cgs),
                        (g, d, params.cgd),
                        (g, b, params.cgb),
                        (b, s, params.junction.cap),
                        (b, d, params.junction.cap),
                    ] {
                        if farads > 0.0 {
                            sys.caps.push(Cap { a: x, b: y, farads });
                        }
                    }
                    // body junctions: p side is the body for NMOS, the
                    // diffusion for PMOS
                    for diff in [s, d] {
                        let (anode, cathode) = match params.kind {
                            MosKind::Nmos => (b, diff),
                            MosKind::Pmos => (diff, b),
                        };
                        sys.junctions.push(Junction {
                            anode,
                            cathode,
                            params: params.junction,
                            temp: params.temp_kelvin,
                        });
                    }
                }
            }
        }
        Ok(sys)
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    /// Total number of unknowns.
    pub fn dimension(&self) -> usize {
        self.node_names.len() + self.sources.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn source_names(&self) -> Vec<String> {
        self.sources.iter().map(|s| s.name.clone()).collect()
    }

    pub(crate) fn source_index(&self, name: &str) -> Option<usize> {
        self.sources
            .iter()
            .position(|s| s.name.eq_ignore_ascii_case(name))
    }

    /// Replaces a source with a DC value (used by sweeps).
    pub(crate) fn set_dc(&mut self, idx: usize, value: f64) {
        self.sources[idx].wave = SourceWave::Fixed(SourceSpec::Dc(value));
        self.sources[idx].spec = SourceSpec::Dc(value);
    }

    pub(crate) fn source_specs(&self) -> impl Iterator<Item = &SourceSpec> {
        self.sources.iter().map(|s| &s.spec)
    }

    /// Voltage across each capacitor for the solution `x`.
    pub fn cap_voltages(&self, x: &[f64]) -> Vec<f64> {
        self.caps
            .iter()
            .map(|c| volt(x, c.a) - volt(x, c.b))
            .collect()
    }

    pub fn cap_count(&self) -> usize {
        self.caps.len()
    }

    /// Advances capacitor history after a converged step of size `h`.
    pub fn update_history(&self, x: &[f64], h: f64, trapezoidal: bool, history: &mut [CapState]) {
        for (c, st) in self.caps.iter().zip(history.iter_mut()) {
            let v = volt(x, c.a) - volt(x, c.b);
            let current = if trapezoidal {
                2.0 * c.farads / h * (v - st.voltage) - st.current
            } else {
                c.farads / h * (v - st.voltage)
            };
            *st = CapState {
                voltage: v,
                current,
            };
        }
    }
}

#[inline]
fn volt(x: &[f64], n: Node) -> f64 {
    n.map_or(0.0, |i| x[i])
}

struct Stamper<'a> {
    jac: &'a mut DMatrix<f64>,
    res: &'a mut DVector<f64>,
    mag: &'a mut [f64],
}

impl Stamper<'_> {
    /// Current `i` leaving node `a` and entering node `b`.
    fn current(&mut self, a: Node, b: Node, i: f64) {
        if let Some(a) = a {
            self.res[a] += i;
            self.mag[a] += i.abs();
        }
        if let Some(b) = b {
            self.res[b] -= i;
            self.mag[b] += i.abs();
        }
    }

    /// d(current leaving `row`)/d(v_col) contribution `g`, with the usual
    /// sign for the opposite node.
    fn partial(&mut self, a: Node, b: Node, col: Node, g: f64) {
        if let Some(c) = col {
            if let Some(a) = a {
                self.jac[(a, c)] += g;
            }
            if let Some(b) = b {
                self.jac[(b, c)] -= g;
            }
        }
    }

    fn conductance(&mut self, a: Node, b: Node, g: f64) {
        self.partial(a, b, a, g);
        self.partial(a, b, b, -g);
    }
}

/// Builds the Jacobian and residual at `x`.
///
/// `mag` receives, per row, the sum of absolute current contributions so the
/// caller can form relative KCL tolerances.
pub fn assemble(
    sys: &MnaSystem,
    x: &[f64],
    mode: AssembleMode<'_>,
    jac: &mut DMatrix<f64>,
    res: &mut DVector<f64>,
    mag: &mut [f64],
) {
    let n = sys.node_count();
    jac.fill(0.0);
    res.fill(0.0);
    mag.iter_mut().for_each(|m| *m = 0.0);
    let mut st = Stamper { jac, res, mag };

    let (t, scale, gmin) = match mode {
        AssembleMode::Dc {
            t,
            source_scale,
            gmin,
        } => (t, source_scale, gmin),
        AssembleMode::Transient { t, gmin, .. } => (t, 1.0, gmin),
    };

    for i in 0..n {
        st.current(Some(i), None, gmin * x[i]);
        st.jac[(i, i)] += gmin;
    }

    for &(a, b, g) in &sys.resistors {
        st.current(a, b, g * (volt(x, a) - volt(x, b)));
        st.conductance(a, b, g);
    }

    if let AssembleMode::Transient {
        h,
        trapezoidal,
        history,
        ..
    } = mode
    {
        for (c, hist) in sys.caps.iter().zip(history) {
            let v = volt(x, c.a) - volt(x, c.b);
            let (geq, i) = if trapezoidal {
                let geq = 2.0 * c.farads / h;
                (geq, geq * (v - hist.voltage) - hist.current)
            } else {
                let geq = c.farads / h;
                (geq, geq * (v - hist.voltage))
            };
            st.current(c.a, c.b, i);
            st.conductance(c.a, c.b, geq);
        }
    }

    for j in &sys.junctions {
        let (i, g) = diode_current(&j.params, volt(x, j.anode) - volt(x, j.cathode), j.temp);
        st.current(j.anode, j.cathode, i);
        st.conductance(j.anode, j.cathode, g);
    }

    for m in &sys.mosfets {
        let (vd, vg, vs, vb) = (volt(x, m.d), volt(x, m.g), volt(x, m.s), volt(x, m.b));
        let op = OperatingPoint::new(vg - vs, vd - vs, vb - vs);
        let (i, g) = match m.params.kind {
            MosKind::Nmos => evaluate(&m.params, op),
            MosKind::Pmos => {
                let (i, g) = evaluate(&m.params, op.reflected());
                (-i, g)
            }
        };
        // With either polarity dI/dv_g = g_m, dI/dv_d = g_ds, dI/dv_b = g_mb.
        st.current(m.d, m.s, i);
        st.partial(m.d, m.s, m.g, g.g_m);
        st.partial(m.d, m.s, m.d, g.g_ds);
        st.partial(m.d, m.s, m.b, g.g_mb);
        st.partial(m.d, m.s, m.s, -(g.g_m + g.g_ds + g.g_mb));
    }

    for (k, src) in sys.sources.iter().enumerate() {
        let row = n + k;
        let j = x[row];
        st.current(src.plus, src.minus, j);
        if let Some(p) = src.plus {
            st.jac[(p, row)] += 1.0;
            st.jac[(row, p)] += 1.0;
        }
        if let Some(m) = src.minus {
            st.jac[(m, row)] -= 1.0;
            st.jac[(row, m)] -= 1.0;
        }
        let target = scale * src.wave.value(t);
        st.res[row] = volt(x, src.plus) - volt(x, src.minus) - target;
        st.mag[row] = target.abs();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_gate, parse_netlist, GateKind, GateSpec};

    fn lin_solve(c: &Circuit) -> Vec<f64> {
        let sys = MnaSystem::compile(c, 0.0).unwrap();
        let n = sys.dimension();
        let mut jac = DMatrix::zeros(n, n);
        let mut res = DVector::zeros(n);
        let mut mag = vec![0.0; n];
        let x = vec![0.0; n];
        let mode = AssembleMode::Dc {
            t: 0.0,
            source_scale: 1.0,
            gmin: 0.0,
        };
        assemble(&sys, &x, mode, &mut jac, &mut res, &mut mag);
        let dx = jac.lu().solve(&(-res)).unwrap();
        dx.iter().copied().collect()
    }

    #[test]
    fn divider_system() {
        let c = parse_netlist("t\nV1 top 0 0.2\nR1 top mid 10k\nR2 mid 0 10k\n").unwrap();
        let sys = MnaSystem::compile(&c, 0.0).unwrap();
        assert_eq!(sys.dimension(), 3);
        let x = lin_solve(&c);
        assert!((x[1] - 0.1).abs() < 1e-15);
        // source delivers 10 uA, so the branch current reads -10 uA
        assert!((x[2] + 1e-5).abs() < 1e-18);
    }

    #[test]
    fn diode_resistor_residual_at_bisection_root() {
        let c =
            parse_netlist("t\n.model dx d is=1e-18 n=1\nV1 in 0 0.5\nR1 in a 1meg\nD1 a 0 dx\n")
                .unwrap();
        let sys = MnaSystem::compile(&c, 0.0).unwrap();
        let p = DiodeParams::default();
        // (0.5 - v)/1e6 = i_d(v), solved by bisection
        let f = |v: f64| (0.5 - v) / 1e6 - diode_current(&p, v, DIODE_TEMP).0;
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let va = 0.5 * (lo + hi);
        let i = (0.5 - va) / 1e6;
        // unknowns: in, a, branch
        let x = [0.5, va, -i];
        let n = sys.dimension();
        let mut jac = DMatrix::zeros(n, n);
        let mut res = DVector::zeros(n);
        let mut mag = vec![0.0; n];
        let mode = AssembleMode::Dc {
            t: 0.0,
            source_scale: 1.0,
            gmin: 0.0,
        };
        assemble(&sys, &x, mode, &mut jac, &mut res, &mut mag);
        assert!(res.amax() < 1e-12, "{res}");
    }

    #[test]
    fn vtmos_inverter_dimension() {
        let c = build_gate(&GateSpec::vtmos(GateKind::Inverter, 0.1)).unwrap();
        let sys = MnaSystem::compile(&c, 0.0).unwrap();
        let nodes = c.nodes().len() - 1;
        let sources = c.census()[1];
        // vdd, in, out, bp1, bn1 and vdd, vin, van1, vap1
        assert_eq!((nodes, sources), (5, 4));
        assert_eq!(sys.dimension(), nodes + sources);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = build_gate(&GateSpec::vtmos(GateKind::Nand2, 0.1)).unwrap();
        let sys = MnaSystem::compile(&c, 0.0).unwrap();
        let n = sys.dimension();
        let hist = vec![
            CapState {
                voltage: 0.01,
                current: 1e-9
            };
            sys.cap_count()
        ];
        let mode = AssembleMode::Transient {
            t: 1e-6,
            h: 1e-9,
            trapezoidal: true,
            history: &hist,
            gmin: 1e-12,
        };
        // distinct voltages keep every device away from the v_ds = 0 swap
        let nodes = sys.node_count();
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let scale = if i < nodes { 0.1 } else { 1e-7 };
                scale * (0.37 * i as f64 + 0.2).sin()
            })
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        let mut res = DVector::zeros(n);
        let mut mag = vec![0.0; n];
        assemble(&sys, &x, mode, &mut jac, &mut res, &mut mag);
        let (mut j2, mut rp, mut rm) = (DMatrix::zeros(n, n), DVector::zeros(n), DVector::zeros(n));
        for col in 0..n {
            let h = 1e-7;
            let mut xp = x.clone();
            xp[col] += h;
            assemble(&sys, &xp, mode, &mut j2, &mut rp, &mut mag);
            let mut xm = x.clone();
            xm[col] -= h;
            assemble(&sys, &xm, mode, &mut j2, &mut rm, &mut mag);
            for row in 0..n {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                let an = jac[(row, col)];
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(fd.abs()) + 1e-12,
                    "({row},{col}): {an} vs {fd}"
                );
            }
        }
    }
}
