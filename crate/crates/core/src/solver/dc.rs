//! Damped Newton iteration, DC operating point and DC sweeps.

use nalgebra::{DMatrix, DVector};

use super::mna::{assemble, AssembleMode, MnaSystem};
use super::{SolutionPoint, SolverError, SolverOptions, Stage};
use crate::netlist::Circuit;

/// Largest node-voltage change allowed in one Newton update (V).
const MAX_VOLTAGE_STEP: f64 = 0.3;
/// Starting conductance for gmin stepping (S).
const GMIN_START: f64 = 1e-3;
const SOURCE_STEPS: usize = 20;

/// Scratch space reused across Newton solves.
pub(crate) struct Workspace {
    jac: DMatrix<f64>,
    res: DVector<f64>,
    mag: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            jac: DMatrix::zeros(n, n),
            res: DVector::zeros(n),
            mag: vec![0.0; n],
        }
    }
}

/// Newton failure details: iterations spent and the worst unknown.
#[derive(Debug, Clone)]
pub(crate) struct Failure {
    pub iteration: usize,
    pub worst: usize,
}

impl Failure {
    pub(crate) fn into_error(
        self,
        sys: &MnaSystem,
        stage: Stage,
        time: Option<f64>,
    ) -> SolverError {
        let n = sys.node_count();
        let worst_node = if self.worst < n {
            sys.node_names[self.worst].clone()
        } else {
            format!("i({})", sys.sources[self.worst - n].name)
        };
        SolverError::NonConvergence {
            stage,
            iteration: self.iteration,
            worst_node,
            time,
        }
    }
}

/// Solves `f(x) = 0` in place starting from `x`.
pub(crate) fn newton(
    sys: &MnaSystem,
    x: &mut [f64],
    mode: AssembleMode<'_>,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> Result<usize, Failure> {
    let n = sys.node_count();
    let mut worst = 0;
    for iter in 1..=opts.max_newton_iters {
        assemble(sys, x, mode, &mut ws.jac, &mut ws.res, &mut ws.mag);
        let mut residual_ok = true;
        let mut worst_ratio = 0.0;
        for (i, (&f, &m)) in ws.res.iter().zip(&ws.mag).enumerate() {
            let tol = if i < n {
                opts.reltol * m + opts.abstol
            } else {
                opts.reltol * m + opts.vntol
            };
            let ratio = f.abs() / tol;
            if !ratio.is_finite() || ratio > 1.0 {
                residual_ok = false;
            }
            if ratio > worst_ratio || !ratio.is_finite() {
                worst_ratio = ratio;
                worst = i;
            }
        }
        let Some(dx) = ws.jac.clone().lu().solve(&(-&ws.res)) else {
            return Err(Failure {
                iteration: iter,
                worst,
            });
        };
        if dx.iter().any(|d| !d.is_finite()) {
            return Err(Failure {
                iteration: iter,
                worst,
            });
        }
        let max_dv = dx.iter().take(n).fold(0.0f64, |a, d| a.max(d.abs()));
        let scale = if max_dv > MAX_VOLTAGE_STEP {
            MAX_VOLTAGE_STEP / max_dv
        } else {
            1.0
        };
        let mut update_ok = scale == 1.0;
        let mut worst_step = 0.0;
        for (i, d) in dx.iter().enumerate() {
            let tol = if i < n {
                opts.reltol * x[i].abs() + opts.vntol
            } else {
                opts.reltol * x[i].abs() + opts.abstol
            };
            let ratio = d.abs() / tol;
            if ratio > 1.0 {
                update_ok = false;
            }
            if residual_ok && ratio > worst_step {
                worst_step = ratio;
                worst = i;
            }
            x[i] += scale * d;
        }
        if residual_ok && update_ok {
            return Ok(iter);
        }
    }
    Err(Failure {
        iteration: opts.max_newton_iters,
        worst,
    })
}

/// Operating point at time `t` with plain Newton, then gmin stepping, then
/// source stepping. `x` holds the initial guess and receives the solution.
pub(crate) fn solve_dc(
    sys: &MnaSystem,
    x: &mut Vec<f64>,
    t: f64,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> Result<(), SolverError> {
    let guess = x.clone();
    let mode = |gmin, source_scale| AssembleMode::Dc {
        t,
        source_scale,
        gmin,
    };
    if newton(sys, x, mode(opts.gmin, 1.0), opts, ws).is_ok() {
        return Ok(());
    }

    x.copy_from_slice(&guess);
    let mut gmin = GMIN_START.max(opts.gmin);
    let mut stepped = true;
    loop {
        if newton(sys, x, mode(gmin, 1.0), opts, ws).is_err() {
            stepped = false;
            break;
        }
        if gmin <= opts.gmin {
            break;
        }
        gmin = (gmin / 10.0).max(opts.gmin);
    }
    if stepped {
        return Ok(());
    }

    x.iter_mut().for_each(|v| *v = 0.0);
    for k in 1..=SOURCE_STEPS {
        let scale = k as f64 / SOURCE_STEPS as f64;
        if let Err(f) = newton(sys, x, mode(opts.gmin, scale), opts, ws) {
            return Err(f.into_error(sys, Stage::SourceStepping, None));
        }
    }
    Ok(())
}

pub(crate) fn solution(sys: &MnaSystem, x: &[f64]) -> SolutionPoint {
    let n = sys.node_count();
    SolutionPoint {
        node_names: sys.node_names.clone(),
        voltages: x[..n].to_vec(),
        source_names: sys.source_names(),
        currents: x[n..].to_vec(),
    }
}

/// DC operating point with every source at its `t = 0` value.
pub fn dc_operating_point(c: &Circuit, opts: &SolverOptions) -> Result<SolutionPoint, SolverError> {
    opts.check()?;
    let sys = MnaSystem::compile(c, 0.0)?;
    let mut x = vec![0.0; sys.dimension()];
    let mut ws = Workspace::new(sys.dimension());
    solve_dc(&sys, &mut x, 0.0, opts, &mut ws)?;
    Ok(solution(&sys, &x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub solution: SolutionPoint,
}

/// Steps one source through `values`, each point warm-started from the last.
pub fn dc_sweep(
    c: &Circuit,
    source: &str,
    values: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SweepPoint>, SolverError> {
    opts.check()?;
    let mut sys = MnaSystem::compile(c, 0.0)?;
    let idx = sys
        .source_index(source)
        .ok_or_else(|| SolverError::UnknownSource(source.to_string()))?;
    let mut x = vec![0.0; sys.dimension()];
    let mut ws = Workspace::new(sys.dimension());
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        sys.set_dc(idx, value);
        if let Err(first) = solve_dc(&sys, &mut x, 0.0, opts, &mut ws) {
            // a poor warm start can mislead Newton; retry from zero
            x.iter_mut().for_each(|v| *v = 0.0);
            if solve_dc(&sys, &mut x, 0.0, opts, &mut ws).is_err() {
                return Err(SolverError::SweepPoint {
                    source_name: source.to_string(),
                    value,
                    cause: Box::new(first),
                });
            }
        }
        out.push(SweepPoint {
            value,
            solution: solution(&sys, &x),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{diode_current, DiodeParams};
    use crate::netlist::{build_gate, parse_netlist, BodyStyle, GateKind, GateSpec, InputStimulus};

    fn op(text: &str) -> SolutionPoint {
        dc_operating_point(&parse_netlist(text).unwrap(), &SolverOptions::default()).unwrap()
    }

    #[test]
    fn resistive_divider() {
        let s = op("t\nV1 top 0 0.2\nR1 top mid 10k\nR2 mid 0 10k\n");
        let v = s.voltage("mid").unwrap();
        assert!((v - 0.1).abs() <= 1e-6, "{v}");
        assert!((s.current("v1").unwrap() + 1e-5).abs() < 1e-10);
    }

    #[test]
    fn diode_resistor_matches_bisection() {
        let s = op("t\n.model dx d is=1e-18 n=1\nV1 in 0 0.5\nR1 in a 1meg\nD1 a 0 dx\n");
        let p = DiodeParams::default();
        let f = |v: f64| (0.5 - v) / 1e6 - diode_current(&p, v, 300.0).0 - 1e-12 * v;
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let v = s.voltage("a").unwrap();
        assert!((v - lo).abs() < 1e-6, "{v} vs {lo}");
    }

    fn inverter(style: BodyStyle, vin: f64) -> Circuit {
        let mut spec = GateSpec::new(GateKind::Inverter, style);
        spec.stimulus = InputStimulus::Dc([vin, 0.0]);
        build_gate(&spec).unwrap()
    }

    #[test]
    fn cmos_inverter_rails() {
        let o = SolverOptions::default();
        let hi = dc_operating_point(&inverter(BodyStyle::Cmos, 0.0), &o).unwrap();
        let lo = dc_operating_point(&inverter(BodyStyle::Cmos, 0.2), &o).unwrap();
        let (vh, vl) = (hi.voltage("out").unwrap(), lo.voltage("out").unwrap());
        assert!((vh - 0.2).abs() < 1e-3, "{vh}");
        assert!(vl.abs() < 1e-3, "{vl}");
    }

    #[test]
    fn sweep_is_monotone_and_hysteresis_free() {
        let o = SolverOptions::default();
        let c = inverter(BodyStyle::Dtmos, 0.0);
        let up: Vec<f64> = (0..=40).map(|k| 0.005 * k as f64).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let a = dc_sweep(&c, "vin", &up, &o).unwrap();
        let b = dc_sweep(&c, "vin", &down, &o).unwrap();
        let va: Vec<f64> = a
            .iter()
            .map(|p| p.solution.voltage("out").unwrap())
            .collect();
        let mut vb: Vec<f64> = b
            .iter()
            .map(|p| p.solution.voltage("out").unwrap())
            .collect();
        vb.reverse();
        for w in va.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn unknown_sweep_source() {
        let c = inverter(BodyStyle::Cmos, 0.0);
        let e = dc_sweep(&c, "nope", &[0.0], &SolverOptions::default()).unwrap_err();
        assert_eq!(e, SolverError::UnknownSource("nope".into()));
    }

    #[test]
    fn floating_node_is_rejected() {
        let c = parse_netlist("t\nV1 a 0 1\nC1 a b 1p\n").unwrap();
        let e = dc_operating_point(&c, &SolverOptions::default()).unwrap_err();
        assert!(matches!(e, SolverError::Invalid(_)));
        assert!(!e.is_convergence());
    }

    #[test]
    fn starved_newton_reports_stage() {
        let c = parse_netlist("t\n.model dx d is=1e-18 n=1\nV1 in 0 5\nR1 in a 1\nD1 a 0 dx\n")
            .unwrap();
        // tolerances below float resolution can never be met
        let o = SolverOptions {
            reltol: 1e-30,
            vntol: 1e-30,
            abstol: 1e-30,
            max_newton_iters: 10,
            ..SolverOptions::default()
        };
        let e = dc_operating_point(&c, &o).unwrap_err();
        match e {
            SolverError::NonConvergence { stage, .. } => assert_eq!(stage, Stage::SourceStepping),
            other => panic!("{other}"),
        }
    }
}
