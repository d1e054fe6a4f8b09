//! Adaptive transient analysis with step-doubling error control.

use super::dc::{newton, solve_dc, Workspace};
use super::mna::{AssembleMode, CapState, MnaSystem};
use super::{Integration, SolverError, SolverOptions, Waveform, WaveformError};
use crate::netlist::Circuit;

/// Steps per shortest source period when `max_step` is not given.
const STEPS_PER_PERIOD: f64 = 200.0;
/// Steps over the whole run when no source repeats.
const STEPS_PER_RUN: f64 = 100.0;
const MAX_GROWTH: f64 = 2.0;
const SAFETY: f64 = 0.9;

/// Sampled node voltages and source currents.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub times: Vec<f64>,
    /// Signal labels: `v(node)` for nodes, then `i(source)`.
    pub labels: Vec<String>,
    /// `signals[k][j]` is signal `k` at `times[j]`.
    pub signals: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TransientResult {
    fn index(&self, name: &str) -> Option<usize> {
        let lower = name.to_ascii_lowercase();
        let wrapped = if lower.starts_with("v(") || lower.starts_with("i(") {
            lower
        } else {
            format!("v({lower})")
        };
        self.labels
            .iter()
            .position(|l| l.to_ascii_lowercase() == wrapped)
    }

    /// Looks up `v(node)`, `i(source)` or a bare node name.
    pub fn waveform(&self, name: &str) -> Option<Waveform> {
        let k = self.index(name)?;
        Some(Waveform {
            label: self.labels[k].clone(),
            times: self.times.clone(),
            values: self.signals[k].clone(),
        })
    }

    pub fn try_waveform(&self, name: &str) -> Result<Waveform, WaveformError> {
        self.waveform(name)
            .ok_or_else(|| WaveformError::Empty(name.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:e}"));
            for s in &self.signals {
                out.push_str(&format!(",{:e}", s[j]));
            }
            out.push('\n');
        }
        out
    }
}

struct Recorder {
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Recorder {
    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.rows.push(x.to_vec());
    }
}

fn breakpoints(sys: &MnaSystem, t_stop: f64) -> Vec<f64> {
    let mut bps = Vec::new();
    for spec in sys.source_specs() {
        spec.breakpoints(t_stop, &mut bps);
    }
    bps.retain(|&t| t > 0.0 && t < t_stop);
    bps.push(t_stop);
    bps.sort_by(f64::total_cmp);
    let resolution = t_stop * 1e-12;
    bps.dedup_by(|a, b| (*a - *b).abs() <= resolution);
    bps
}

fn default_max_step(sys: &MnaSystem, t_stop: f64) -> f64 {
    sys.source_specs()
        .filter_map(|s| s.period())
        .filter(|p| *p > 0.0)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.min(p)))
        })
        .map_or(t_stop / STEPS_PER_RUN, |p| p / STEPS_PER_PERIOD)
}

/// One implicit step from `x` over `h`, returning the new state and
/// history.
#[allow(clippy::too_many_arguments)]
fn step(
    sys: &MnaSystem,
    x: &[f64],
    hist: &[CapState],
    t: f64,
    h: f64,
    trapezoidal: bool,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> Option<(Vec<f64>, Vec<CapState>)> {
    let mut next = x.to_vec();
    let mode = AssembleMode::Transient {
        t: t + h,
        h,
        trapezoidal,
        history: hist,
        gmin: opts.gmin,
    };
    newton(sys, &mut next, mode, opts, ws).ok()?;
    let mut h2 = hist.to_vec();
    sys.update_history(&next, h, trapezoidal, &mut h2);
    Some((next, h2))
}

/// Integrates from the `t = 0` operating point to `t_stop`.
///
/// The first step after every source breakpoint uses backward Euler; all
/// others use `opts.integration`. Both the midpoint and the end point of
/// each accepted step are recorded.
pub fn transient(
    c: &Circuit,
    t_stop: f64,
    opts: &SolverOptions,
) -> Result<TransientResult, SolverError> {
    opts.check()?;
    if !(t_stop > 0.0) {
        return Err(SolverError::Option("t_stop must be positive".into()));
    }
    let sys = MnaSystem::compile(c, t_stop)?;
    let dim = sys.dimension();
    let n = sys.node_count();
    let mut ws = Workspace::new(dim);

    let mut x = vec![0.0; dim];
    solve_dc(&sys, &mut x, 0.0, opts, &mut ws)?;
    let mut hist: Vec<CapState> = sys
        .cap_voltages(&x)
        .into_iter()
        .map(|voltage| CapState {
            voltage,
            current: 0.0,
        })
        .collect();

    let bps = breakpoints(&sys, t_stop);
    let max_step = opts
        .max_step
        .unwrap_or_else(|| default_max_step(&sys, t_stop));
    let mut rec = Recorder {
        times: Vec::new(),
        rows: Vec::new(),
    };
    rec.push(0.0, &x);

    let mut t = 0.0;
    let mut h = max_step / 10.0;
    let mut after_break = true;
    let mut next_bp = 0;
    let (mut accepted, mut rejected) = (0, 0);

    while t < t_stop {
        while bps[next_bp] <= t {
            next_bp += 1;
        }
        let target = bps[next_bp];
        h = h.min(max_step);
        // land on the breakpoint rather than leave a sliver before it
        let landing = t + h >= target - 0.01 * h;
        if landing {
            h = target - t;
        }
        let method = if after_break {
            Integration::BackwardEuler
        } else {
            opts.integration
        };
        let trap = method == Integration::Trapezoidal;

        let full = step(&sys, &x, &hist, t, h, trap, opts, &mut ws);
        let half = step(&sys, &x, &hist, t, 0.5 * h, trap, opts, &mut ws);
        let two = half
            .as_ref()
            .and_then(|(xm, hm)| step(&sys, xm, hm, t + 0.5 * h, 0.5 * h, trap, opts, &mut ws));

        let (Some((xf, _)), Some((xm, _)), Some((x2, h2))) = (full, half, two) else {
            rejected += 1;
            h *= 0.5;
            if h < opts.min_step {
                return Err(SolverError::StepUnderflow { time: t });
            }
            continue;
        };

        let p = method.order();
        let denom = 2f64.powi(p) - 1.0;
        let err = (0..n)
            .map(|i| (xf[i] - x2[i]).abs() / (opts.reltol * x2[i].abs() + opts.vntol) / denom)
            .fold(0.0, f64::max);

        if err <= opts.lte_tol {
            accepted += 1;
            rec.push(t + 0.5 * h, &xm);
            t = if landing { target } else { t + h };
            rec.push(t, &x2);
            x = x2;
            hist = h2;
            after_break = landing;
            let growth = if err > 0.0 {
                (SAFETY * (1.0 / err).powf(1.0 / (p as f64 + 1.0))).min(MAX_GROWTH)
            } else {
                MAX_GROWTH
            };
            h *= growth.max(1.0);
        } else {
            rejected += 1;
            h *= 0.5;
            if h < opts.min_step {
                return Err(SolverError::StepUnderflow { time: t });
            }
        }
    }

    let mut labels: Vec<String> = sys.node_names().iter().map(|s| format!("v({s})")).collect();
    labels.extend(sys.source_names().iter().map(|s| format!("i({s})")));
    let signals = (0..dim)
        .map(|k| rec.rows.iter().map(|r| r[k]).collect())
        .collect();
    Ok(TransientResult {
        times: rec.times,
        labels,
        signals,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_gate, parse_netlist, BodyStyle, GateKind, GateSpec};

    const RC: f64 = 1e3 * 1e-9;

    fn rc_step() -> Circuit {
        parse_netlist("rc\nV1 in 0 pulse(0 1 0 1n 1n 1 2)\nR1 in out 1k\nC1 out 0 1n\n").unwrap()
    }

    fn rc_opts() -> SolverOptions {
        SolverOptions {
            max_step: Some(RC / 20.0),
            ..SolverOptions::default()
        }
    }

    #[test]
    fn rc_charging_matches_exponential() {
        let r = transient(&rc_step(), 5.0 * RC, &rc_opts()).unwrap();
        let w = r.waveform("out").unwrap();
        // the input ramps over 1 ns, which delays the response by 0.5 ns
        for k in [1.0, 3.0] {
            let t = k * RC;
            let exact = 1.0 - (-(t - 0.5e-9) / RC).exp();
            let got = w.value_at(t);
            assert!(
                (got - exact).abs() <= 1e-3 * exact,
                "t={t:e}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn charge_is_conserved() {
        let r = transient(&rc_step(), 5.0 * RC, &rc_opts()).unwrap();
        let i = r.waveform("i(v1)").unwrap();
        let v = r.waveform("out").unwrap();
        // charge delivered by the source equals the charge on the capacitor
        let q = -i.integral();
        let stored = 1e-9 * v.values[v.len() - 1];
        assert!((q - stored).abs() <= 2e-3 * stored, "{q:e} vs {stored:e}");
    }

    #[test]
    fn times_strictly_increase_and_hit_breakpoints() {
        let c =
            parse_netlist("t\nV1 in 0 pulse(0 1 10n 2n 2n 30n 80n)\nR1 in out 1k\nC1 out 0 10p\n")
                .unwrap();
        let r = transient(&c, 200e-9, &SolverOptions::default()).unwrap();
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));
        for bp in [10e-9, 12e-9, 42e-9, 44e-9, 90e-9, 200e-9] {
            assert!(r.times.iter().any(|&t| (t - bp).abs() < 1e-18), "{bp:e}");
        }
    }

    #[test]
    fn deterministic() {
        let c = build_gate(&GateSpec::vtmos(GateKind::Nand2, 0.1)).unwrap();
        let a = transient(&c, 5e-6, &SolverOptions::default()).unwrap();
        let b = transient(&c, 5e-6, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn euler_and_trapezoid_agree() {
        let mut be = rc_opts();
        be.integration = Integration::BackwardEuler;
        let a = transient(&rc_step(), 3.0 * RC, &rc_opts()).unwrap();
        let b = transient(&rc_step(), 3.0 * RC, &be).unwrap();
        let (wa, wb) = (a.waveform("out").unwrap(), b.waveform("out").unwrap());
        for k in 1..30 {
            let t = 0.1 * k as f64 * RC;
            assert!((wa.value_at(t) - wb.value_at(t)).abs() < 2e-3);
        }
    }

    #[test]
    fn inverter_switches() {
        let c = build_gate(&GateSpec::new(GateKind::Inverter, BodyStyle::Cmos)).unwrap();
        let r = transient(&c, 20e-6, &SolverOptions::default()).unwrap();
        let out = r.waveform("out").unwrap();
        // input high for the first half period, low for the second
        assert!(out.value_at(4.5e-6) < 0.02);
        assert!(out.value_at(9.5e-6) > 0.18);
    }

    #[test]
    fn tiny_min_step_budget_underflows() {
        let mut o = rc_opts();
        o.min_step = 1e-9;
        o.lte_tol = 1e-9;
        let e = transient(&rc_step(), 5.0 * RC, &o).unwrap_err();
        assert!(matches!(e, SolverError::StepUnderflow { .. }));
        assert!(e.is_convergence());
    }

    #[test]
    fn csv_header() {
        let r = transient(&rc_step(), RC, &rc_opts()).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("time,v(in),v(out),i(v1)\n"));
    }
}
