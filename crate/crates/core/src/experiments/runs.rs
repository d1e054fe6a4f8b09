//! The five experiment drivers. Each returns its tables; verdicts are
//! computed separately from the CSV text.

use super::config::{SweepSpec, SweepStimulus, BASE_FREQUENCY};
use super::gate_run::measure_gate;
use super::parallel::par_map;
use super::table::{fmt_num, Table};
use super::ExperimentError;
use crate::device::{mosfet_ids, MosfetParams, OperatingPoint};
use crate::measure::{noise_margins, MeasureError, MeasurementReport};
use crate::netlist::{
    build_gate, BodyStyle, Circuit, Element, GateKind, InputStimulus, Model, SourceSpec,
};
use crate::solver::{dc_sweep, SweepPoint};

/// Input and drain grids for the I–V curves (V).
const IV_STEPS: usize = 20;
const IV_VMAX: f64 = 0.2;
/// VTC input step (V).
const VTC_POINTS: usize = 101;

pub const REPORT_COLUMNS: [&str; 12] = [
    "tplh",
    "tphl",
    "tp_avg",
    "t_rise",
    "t_fall",
    "p_supply",
    "p_bias",
    "p_avg",
    "pdp",
    "voh",
    "vol",
    "logic_pass",
];

fn report_cells(r: Option<&MeasurementReport>) -> Vec<String> {
    match r {
        Some(r) => {
            let mut v: Vec<String> = [
                r.tplh, r.tphl, r.tp_avg, r.t_rise, r.t_fall, r.p_supply, r.p_bias, r.p_avg, r.pdp,
                r.voh, r.vol,
            ]
            .iter()
            .map(|x| fmt_num(*x))
            .collect();
            v.push(r.logic_pass.to_string());
            v
        }
        None => {
            let mut v = vec![String::new(); REPORT_COLUMNS.len() - 1];
            v.push("false".into());
            v
        }
    }
}

fn header_with_report(keys: &[&'static str]) -> Vec<&'static str> {
    let mut h = keys.to_vec();
    h.push("status");
    h.extend(REPORT_COLUMNS);
    h
}

/// A measurement, or `None` when the output never switches (a gate that
/// does not work at this bias).
fn measure_or_dead(
    spec: &crate::netlist::GateSpec,
    bits: usize,
    sweep: &SweepSpec,
) -> Result<Option<MeasurementReport>, ExperimentError> {
    match measure_gate(spec, bits, &sweep.solver) {
        Ok(r) => Ok(Some(r)),
        Err(ExperimentError::Measure(MeasureError::NoTransition(_))) => Ok(None),
        Err(e) => Err(e),
    }
}

fn status(r: &Option<MeasurementReport>) -> String {
    if r.is_some() { "ok" } else { "no-transition" }.to_string()
}

/// CMOS once, then VTMOS at every bias.
fn style_grid(sweep: &SweepSpec) -> Vec<(BodyStyle, f64)> {
    let mut out = Vec::new();
    for &style in &sweep.styles {
        match style {
            BodyStyle::Vtmos => out.extend(sweep.v_an.iter().map(|&v| (style, v))),
            _ => out.push((style, 0.0)),
        }
    }
    out
}

fn single_device(params: &MosfetParams, v_an: f64, vgs: f64, vds: f64) -> Circuit {
    let mut c = Circuit::new("vtmos nmos i-v");
    c.models.insert("nch".into(), Model::Mosfet(*params));
    let src = |name: &str, plus: &str, minus: &str, v: f64| Element::VSource {
        name: name.into(),
        plus: plus.into(),
        minus: minus.into(),
        spec: SourceSpec::Dc(v),
    };
    c.elements.push(src("vd", "d", "0", vds));
    c.elements.push(src("vg", "g", "0", vgs));
    c.elements.push(Element::Mosfet {
        name: "m1".into(),
        drain: "d".into(),
        gate: "g".into(),
        source: "0".into(),
        body: "b".into(),
        model: "nch".into(),
    });
    c.elements.push(src("van", "g", "b", v_an));
    c
}

/// Channel current at a solved point of the single-device circuit.
fn channel_current(params: &MosfetParams, p: &SweepPoint) -> f64 {
    let s = &p.solution;
    let v = |n: &str| s.voltage(n).expect("node exists");
    mosfet_ids(params, OperatingPoint::new(v("g"), v("d"), v("b")))
}

fn grid(n: usize, vmax: f64) -> Vec<f64> {
    (0..=n).map(|k| vmax * k as f64 / n as f64).collect()
}

/// NMOS I–V families: I_ds(V_gs) at V_ds = 0.2 V and I_ds(V_ds) at
/// V_gs = 0.2 V, body held at V_gs − V_AN.
pub fn iv_curves(sweep: &SweepSpec) -> Result<Vec<Table>, ExperimentError> {
    let nmos = sweep.card.nmos;
    let steps = grid(IV_STEPS, IV_VMAX);
    let curves = par_map(
        &sweep.v_an,
        sweep.jobs,
        |&v_an| -> Result<_, ExperimentError> {
            let c = single_device(&nmos, v_an, 0.0, IV_VMAX);
            let by_vgs = dc_sweep(&c, "vg", &steps, &sweep.solver)?;
            let c = single_device(&nmos, v_an, IV_VMAX, 0.0);
            let by_vds = dc_sweep(&c, "vd", &steps, &sweep.solver)?;
            let ids = |pts: &[SweepPoint]| {
                pts.iter()
                    .map(|p| channel_current(&nmos, p))
                    .collect::<Vec<_>>()
            };
            Ok((ids(&by_vgs), ids(&by_vds)))
        },
    );
    let mut vgs_t = Table::new("iv_vgs.csv", &["v_an", "v_gs", "i_ds"]);
    let mut vds_t = Table::new("iv_vds.csv", &["v_an", "v_ds", "i_ds"]);
    for (&v_an, curve) in sweep.v_an.iter().zip(curves) {
        let (a, b) = curve?;
        for (&v, i) in steps.iter().zip(a) {
            vgs_t.push(vec![fmt_num(v_an), fmt_num(v), fmt_num(i)]);
        }
        for (&v, i) in steps.iter().zip(b) {
            vds_t.push(vec![fmt_num(v_an), fmt_num(v), fmt_num(i)]);
        }
    }
    Ok(vec![vgs_t, vds_t])
}

/// Inverter transfer curves for CMOS and each VTMOS bias, with noise
/// margins.
pub fn vtc(sweep: &SweepSpec) -> Result<Vec<Table>, ExperimentError> {
    let inputs = grid(VTC_POINTS - 1, sweep.vdd);
    let points = style_grid(sweep);
    let curves = par_map(
        &points,
        sweep.jobs,
        |&(style, v_an)| -> Result<_, ExperimentError> {
            let spec = sweep.gate(
                GateKind::Inverter,
                style,
                v_an,
                InputStimulus::Dc([0.0, 0.0]),
            );
            let c = build_gate(&spec)?;
            let pts = dc_sweep(&c, "vin", &inputs, &sweep.solver)?;
            Ok(pts
                .iter()
                .map(|p| (p.value, p.solution.voltage("out").expect("gate output")))
                .collect::<Vec<_>>())
        },
    );
    let mut curve_t = Table::new("vtc.csv", &["style", "v_an", "v_in", "v_out"]);
    let mut nm_t = Table::new(
        "noise_margins.csv",
        &["style", "v_an", "voh", "vol", "vih", "vil", "nmh", "nml"],
    );
    for (&(style, v_an), curve) in points.iter().zip(curves) {
        let curve = curve?;
        for &(x, y) in &curve {
            curve_t.push(vec![
                style.as_str().into(),
                fmt_num(v_an),
                fmt_num(x),
                fmt_num(y),
            ]);
        }
        let mut row = vec![style.as_str().to_string(), fmt_num(v_an)];
        match noise_margins(&curve) {
            Ok(m) => row.extend([m.voh, m.vol, m.vih, m.vil, m.nmh, m.nml].map(fmt_num)),
            Err(_) => row.extend(std::iter::repeat(String::new()).take(6)),
        }
        nm_t.push(row);
    }
    Ok(vec![curve_t, nm_t])
}

/// Delay, power and PDP of every gate at 100 kHz against bias.
pub fn bias_sweep(sweep: &SweepSpec) -> Result<Vec<Table>, ExperimentError> {
    let mut points = Vec::new();
    for &gate in &sweep.gates {
        for (style, v_an) in style_grid(sweep) {
            points.push((gate, style, v_an));
        }
    }
    let f = sweep.frequencies[0];
    let results = par_map(&points, sweep.jobs, |&(gate, style, v_an)| {
        measure_or_dead(
            &sweep.gate(gate, style, v_an, InputStimulus::pulse(f)),
            0,
            sweep,
        )
    });
    let mut t = Table::new(
        "bias_sweep.csv",
        &header_with_report(&["gate", "style", "v_an", "frequency"]),
    );
    for (&(gate, style, v_an), r) in points.iter().zip(results) {
        let r = r?;
        let mut row = vec![
            gate.as_str().into(),
            style.as_str().into(),
            fmt_num(v_an),
            fmt_num(f),
            status(&r),
        ];
        row.extend(report_cells(r.as_ref()));
        t.push(row);
    }
    Ok(vec![t])
}

/// NAND2 power against frequency for CMOS and the strongest VTMOS bias.
pub fn frequency_sweep(sweep: &SweepSpec) -> Result<Vec<Table>, ExperimentError> {
    let mut points = Vec::new();
    for &gate in &sweep.gates {
        for &f in &sweep.frequencies {
            for (style, v_an) in style_grid(sweep) {
                points.push((gate, f, style, v_an));
            }
        }
    }
    let results = par_map(&points, sweep.jobs, |&(gate, f, style, v_an)| {
        measure_or_dead(
            &sweep.gate(gate, style, v_an, InputStimulus::pulse(f)),
            0,
            sweep,
        )
    });
    let mut t = Table::new(
        "frequency_sweep.csv",
        &header_with_report(&["gate", "frequency", "style", "v_an"]),
    );
    for (&(gate, f, style, v_an), r) in points.iter().zip(results) {
        let r = r?;
        let mut row = vec![
            gate.as_str().into(),
            fmt_num(f),
            style.as_str().into(),
            fmt_num(v_an),
            status(&r),
        ];
        row.extend(report_cells(r.as_ref()));
        t.push(row);
    }
    Ok(vec![t])
}

/// PRBS-driven NAND2/NOR2 for three seed pairs, next to the pulse-driven
/// reference run.
pub fn random_vectors(sweep: &SweepSpec) -> Result<Vec<Table>, ExperimentError> {
    let SweepStimulus::Prbs { seeds, bits } = &sweep.stimulus else {
        return Err(ExperimentError::Config(
            "random-vectors needs a PRBS stimulus".into(),
        ));
    };
    let bit_period = 1.0 / BASE_FREQUENCY;
    let edge = bit_period / 400.0;
    let mut points = Vec::new();
    for &gate in &sweep.gates {
        for (style, v_an) in style_grid(sweep) {
            points.push((gate, style, v_an, None));
            for &s in seeds {
                points.push((gate, style, v_an, Some(s)));
            }
        }
    }
    let results = par_map(&points, sweep.jobs, |&(gate, style, v_an, seeds)| {
        let stimulus = match seeds {
            None => InputStimulus::pulse(BASE_FREQUENCY),
            Some(seeds) => InputStimulus::Prbs {
                bit_period,
                seeds,
                edge,
            },
        };
        measure_or_dead(&sweep.gate(gate, style, v_an, stimulus), *bits, sweep)
    });
    let mut t = Table::new(
        "random_vectors.csv",
        &header_with_report(&["gate", "style", "v_an", "stimulus", "seed_a", "seed_b"]),
    );
    for (&(gate, style, v_an, seeds), r) in points.iter().zip(results) {
        let r = r?;
        let (kind, a, b) = match seeds {
            None => ("pulse", String::new(), String::new()),
            Some([a, b]) => ("prbs", format!("0x{a:04x}"), format!("0x{b:04x}")),
        };
        let mut row = vec![
            gate.as_str().into(),
            style.as_str().into(),
            fmt_num(v_an),
            kind.into(),
            a,
            b,
            status(&r),
        ];
        row.extend(report_cells(r.as_ref()));
        t.push(row);
    }
    Ok(vec![t])
}
