//! Browser bindings: each export returns a JSON string that `www/index.html`
//! draws on a canvas.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use vtmos::device::{mosfet_ids, MosfetParams, OperatingPoint};
use vtmos::experiments::{measure_run, simulate_gate, RunPlan};
use vtmos::netlist::{build_gate, BodyStyle, GateKind, GateSpec, InputStimulus};
use vtmos::solver::{dc_sweep, SolverOptions};

/// Points per I–V curve.
const IV_POINTS: usize = 41;
const VTC_POINTS: usize = 81;
/// Transient traces are thinned to about this many samples.
const MAX_TRACE_POINTS: usize = 1500;

fn grid(n: usize, vmax: f64) -> Vec<f64> {
    (0..n).map(|k| vmax * k as f64 / (n - 1) as f64).collect()
}

/// NMOS transfer and output curves with the body held `v_an` below the gate.
pub fn iv_curves_value(v_an: f64, vdd: f64) -> Result<Value, String> {
    if !(0.0..=vdd).contains(&v_an) {
        return Err(format!("V_AN must lie in [0, {vdd}] V"));
    }
    let p = MosfetParams::reference_nmos();
    let v = grid(IV_POINTS, vdd);
    let ids = |vgs: f64, vds: f64| mosfet_ids(&p, OperatingPoint::new(vgs, vds, vgs - v_an));
    Ok(json!({
        "v": v,
        "ids_vs_vgs": v.iter().map(|&x| ids(x, vdd)).collect::<Vec<_>>(),
        "ids_vs_vds": v.iter().map(|&x| ids(vdd, x)).collect::<Vec<_>>(),
    }))
}

fn style(name: &str) -> Result<BodyStyle, String> {
    name.parse()
        .map_err(|e: vtmos::netlist::GateError| e.to_string())
}

fn spec(gate: GateKind, style: BodyStyle, v_an: f64, vdd: f64) -> GateSpec {
    let bias = if style == BodyStyle::Vtmos { v_an } else { 0.0 };
    GateSpec {
        v_an: bias,
        v_ap: bias,
        vdd,
        ..GateSpec::new(gate, style)
    }
}

/// Inverter transfer curve for one body style.
pub fn vtc_value(style_name: &str, v_an: f64, vdd: f64) -> Result<Value, String> {
    let mut s = spec(GateKind::Inverter, style(style_name)?, v_an, vdd);
    s.stimulus = InputStimulus::Dc([0.0, 0.0]);
    let c = build_gate(&s).map_err(|e| e.to_string())?;
    let vin = grid(VTC_POINTS, vdd);
    let pts = dc_sweep(&c, "vin", &vin, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let vout: Vec<f64> = pts
        .iter()
        .map(|p| p.solution.voltage("out").unwrap_or(f64::NAN))
        .collect();
    Ok(json!({ "vin": vin, "vout": vout }))
}

/// One steady-state period of a pulse-driven gate with its measurements.
pub fn gate_transient_value(
    gate_name: &str,
    style_name: &str,
    v_an: f64,
    vdd: f64,
    frequency: f64,
) -> Result<Value, String> {
    let gate: GateKind = gate_name
        .parse()
        .map_err(|e: vtmos::netlist::GateError| e.to_string())?;
    let mut s = spec(gate, style(style_name)?, v_an, vdd);
    if !(frequency > 0.0 && frequency <= 1e8) {
        return Err("frequency must lie in (0, 100 MHz]".into());
    }
    s.stimulus = InputStimulus::pulse(frequency);
    s.check().map_err(|e| e.to_string())?;
    let plan = RunPlan::for_spec(&s, 0).map_err(|e| e.to_string())?;
    let run = simulate_gate(&s, &plan, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let report = measure_run(&s, &plan, &run).map_err(|e| e.to_string())?;

    let (t0, _) = plan.window;
    let keep: Vec<usize> = (0..run.times.len())
        .filter(|&j| run.times[j] >= t0)
        .collect();
    let stride = keep.len().div_ceil(MAX_TRACE_POINTS).max(1);
    let picked: Vec<usize> = keep.iter().copied().step_by(stride).collect();
    let trace = |name: &str| -> Result<Vec<f64>, String> {
        let w = run.try_waveform(name).map_err(|e| e.to_string())?;
        Ok(picked.iter().map(|&j| w.values[j]).collect())
    };
    let mut inputs = serde_json::Map::new();
    for name in gate.inputs() {
        inputs.insert((*name).to_string(), json!(trace(name)?));
    }
    Ok(json!({
        "time": picked.iter().map(|&j| run.times[j] - t0).collect::<Vec<_>>(),
        "inputs": inputs,
        "out": trace("out")?,
        "report": {
            "tplh": report.tplh,
            "tphl": report.tphl,
            "tp_avg": report.tp_avg,
            "t_rise": report.t_rise,
            "t_fall": report.t_fall,
            "p_avg": report.p_avg,
            "p_bias": report.p_bias,
            "pdp": report.pdp,
            "voh": report.voh,
            "vol": report.vol,
            "logic_pass": report.logic_pass,
        }
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn iv_curves(v_an: f64, vdd: f64) -> Result<String, JsValue> {
    to_js(iv_curves_value(v_an, vdd))
}

#[wasm_bindgen]
pub fn vtc(style: &str, v_an: f64, vdd: f64) -> Result<String, JsValue> {
    to_js(vtc_value(style, v_an, vdd))
}

#[wasm_bindgen]
pub fn gate_transient(
    gate: &str,
    style: &str,
    v_an: f64,
    vdd: f64,
    frequency: f64,
) -> Result<String, JsValue> {
    to_js(gate_transient_value(gate, style, v_an, vdd, frequency))
}
