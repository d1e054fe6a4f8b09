//! Simulate one generated gate and measure it over the steady-state window.

use super::ExperimentError;
use crate::measure::{
    average_power, logic_levels, propagation_delay_multi, rise_fall_times, MeasurementReport,
    Polarity,
};
use crate::netlist::{build_gate, GateKind, GateSpec, InputStimulus};
use crate::solver::{transient, SolverOptions, TransientResult};

/// PRBS bits simulated before the measurement window opens.
pub const PRBS_SETTLE_BITS: usize = 4;

/// Time span to simulate and the measurement window within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub t_stop: f64,
    pub window: (f64, f64),
}

impl RunPlan {
    /// Two super-periods for pulses (the first is discarded), or settling
    /// bits followed by `bits` measured bits for PRBS.
    pub fn for_spec(spec: &GateSpec, bits: usize) -> Result<Self, ExperimentError> {
        match spec.stimulus {
            InputStimulus::Pulse { .. } => {
                let sp = spec.super_period().expect("pulse stimulus");
                Ok(Self {
                    t_stop: 2.0 * sp,
                    window: (sp, 2.0 * sp),
                })
            }
            InputStimulus::Prbs { bit_period, .. } => {
                let start = PRBS_SETTLE_BITS as f64 * bit_period;
                let t_stop = start + bits as f64 * bit_period;
                Ok(Self {
                    t_stop,
                    window: (start, t_stop),
                })
            }
            InputStimulus::Dc(_) => Err(ExperimentError::Config(
                "a DC stimulus has no transient to measure".into(),
            )),
        }
    }
}

/// Instants inside the window where every input has been stable for a
/// while: the middle of each interval between input events.
pub fn logic_sample_times(spec: &GateSpec, window: (f64, f64)) -> Vec<f64> {
    let (start, end) = window;
    let (step, offset) = match (spec.stimulus, spec.gate) {
        (InputStimulus::Pulse { frequency, .. }, GateKind::Inverter) => {
            (0.5 / frequency, 0.25 / frequency)
        }
        (InputStimulus::Pulse { frequency, .. }, _) => (0.25 / frequency, 0.125 / frequency),
        // B lags A by a quarter bit, so inputs hold still over the rest
        (InputStimulus::Prbs { bit_period, .. }, _) => (bit_period, 0.625 * bit_period),
        (InputStimulus::Dc(_), _) => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut t = start + offset;
    while t < end {
        out.push(t);
        t += step;
    }
    out
}

/// Report label `gate/style/v_an`.
pub fn label(spec: &GateSpec) -> String {
    format!(
        "{}/{}/{}",
        spec.gate.as_str(),
        spec.style.as_str(),
        spec.v_an
    )
}

pub fn simulate_gate(
    spec: &GateSpec,
    plan: &RunPlan,
    opts: &SolverOptions,
) -> Result<TransientResult, ExperimentError> {
    let circuit = build_gate(spec)?;
    Ok(transient(&circuit, plan.t_stop, opts)?)
}

/// Measures delay, rise/fall, power and logic levels from a finished run.
pub fn measure_run(
    spec: &GateSpec,
    plan: &RunPlan,
    run: &TransientResult,
) -> Result<MeasurementReport, ExperimentError> {
    let (t0, t1) = plan.window;
    let vdd = spec.vdd;
    let inputs = spec
        .gate
        .inputs()
        .iter()
        .map(|n| Ok(run.try_waveform(n)?.window(t0, t1)?))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let out = run.try_waveform("out")?;
    let out_w = out.window(t0, t1)?;
    let refs: Vec<_> = inputs.iter().collect();
    let delay = propagation_delay_multi(&refs, &out_w, 0.0, vdd, Polarity::Inverting)?;
    let (t_rise, t_fall) = rise_fall_times(&out_w, 0.0, vdd)?;

    let p_supply = average_power(vdd, &run.try_waveform("i(vdd)")?, t0, t1)?;
    let mut p_bias = 0.0;
    for label in &run.labels {
        let Some(name) = label.strip_prefix("i(").and_then(|s| s.strip_suffix(')')) else {
            continue;
        };
        let volts = if name.starts_with("van") {
            spec.v_an
        } else if name.starts_with("vap") {
            spec.v_ap
        } else {
            continue;
        };
        p_bias += average_power(volts, &run.try_waveform(label)?, t0, t1)?;
    }
    let p_avg = p_supply + p_bias;

    let levels = logic_levels(&out, &logic_sample_times(spec, plan.window), vdd);
    Ok(MeasurementReport {
        label: label(spec),
        tplh: delay.tplh,
        tphl: delay.tphl,
        tp_avg: delay.tp_avg,
        t_rise,
        t_fall,
        p_supply,
        p_bias,
        p_avg,
        pdp: p_avg * delay.tp_avg,
        voh: levels.voh,
        vol: levels.vol,
        logic_pass: levels.pass,
        nmh: None,
        nml: None,
        window: plan.window,
    })
}

/// Simulates and measures one gate.
pub fn measure_gate(
    spec: &GateSpec,
    bits: usize,
    opts: &SolverOptions,
) -> Result<MeasurementReport, ExperimentError> {
    let plan = RunPlan::for_spec(spec, bits)?;
    let run = simulate_gate(spec, &plan, opts)?;
    measure_run(spec, &plan, &run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::BodyStyle;

    #[test]
    fn pulse_plan_discards_first_super_period() {
        let spec = GateSpec::new(GateKind::Nand2, BodyStyle::Cmos);
        let plan = RunPlan::for_spec(&spec, 0).unwrap();
        assert_eq!(plan.window, (20e-6, 40e-6));
        assert_eq!(logic_sample_times(&spec, plan.window).len(), 8);
    }

    #[test]
    fn inverter_report_is_consistent() {
        let spec = GateSpec::new(GateKind::Inverter, BodyStyle::Cmos);
        let r = measure_gate(&spec, 0, &SolverOptions::default()).unwrap();
        assert_eq!(r.tp_avg, 0.5 * (r.tplh + r.tphl));
        assert_eq!(r.pdp, r.p_avg * r.tp_avg);
        assert!(r.tp_avg > 0.0 && r.p_avg > 0.0);
        assert!(r.logic_pass, "{r}");
        assert_eq!(r.p_bias, 0.0);
    }
}
