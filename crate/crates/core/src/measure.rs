//! Metrics extracted from waveforms and transfer curves: propagation delay,
//! rise/fall time, average power, noise margins and logic levels.

use std::fmt;

use crate::solver::{Waveform, WaveformError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("`{0}` has no complete transition in the window")]
    NoTransition(String),
    #[error("window [{start:e}, {end:e}] s is empty or outside the data")]
    WindowTooShort { start: f64, end: f64 },
    #[error("transfer curve never reaches unity gain")]
    NotInverting,
    #[error("transfer curve needs at least {0} points")]
    TooFewPoints(usize),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Rising,
    Falling,
}

impl Edge {
    fn flip(self) -> Self {
        match self {
            Edge::Rising => Edge::Falling,
            Edge::Falling => Edge::Rising,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Inverting,
    NonInverting,
}

/// Times where `w` crosses `level`, linearly interpolated.
pub fn crossings(w: &Waveform, level: f64) -> Vec<(f64, Edge)> {
    let mut out = Vec::new();
    let mut prev_side: Option<bool> = None;
    let mut prev = (w.times[0], w.values[0]);
    for (&t, &v) in w.times.iter().zip(&w.values) {
        if v == level {
            prev = (t, v);
            continue;
        }
        let above = v > level;
        if let Some(side) = prev_side {
            if side != above {
                let (t0, v0) = prev;
                let tc = if v0 == level {
                    t0
                } else {
                    t0 + (level - v0) * (t - t0) / (v - v0)
                };
                out.push((tc, if above { Edge::Rising } else { Edge::Falling }));
            }
        }
        prev_side = Some(above);
        prev = (t, v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delay {
    pub tplh: f64,
    pub tphl: f64,
    pub tp_avg: f64,
}

/// 50% propagation delay of one input to the output.
pub fn propagation_delay(
    input: &Waveform,
    output: &Waveform,
    v_low: f64,
    v_high: f64,
    polarity: Polarity,
) -> Result<Delay, MeasureError> {
    propagation_delay_multi(&[input], output, v_low, v_high, polarity)
}

/// 50% propagation delay with crossings merged from several inputs; each
/// output edge is paired with the latest preceding input edge of the causing
/// direction on any input.
pub fn propagation_delay_multi(
    inputs: &[&Waveform],
    output: &Waveform,
    v_low: f64,
    v_high: f64,
    polarity: Polarity,
) -> Result<Delay, MeasureError> {
    let mid = 0.5 * (v_low + v_high);
    let mut causes: Vec<(f64, Edge)> = inputs.iter().flat_map(|w| crossings(w, mid)).collect();
    causes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut lh, mut hl) = (Vec::new(), Vec::new());
    for (t_out, edge) in crossings(output, mid) {
        let wanted = match polarity {
            Polarity::Inverting => edge.flip(),
            Polarity::NonInverting => edge,
        };
        let cause = causes
            .iter()
            .rev()
            .find(|(t, e)| *t <= t_out && *e == wanted);
        if let Some((t_in, _)) = cause {
            match edge {
                Edge::Rising => lh.push(t_out - t_in),
                Edge::Falling => hl.push(t_out - t_in),
            }
        }
    }
    if lh.is_empty() || hl.is_empty() {
        return Err(MeasureError::NoTransition(output.label.clone()));
    }
    let tplh = mean(&lh);
    let tphl = mean(&hl);
    Ok(Delay {
        tplh,
        tphl,
        tp_avg: 0.5 * (tplh + tphl),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean 10–90% rise and 90–10% fall times over complete transitions.
pub fn rise_fall_times(w: &Waveform, v_low: f64, v_high: f64) -> Result<(f64, f64), MeasureError> {
    let swing = v_high - v_low;
    let lo = crossings(w, v_low + 0.1 * swing);
    let hi = crossings(w, v_low + 0.9 * swing);
    let mut rises = Vec::new();
    let mut falls = Vec::new();
    for &(t10, _) in lo.iter().filter(|c| c.1 == Edge::Rising) {
        // the 90% crossing must come before the signal drops back below 10%
        let next_drop = lo
            .iter()
            .find(|(t, e)| *t > t10 && *e == Edge::Falling)
            .map(|c| c.0);
        if let Some(&(t90, _)) = hi
            .iter()
            .find(|(t, e)| *t >= t10 && *e == Edge::Rising && next_drop.map_or(true, |d| *t <= d))
        {
            rises.push(t90 - t10);
        }
    }
    for &(t90, _) in hi.iter().filter(|c| c.1 == Edge::Falling) {
        let next_rise = hi
            .iter()
            .find(|(t, e)| *t > t90 && *e == Edge::Rising)
            .map(|c| c.0);
        if let Some(&(t10, _)) = lo
            .iter()
            .find(|(t, e)| *t >= t90 && *e == Edge::Falling && next_rise.map_or(true, |r| *t <= r))
        {
            falls.push(t10 - t90);
        }
    }
    if rises.is_empty() || falls.is_empty() {
        return Err(MeasureError::NoTransition(w.label.clone()));
    }
    Ok((mean(&rises), mean(&falls)))
}

/// Mean of `w` over `[start, end]` by trapezoidal quadrature.
pub fn window_mean(w: &Waveform, start: f64, end: f64) -> Result<f64, MeasureError> {
    let span = end - start;
    let eps = 1e-9 * span.abs().max(f64::MIN_POSITIVE);
    if !(span > 0.0) || start < w.start() - eps || end > w.end() + eps {
        return Err(MeasureError::WindowTooShort { start, end });
    }
    Ok(w.window(start, end)?.integral() / span)
}

/// Average power delivered by a source of value `volts` whose branch
/// current is `current`.
///
/// Branch current flows into `+` through the source, so a supply reads
/// negative; drawn current counts as positive power.
pub fn average_power(
    volts: f64,
    current: &Waveform,
    start: f64,
    end: f64,
) -> Result<f64, MeasureError> {
    Ok(-volts * window_mean(current, start, end)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMargins {
    pub voh: f64,
    pub vol: f64,
    pub vih: f64,
    pub vil: f64,
    pub nmh: f64,
    pub nml: f64,
}

/// Minimum transfer-curve length accepted by [`noise_margins`].
pub const MIN_VTC_POINTS: usize = 20;

/// Unity-gain noise margins of an inverting transfer curve sampled at
/// increasing input voltages.
pub fn noise_margins(vtc: &[(f64, f64)]) -> Result<NoiseMargins, MeasureError> {
    if vtc.len() < MIN_VTC_POINTS {
        return Err(MeasureError::TooFewPoints(MIN_VTC_POINTS));
    }
    // slope of each segment, placed at its midpoint
    let slopes: Vec<(f64, f64)> = vtc
        .windows(2)
        .map(|p| {
            (
                0.5 * (p[0].0 + p[1].0),
                (p[1].1 - p[0].1) / (p[1].0 - p[0].0),
            )
        })
        .collect();
    let at_unity = |a: (f64, f64), b: (f64, f64)| a.0 + (-1.0 - a.1) * (b.0 - a.0) / (b.1 - a.1);

    let vil = if slopes[0].1 <= -1.0 {
        slopes[0].0
    } else {
        let k = slopes
            .windows(2)
            .position(|w| w[0].1 > -1.0 && w[1].1 <= -1.0)
            .ok_or(MeasureError::NotInverting)?;
        at_unity(slopes[k], slopes[k + 1])
    };
    let last = slopes.len() - 1;
    let vih = if slopes[last].1 <= -1.0 {
        slopes[last].0
    } else {
        let k = slopes
            .windows(2)
            .rposition(|w| w[0].1 <= -1.0 && w[1].1 > -1.0)
            .ok_or(MeasureError::NotInverting)?;
        at_unity(slopes[k], slopes[k + 1])
    };
    let voh = vtc[0].1;
    let vol = vtc[vtc.len() - 1].1;
    Ok(NoiseMargins {
        voh,
        vol,
        vih,
        vil,
        nmh: voh - vih,
        nml: vil - vol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogicLevels {
    pub voh: f64,
    pub vol: f64,
    pub pass: bool,
}

/// Classifies samples by `vdd/2`; passes when the worst high sample exceeds
/// 90% of `vdd` and the worst low sample is under 10%.
pub fn logic_levels(w: &Waveform, sample_times: &[f64], vdd: f64) -> LogicLevels {
    let samples: Vec<f64> = sample_times.iter().map(|&t| w.value_at(t)).collect();
    let high = samples.iter().copied().filter(|v| *v > 0.5 * vdd);
    let low = samples.iter().copied().filter(|v| *v <= 0.5 * vdd);
    let voh = high.fold(f64::NAN, f64::min);
    let vol = low.fold(f64::NAN, f64::max);
    LogicLevels {
        voh,
        vol,
        pass: voh > 0.9 * vdd && vol < 0.1 * vdd,
    }
}

/// Metrics for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    pub label: String,
    pub tplh: f64,
    pub tphl: f64,
    pub tp_avg: f64,
    pub t_rise: f64,
    pub t_fall: f64,
    pub p_supply: f64,
    pub p_bias: f64,
    /// Supply plus bias-source power.
    pub p_avg: f64,
    pub pdp: f64,
    pub voh: f64,
    pub vol: f64,
    pub logic_pass: bool,
    pub nmh: Option<f64>,
    pub nml: Option<f64>,
    pub window: (f64, f64),
}

impl MeasurementReport {
    pub const CSV_HEADER: &'static str =
        "label,tplh,tphl,tp_avg,t_rise,t_fall,p_supply,p_bias,p_avg,pdp,voh,vol,logic_pass,nmh,nml,t_start,t_end";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{:e},{:e}",
            self.label,
            self.tplh,
            self.tphl,
            self.tp_avg,
            self.t_rise,
            self.t_fall,
            self.p_supply,
            self.p_bias,
            self.p_avg,
            self.pdp,
            self.voh,
            self.vol,
            self.logic_pass,
            opt(self.nmh),
            opt(self.nml),
            self.window.0,
            self.window.1
        )
    }
}

impl fmt::Display for MeasurementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.label)?;
        writeln!(
            f,
            "  window      {:.4e} .. {:.4e} s",
            self.window.0, self.window.1
        )?;
        writeln!(f, "  tplh        {:.4e} s", self.tplh)?;
        writeln!(f, "  tphl        {:.4e} s", self.tphl)?;
        writeln!(f, "  tp          {:.4e} s", self.tp_avg)?;
        writeln!(
            f,
            "  rise/fall   {:.4e} / {:.4e} s",
            self.t_rise, self.t_fall
        )?;
        writeln!(
            f,
            "  power       {:.4e} W (supply {:.4e}, bias {:.4e})",
            self.p_avg, self.p_supply, self.p_bias
        )?;
        writeln!(f, "  pdp         {:.4e} J", self.pdp)?;
        write!(
            f,
            "  levels      voh {:.4} V, vol {:.4} V, {}",
            self.voh,
            self.vol,
            if self.logic_pass { "pass" } else { "fail" }
        )?;
        if let (Some(h), Some(l)) = (self.nmh, self.nml) {
            write!(f, "\n  margins     nmh {h:.4} V, nml {l:.4} V")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wave(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> Waveform {
        let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Waveform::new("w", times, values).unwrap()
    }

    fn square(t: f64) -> f64 {
        // period 1, rising edges of 0.01 at 0.1, falling at 0.6
        let p = t.rem_euclid(1.0);
        if p < 0.1 {
            0.0
        } else if p < 0.11 {
            (p - 0.1) / 0.01
        } else if p < 0.6 {
            1.0
        } else if p < 0.61 {
            1.0 - (p - 0.6) / 0.01
        } else {
            0.0
        }
    }

    #[test]
    fn shifted_copy_delay() {
        let a = wave(square, 3.0, 30_000);
        let b = wave(|t| square(t - 0.05), 3.0, 30_000);
        let d = propagation_delay(&a, &b, 0.0, 1.0, Polarity::NonInverting).unwrap();
        for v in [d.tplh, d.tphl, d.tp_avg] {
            assert!((v - 0.05).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn inverted_copy_delay() {
        let a = wave(square, 3.0, 30_000);
        let b = wave(|t| 1.0 - square(t - 0.02), 3.0, 30_000);
        let d = propagation_delay(&a, &b, 0.0, 1.0, Polarity::Inverting).unwrap();
        assert!((d.tp_avg - 0.02).abs() < 1e-9);
    }

    fn rc_discharge() -> (Waveform, Waveform, f64) {
        let rc = 1e-6;
        // ideal step from 1 to 0 at t = 1 us and back up at 11 us
        let step = |t: f64| if (1e-6..11e-6).contains(&t) { 0.0 } else { 1.0 };
        let out = |t: f64| {
            if t < 1e-6 {
                1.0
            } else if t < 11e-6 {
                (-(t - 1e-6) / rc).exp()
            } else {
                let v0 = (-10.0f64).exp();
                1.0 - (1.0 - v0) * (-(t - 11e-6) / rc).exp()
            }
        };
        (wave(step, 21e-6, 210_000), wave(out, 21e-6, 210_000), rc)
    }

    #[test]
    fn rc_delay_is_rc_ln2() {
        let (input, output, rc) = rc_discharge();
        let d = propagation_delay(&input, &output, 0.0, 1.0, Polarity::NonInverting).unwrap();
        let expect = rc * 2f64.ln();
        assert!((d.tphl - expect).abs() < 1e-3 * expect, "{}", d.tphl);
    }

    #[test]
    fn rc_rise_fall_is_rc_ln9() {
        let (_, output, rc) = rc_discharge();
        let (r, f) = rise_fall_times(&output, 0.0, 1.0).unwrap();
        let expect = rc * 9f64.ln();
        assert!((f - expect).abs() < 1e-3 * expect, "{f}");
        assert!((r - expect).abs() < 1e-3 * expect, "{r}");
    }

    #[test]
    fn linear_ramp_rise() {
        let w = wave(|t| if t < 1.0 { t } else { (2.0 - t).max(0.0) }, 2.5, 2500);
        let (r, f) = rise_fall_times(&w, 0.0, 1.0).unwrap();
        assert!((r - 0.8).abs() < 1e-9 && (f - 0.8).abs() < 1e-9);
    }

    #[test]
    fn zero_edge_square_wave() {
        let times = vec![0.0, 1.0, 1.0 + 1e-12, 2.0, 2.0 + 1e-12, 3.0];
        let w = Waveform::new("sq", times, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let (r, f) = rise_fall_times(&w, 0.0, 1.0).unwrap();
        assert!(r <= 1e-12 && f <= 1e-12);
    }

    #[test]
    fn flat_output_has_no_transition() {
        let a = wave(square, 3.0, 3000);
        let b = wave(|_| 0.5, 3.0, 3000);
        assert!(matches!(
            propagation_delay(&a, &b, 0.0, 1.0, Polarity::Inverting),
            Err(MeasureError::NoTransition(_))
        ));
        assert!(rise_fall_times(&b, 0.0, 1.0).is_err());
    }

    #[test]
    fn multi_input_pairs_latest_cause() {
        // output falls after b rises (a already high)
        let a = wave(
            |t| if (1.0..5.0).contains(&t) { 1.0 } else { 0.0 },
            8.0,
            8000,
        );
        let b = wave(
            |t| if (2.0..4.0).contains(&t) { 1.0 } else { 0.0 },
            8.0,
            8000,
        );
        let out = wave(
            |t| if (2.3..4.3).contains(&t) { 0.0 } else { 1.0 },
            8.0,
            8000,
        );
        let d = propagation_delay_multi(&[&a, &b], &out, 0.0, 1.0, Polarity::Inverting).unwrap();
        assert!((d.tphl - 0.3).abs() < 2e-3, "{}", d.tphl);
        assert!((d.tplh - 0.3).abs() < 2e-3, "{}", d.tplh);
    }

    #[test]
    fn constant_current_power() {
        let i = wave(|_| -2e-9, 1.0, 10);
        assert_eq!(average_power(0.2, &i, 0.0, 1.0).unwrap(), 0.2 * 2e-9);
    }

    #[test]
    fn resistor_power_on_uneven_grid() {
        let times: Vec<f64> = (0..=500).map(|k| (k as f64 / 500.0).powi(2)).collect();
        let r = 1e6;
        let values = vec![-0.2 / r; times.len()];
        let i = Waveform::new("i", times, values).unwrap();
        let p = average_power(0.2, &i, 0.0, 1.0).unwrap();
        assert!((p - 0.04 / r).abs() < 1e-4 * 0.04 / r);
    }

    #[test]
    fn window_outside_data() {
        let i = wave(|_| 1.0, 1.0, 10);
        assert!(matches!(
            average_power(1.0, &i, 0.5, 2.0),
            Err(MeasureError::WindowTooShort { .. })
        ));
        assert!(matches!(
            average_power(1.0, &i, 0.5, 0.5),
            Err(MeasureError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn power_over_repeated_periods() {
        let f = |t: f64| -(1.0 + (2.0 * std::f64::consts::PI * t).sin().powi(2));
        let i = wave(f, 4.0, 40_000);
        let one = average_power(0.2, &i, 1.0, 2.0).unwrap();
        let three = average_power(0.2, &i, 1.0, 4.0).unwrap();
        assert!((one - three).abs() < 1e-3 * one);
    }

    fn vtc(f: impl Fn(f64) -> f64, vdd: f64, n: usize) -> Vec<(f64, f64)> {
        (0..=n)
            .map(|k| vdd * k as f64 / n as f64)
            .map(|x| (x, f(x)))
            .collect()
    }

    #[test]
    fn step_vtc_limit() {
        let c = vtc(|x| if x < 0.1 { 0.2 } else { 0.0 }, 0.2, 2000);
        let m = noise_margins(&c).unwrap();
        assert!(
            (m.nmh - 0.1).abs() < 2e-4 && (m.nml - 0.1).abs() < 2e-4,
            "{m:?}"
        );
    }

    #[test]
    fn logistic_vtc_matches_root_finding() {
        let (vdd, k) = (0.2, 100.0);
        let f = |x: f64| vdd / (1.0 + (k * (x - vdd / 2.0)).exp());
        // analytic slope: -vdd k e / (1+e)^2; solve slope = -1 by bisection
        let slope = |x: f64| {
            let e = (k * (x - vdd / 2.0)).exp();
            -vdd * k * e / (1.0 + e).powi(2)
        };
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if (slope(lo) + 1.0) * (slope(m) + 1.0) <= 0.0 {
                    hi = m
                } else {
                    lo = m
                }
            }
            0.5 * (lo + hi)
        };
        let vil = bisect(0.0, vdd / 2.0);
        let vih = bisect(vdd / 2.0, vdd);
        let m = noise_margins(&vtc(f, vdd, 4000)).unwrap();
        assert!((m.vil - vil).abs() < 1e-5, "{} vs {vil}", m.vil);
        assert!((m.vih - vih).abs() < 1e-5, "{} vs {vih}", m.vih);
        assert!((m.nmh - (f(0.0) - vih)).abs() < 1e-5);
    }

    #[test]
    fn symmetric_vtc_has_equal_margins() {
        let f = |x: f64| 0.1 - 0.1 * ((x - 0.1) * 40.0).tanh();
        let m = noise_margins(&vtc(f, 0.2, 400)).unwrap();
        assert!((m.nmh - m.nml).abs() < 1e-3);
    }

    #[test]
    fn shallow_vtc_is_not_inverting() {
        let c = vtc(|x| 0.2 - 0.5 * x, 0.2, 100);
        assert_eq!(noise_margins(&c), Err(MeasureError::NotInverting));
        assert_eq!(
            noise_margins(&c[..5]),
            Err(MeasureError::TooFewPoints(MIN_VTC_POINTS))
        );
    }

    #[test]
    fn logic_level_classification() {
        let sq = wave(|t| 0.2 * square(t), 2.0, 2000);
        let l = logic_levels(&sq, &[0.3, 0.8, 1.3, 1.8], 0.2);
        assert!(l.pass);
        assert_eq!((l.voh, l.vol), (0.2, 0.0));
        let stuck = wave(|_| 0.1, 2.0, 10);
        assert!(!logic_levels(&stuck, &[0.3, 0.8], 0.2).pass);
    }

    #[test]
    fn report_csv_matches_header() {
        let r = MeasurementReport {
            label: "x".into(),
            tplh: 1e-9,
            tphl: 2e-9,
            tp_avg: 1.5e-9,
            t_rise: 1e-9,
            t_fall: 1e-9,
            p_supply: 1e-9,
            p_bias: 0.0,
            p_avg: 1e-9,
            pdp: 1.5e-18,
            voh: 0.2,
            vol: 0.0,
            logic_pass: true,
            nmh: None,
            nml: None,
            window: (0.0, 1e-5),
        };
        let cols = MeasurementReport::CSV_HEADER.split(',').count();
        assert_eq!(r.csv_row().split(',').count(), cols);
        assert!(r.to_string().contains("pass"));
    }

    proptest! {
        #[test]
        fn metrics_survive_resampling(delay in 0.01f64..0.2, n in 2000usize..4000) {
            let a = wave(square, 3.0, n);
            let b = wave(|t| 1.0 - square(t - delay), 3.0, n);
            let d1 = propagation_delay(&a, &b, 0.0, 1.0, Polarity::Inverting).unwrap();
            let dense: Vec<f64> = (0..=2 * n).map(|k| 3.0 * k as f64 / (2 * n) as f64).collect();
            let (a2, b2) = (a.resample(&dense).unwrap(), b.resample(&dense).unwrap());
            let d2 = propagation_delay(&a2, &b2, 0.0, 1.0, Polarity::Inverting).unwrap();
            prop_assert!((d1.tp_avg - d2.tp_avg).abs() < 5e-3 * d1.tp_avg);
            let p1 = average_power(0.2, &b, 1.0, 3.0).unwrap();
            let p2 = average_power(0.2, &b2, 1.0, 3.0).unwrap();
            prop_assert!((p1 - p2).abs() < 5e-3 * p1.abs());
        }

        #[test]
        fn monotone_vtc_margins_nonnegative(k in 30f64..400.0, shift in 0.06f64..0.14) {
            let c = vtc(|x| 0.2 / (1.0 + (k * (x - shift)).exp()), 0.2, 400);
            let m = noise_margins(&c).unwrap();
            if m.voh > m.vih && m.vil > m.vol {
                prop_assert!(m.nmh >= 0.0 && m.nml >= 0.0);
            }
        }
    }
}
