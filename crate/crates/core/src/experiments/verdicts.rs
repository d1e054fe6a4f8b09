//! Pass/fail checks computed from emitted tables alone.
//!
//! Each check reports a margin: positive slack when it passes, negative
//! when it fails, in the units stated by its detail text.

use std::collections::BTreeMap;
use std::fmt;

use super::config::ExperimentId;
use super::table::Table;
use super::ExperimentError;
use crate::measure::noise_margins;

/// Relative change below which two I–V flatness values count as equal.
pub const FLATNESS_RESOLUTION: f64 = 1e-6;
/// Required mean power reduction at the strongest bias.
pub const MIN_POWER_REDUCTION: f64 = 0.30;
/// Seed-to-seed spread allowed for PRBS metrics.
pub const MAX_SEED_SPREAD: f64 = 0.10;
/// Allowed PRBS deviation from the pulse-driven run.
pub const MAX_PRBS_DEVIATION: f64 = 0.25;
/// Distance of VTC end points from the rails (V).
pub const RAIL_TOLERANCE: f64 = 5e-3;
/// Metrics compared across random-vector runs.
pub const PRBS_METRICS: [&str; 5] = ["tp_avg", "p_avg", "pdp", "t_rise", "t_fall"];

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl Verdict {
    fn new(id: &str, margin: f64, detail: String) -> Self {
        Self {
            id: id.to_string(),
            pass: margin > 0.0,
            margin,
            detail,
        }
    }

    fn with_pass(id: &str, pass: bool, margin: f64, detail: String) -> Self {
        Self {
            id: id.to_string(),
            pass,
            // avoid printing -0
            margin: margin + 0.0,
            detail,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {}  margin {:+.4e}  {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.margin,
            self.detail
        )
    }
}

fn table<'a>(tables: &'a [Table], name: &str) -> Result<&'a Table, ExperimentError> {
    tables
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| ExperimentError::Config(format!("missing table {name}")))
}

/// Verdicts registered for `id`, from that experiment's tables.
pub fn evaluate(id: ExperimentId, tables: &[Table]) -> Result<Vec<Verdict>, ExperimentError> {
    match id {
        ExperimentId::IvCurves => {
            iv_verdicts(table(tables, "iv_vgs.csv")?, table(tables, "iv_vds.csv")?)
        }
        ExperimentId::Vtc => vtc_verdicts(table(tables, "vtc.csv")?),
        ExperimentId::BiasSweep => bias_verdicts(table(tables, "bias_sweep.csv")?),
        ExperimentId::FrequencySweep => frequency_verdicts(table(tables, "frequency_sweep.csv")?),
        ExperimentId::RandomVectors => random_verdicts(table(tables, "random_vectors.csv")?),
    }
}

/// Curves keyed by the first column's value (as text, in table order), each
/// a list of (x, y) pairs.
fn curves(
    t: &Table,
    key: &[&str],
    x: &str,
    y: &str,
) -> Result<Vec<(Vec<String>, Vec<(f64, f64)>)>, ExperimentError> {
    let kc: Vec<usize> = key.iter().map(|k| t.column(k)).collect::<Result<_, _>>()?;
    let (xc, yc) = (t.column(x)?, t.column(y)?);
    let mut out: Vec<(Vec<String>, Vec<(f64, f64)>)> = Vec::new();
    for r in 0..t.rows.len() {
        let k: Vec<String> = kc.iter().map(|&c| t.text(r, c).to_string()).collect();
        let p = (t.num(r, xc), t.num(r, yc));
        match out.iter_mut().find(|(kk, _)| *kk == k) {
            Some((_, pts)) => pts.push(p),
            None => out.push((k, vec![p])),
        }
    }
    Ok(out)
}

fn by_bias(t: &Table, x: &str) -> Result<Vec<(f64, Vec<(f64, f64)>)>, ExperimentError> {
    let mut c: Vec<(f64, Vec<(f64, f64)>)> = curves(t, &["v_an"], x, "i_ds")?
        .into_iter()
        .map(|(k, pts)| (k[0].parse().unwrap_or(f64::NAN), pts))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(c)
}

fn at(pts: &[(f64, f64)], x: f64) -> f64 {
    pts.iter()
        .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
        .map_or(f64::NAN, |p| p.1)
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.4e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Smallest relative drop between consecutive values; negative if any rise.
fn min_relative_drop(values: &[f64]) -> f64 {
    if values.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    values
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs())
        .fold(f64::INFINITY, f64::min)
}

fn iv_verdicts(vgs: &Table, vds: &Table) -> Result<Vec<Verdict>, ExperimentError> {
    let gate_curves = by_bias(vgs, "v_gs")?;
    let drain_curves = by_bias(vds, "v_ds")?;
    let mut out = Vec::new();

    // pointwise ordering in V_AN of the transfer curves
    let n = gate_curves.first().map_or(0, |c| c.1.len());
    let mut worst = f64::INFINITY;
    for i in 0..n {
        let column: Vec<f64> = gate_curves.iter().map(|c| c.1[i].1).collect();
        worst = worst.min(min_relative_drop(&column));
    }
    out.push(Verdict::new(
        "V6a",
        worst,
        format!("I_ds(V_gs) decreasing in V_AN at every V_gs; smallest relative drop {worst:.4e}"),
    ));

    let vmax = drain_curves
        .iter()
        .flat_map(|c| c.1.iter().map(|p| p.0))
        .fold(f64::NAN, f64::max);
    let flat: Vec<f64> = drain_curves
        .iter()
        .map(|(_, pts)| {
            let (hi, mid) = (at(pts, vmax), at(pts, vmax / 2.0));
            (hi - mid) / hi
        })
        .collect();
    let drop = min_relative_drop(&flat) - FLATNESS_RESOLUTION;
    out.push(Verdict::new(
        "V6b",
        drop,
        format!(
            "flatness (I(Vmax)-I(Vmax/2))/I(Vmax) decreasing in V_AN beyond {FLATNESS_RESOLUTION:e} relative: {}",
            list(&flat)
        ),
    ));

    let swing: Vec<f64> = drain_curves
        .iter()
        .map(|(_, pts)| at(pts, vmax) - at(pts, vmax / 2.0))
        .collect();
    let d = min_relative_drop(&swing);
    out.push(Verdict::new(
        "iv.output-swing",
        d,
        format!("I(Vmax)-I(Vmax/2) decreasing in V_AN: {}", list(&swing)),
    ));

    let zero = drain_curves
        .iter()
        .map(|(_, pts)| at(pts, 0.0).abs())
        .fold(0.0, f64::max);
    out.push(Verdict::with_pass(
        "iv.zero-vds",
        zero == 0.0,
        -zero,
        format!("largest |I_ds| at V_ds = 0: {zero:e} A"),
    ));
    Ok(out)
}

fn vtc_verdicts(t: &Table) -> Result<Vec<Verdict>, ExperimentError> {
    let cs = curves(t, &["style", "v_an"], "v_in", "v_out")?;
    let mut worst_nm = f64::INFINITY;
    let mut worst_mono = f64::INFINITY;
    let mut worst_rail = f64::INFINITY;
    let mut details = Vec::new();
    for (key, pts) in &cs {
        let vdd = pts.iter().map(|p| p.0).fold(f64::NAN, f64::max);
        match noise_margins(pts) {
            Ok(m) => {
                worst_nm = worst_nm.min(m.nmh.min(m.nml));
                details.push(format!(
                    "{}/{}: nmh {:.4} nml {:.4}",
                    key[0], key[1], m.nmh, m.nml
                ));
            }
            Err(e) => {
                worst_nm = f64::NEG_INFINITY;
                details.push(format!("{}/{}: {e}", key[0], key[1]));
            }
        }
        let rise = pts
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        worst_mono = worst_mono.min(-rise);
        let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
        worst_rail = worst_rail
            .min(RAIL_TOLERANCE - (vdd - first))
            .min(RAIL_TOLERANCE - last);
    }
    Ok(vec![
        Verdict::new(
            "V7b",
            worst_nm,
            format!("all noise margins positive (V); {}", details.join("; ")),
        ),
        Verdict::with_pass(
            "vtc.monotone",
            worst_mono >= 0.0,
            worst_mono,
            format!("largest rise between samples {:.3e} V", -worst_mono),
        ),
        Verdict::new(
            "vtc.rails",
            worst_rail,
            format!("end points within {RAIL_TOLERANCE} V of the rails"),
        ),
    ])
}

/// One gate's rows of a gate table: (style, v_an) → metric.
struct GateRows {
    cmos: f64,
    /// Sorted by bias.
    vtmos: Vec<(f64, f64)>,
}

fn gate_metric(t: &Table, metric: &str) -> Result<BTreeMap<String, GateRows>, ExperimentError> {
    let (gc, sc, bc, mc) = (
        t.column("gate")?,
        t.column("style")?,
        t.column("v_an")?,
        t.column(metric)?,
    );
    let mut out: BTreeMap<String, GateRows> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let e = out.entry(t.text(r, gc).to_string()).or_insert(GateRows {
            cmos: f64::NAN,
            vtmos: Vec::new(),
        });
        match t.text(r, sc) {
            "cmos" => e.cmos = t.num(r, mc),
            "vtmos" => e.vtmos.push((t.num(r, bc), t.num(r, mc))),
            _ => {}
        }
    }
    for g in out.values_mut() {
        g.vtmos.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

fn nan_to_fail(m: f64) -> f64 {
    if m.is_nan() {
        f64::NEG_INFINITY
    } else {
        m
    }
}

fn bias_verdicts(t: &Table) -> Result<Vec<Verdict>, ExperimentError> {
    let delay = gate_metric(t, "tp_avg")?;
    let power = gate_metric(t, "p_avg")?;
    let pdp = gate_metric(t, "pdp")?;
    let mut out = Vec::new();

    // V1: delay non-decreasing in bias and the unbiased body tie beats CMOS
    let mut m1 = f64::INFINITY;
    let mut d1 = Vec::new();
    for (g, rows) in &delay {
        let v: Vec<f64> = rows.vtmos.iter().map(|p| p.1).collect();
        let steps = if v.iter().any(|x| x.is_nan()) {
            f64::NAN
        } else {
            v.windows(2)
                .map(|w| (w[1] - w[0]) / w[0])
                .fold(f64::INFINITY, f64::min)
        };
        let lead = (rows.cmos - v.first().copied().unwrap_or(f64::NAN)) / rows.cmos;
        m1 = m1.min(nan_to_fail(lead));
        if steps < 0.0 || steps.is_nan() {
            m1 = m1.min(nan_to_fail(steps));
        }
        d1.push(format!("{g}: cmos {:.4e} vtmos {}", rows.cmos, list(&v)));
    }
    out.push(Verdict::new(
        "V1",
        m1,
        format!(
            "delay non-decreasing in V_AN, delay(0) < cmos (relative); {}",
            d1.join("; ")
        ),
    ));

    // V2: power strictly decreasing in bias, unbiased tie above CMOS
    let mut m2 = f64::INFINITY;
    let mut d2 = Vec::new();
    for (g, rows) in &power {
        let v: Vec<f64> = rows.vtmos.iter().map(|p| p.1).collect();
        m2 = m2.min(nan_to_fail(min_relative_drop(&v)));
        m2 = m2.min(nan_to_fail(
            (v.first().copied().unwrap_or(f64::NAN) - rows.cmos) / rows.cmos,
        ));
        d2.push(format!("{g}: cmos {:.4e} vtmos {}", rows.cmos, list(&v)));
    }
    out.push(Verdict::new(
        "V2",
        m2,
        format!(
            "power strictly decreasing in V_AN, power(0) > cmos (relative); {}",
            d2.join("; ")
        ),
    ));

    // V3: mean reduction at the strongest bias
    let reductions: Vec<(String, f64)> = power
        .iter()
        .map(|(g, rows)| {
            (
                g.clone(),
                1.0 - rows.vtmos.last().map_or(f64::NAN, |p| p.1) / rows.cmos,
            )
        })
        .collect();
    let mean = reductions.iter().map(|r| r.1).sum::<f64>() / reductions.len() as f64;
    out.push(Verdict::new(
        "V3",
        nan_to_fail(mean - MIN_POWER_REDUCTION),
        format!(
            "mean power reduction {:.2}% >= {:.0}%; {}",
            100.0 * mean,
            100.0 * MIN_POWER_REDUCTION,
            reductions
                .iter()
                .map(|(g, r)| format!("{g} {:.2}%", 100.0 * r))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));

    // V4: PDP at the strongest bias below CMOS
    let mut m4 = f64::INFINITY;
    let mut d4 = Vec::new();
    for (g, rows) in &pdp {
        let last = rows.vtmos.last().map_or(f64::NAN, |p| p.1);
        m4 = m4.min(nan_to_fail((rows.cmos - last) / rows.cmos));
        d4.push(format!("{g}: cmos {:.4e} vtmos {:.4e}", rows.cmos, last));
    }
    out.push(Verdict::new(
        "V4",
        m4,
        format!("pdp(max V_AN) < cmos (relative); {}", d4.join("; ")),
    ));

    // V7a: logic levels at every grid point
    let (lc, sc) = (t.column("logic_pass")?, t.column("status")?);
    let failing: Vec<String> = (0..t.rows.len())
        .filter(|&r| t.text(r, lc) != "true" || t.text(r, sc) != "ok")
        .map(|r| t.rows[r][..3].join("/"))
        .collect();
    out.push(Verdict::with_pass(
        "V7a",
        failing.is_empty(),
        -(failing.len() as f64),
        if failing.is_empty() {
            format!("all {} outputs reach valid logic levels", t.rows.len())
        } else {
            format!("failing: {}", failing.join(", "))
        },
    ));
    Ok(out)
}

/// Relative advantage (P_cmos - P_vtmos)/P_cmos per frequency, ascending.
pub fn advantage_curve(t: &Table) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let (fc, sc, pc) = (
        t.column("frequency")?,
        t.column("style")?,
        t.column("p_avg")?,
    );
    let mut by_f: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let f = t.num(r, fc);
        let e = by_f.entry(f.to_bits()).or_insert((f, f64::NAN, f64::NAN));
        match t.text(r, sc) {
            "cmos" => e.1 = t.num(r, pc),
            "vtmos" => e.2 = t.num(r, pc),
            _ => {}
        }
    }
    let mut v: Vec<(f64, f64)> = by_f.values().map(|(f, c, x)| (*f, (c - x) / c)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(v)
}

/// First frequency where the advantage reaches zero, interpolated linearly
/// between grid points.
pub fn crossover(adv: &[(f64, f64)]) -> Option<f64> {
    let k = adv.iter().position(|p| p.1 <= 0.0)?;
    if k == 0 {
        return Some(adv[0].0);
    }
    let (f0, a0) = adv[k - 1];
    let (f1, a1) = adv[k];
    Some(f0 + a0 * (f1 - f0) / (a0 - a1))
}

fn frequency_verdicts(t: &Table) -> Result<Vec<Verdict>, ExperimentError> {
    let adv = advantage_curve(t)?;
    let shrink = adv
        .windows(2)
        .map(|w| w[0].1 - w[1].1)
        .fold(f64::INFINITY, f64::min);
    let first = adv.first().map_or(f64::NAN, |p| p.1);
    let cross = crossover(&adv);
    let margin =
        nan_to_fail(first.min(shrink)).min(if cross.is_some() { f64::INFINITY } else { -1.0 });
    let mut out =
        vec![Verdict::new(
            "V5",
            margin,
            format!(
            "advantage {} at lowest frequency, shrinking at every step, crossover {}; advantage {}",
            if first > 0.0 { "positive" } else { "not positive" },
            cross.map_or("not found".to_string(), |f| format!("{f:.4e} Hz")),
            adv.iter()
                .map(|(f, a)| format!("{f:.3e}:{a:+.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        )];

    let power = curves(t, &["style"], "frequency", "p_avg")?;
    let mut rise = f64::INFINITY;
    for (_, pts) in &power {
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let p: Vec<f64> = pts.iter().map(|x| x.1).collect();
        rise = rise.min(nan_to_fail(-min_relative_drop(&p)));
    }
    out.push(Verdict::new(
        "freq.power-rises",
        rise,
        "power increases with frequency for every style (smallest relative step)".into(),
    ));
    Ok(out)
}

fn random_verdicts(t: &Table) -> Result<Vec<Verdict>, ExperimentError> {
    let (gc, sc, kc) = (t.column("gate")?, t.column("style")?, t.column("stimulus")?);
    let mut spread_margin = f64::INFINITY;
    let mut dev_margin = f64::INFINITY;
    let mut spread_detail = Vec::new();
    let mut dev_detail = Vec::new();
    let mut groups: Vec<(String, String)> = Vec::new();
    for r in 0..t.rows.len() {
        let g = (t.text(r, gc).to_string(), t.text(r, sc).to_string());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    for (gate, style) in &groups {
        let rows: Vec<usize> = (0..t.rows.len())
            .filter(|&r| t.text(r, gc) == gate && t.text(r, sc) == style)
            .collect();
        for metric in PRBS_METRICS {
            let mc = t.column(metric)?;
            let det = rows
                .iter()
                .find(|&&r| t.text(r, kc) == "pulse")
                .map_or(f64::NAN, |&r| t.num(r, mc));
            let prbs: Vec<f64> = rows
                .iter()
                .filter(|&&r| t.text(r, kc) == "prbs")
                .map(|&r| t.num(r, mc))
                .collect();
            let lo = prbs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = prbs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let spread = (hi - lo) / lo;
            let dev = prbs
                .iter()
                .map(|v| (v - det).abs() / det)
                .fold(0.0, f64::max);
            let dev = if det.is_nan() || prbs.iter().any(|v| v.is_nan()) {
                f64::NAN
            } else {
                dev
            };
            spread_margin = spread_margin.min(nan_to_fail(MAX_SEED_SPREAD - spread));
            dev_margin = dev_margin.min(nan_to_fail(MAX_PRBS_DEVIATION - dev));
            spread_detail.push(format!("{gate}/{style}/{metric} {:.2}%", 100.0 * spread));
            dev_detail.push(format!("{gate}/{style}/{metric} {:.2}%", 100.0 * dev));
        }
    }
    Ok(vec![
        Verdict::new(
            "V8a",
            spread_margin,
            format!(
                "seed spread (max-min)/min <= {:.0}%: {}",
                100.0 * MAX_SEED_SPREAD,
                spread_detail.join(", ")
            ),
        ),
        Verdict::new(
            "V8b",
            dev_margin,
            format!(
                "largest deviation from the pulse-driven run <= {:.0}%: {}",
                100.0 * MAX_PRBS_DEVIATION,
                dev_detail.join(", ")
            ),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bias_table(delays: [f64; 6], powers: [f64; 6]) -> Table {
        let mut t = Table::new(
            "bias_sweep.csv",
            &[
                "gate",
                "style",
                "v_an",
                "status",
                "tp_avg",
                "p_avg",
                "pdp",
                "logic_pass",
            ],
        );
        for g in ["inverter", "nand2", "nor2"] {
            for (k, (d, p)) in delays.iter().zip(powers).enumerate() {
                let (style, v) = if k == 0 {
                    ("cmos", 0.0)
                } else {
                    ("vtmos", 0.05 * (k - 1) as f64)
                };
                t.push(vec![
                    g.into(),
                    style.into(),
                    v.to_string(),
                    "ok".into(),
                    d.to_string(),
                    p.to_string(),
                    (d * p).to_string(),
                    "true".into(),
                ]);
            }
        }
        t
    }

    fn get<'a>(v: &'a [Verdict], id: &str) -> &'a Verdict {
        v.iter().find(|x| x.id == id).unwrap()
    }

    #[test]
    fn bias_trends_pass() {
        let t = bias_table(
            [10.0, 7.0, 8.0, 9.0, 10.0, 11.0],
            [10.0, 10.5, 8.0, 6.5, 5.5, 4.5],
        );
        let v = bias_verdicts(&t).unwrap();
        for id in ["V1", "V2", "V3", "V4", "V7a"] {
            assert!(get(&v, id).pass, "{}", get(&v, id));
        }
        assert!((get(&v, "V3").margin - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bias_trend_violations_fail() {
        // delay dips at one bias; power at zero bias below CMOS
        let t = bias_table(
            [10.0, 7.0, 8.0, 7.5, 10.0, 11.0],
            [10.0, 9.5, 8.0, 6.5, 5.5, 4.5],
        );
        let v = bias_verdicts(&t).unwrap();
        assert!(!get(&v, "V1").pass);
        assert!(!get(&v, "V2").pass);
    }

    #[test]
    fn dead_gate_fails_levels() {
        let mut t = bias_table(
            [10.0, 7.0, 8.0, 9.0, 10.0, 11.0],
            [10.0, 10.5, 8.0, 6.5, 5.5, 4.5],
        );
        t.rows[3][3] = "no-transition".into();
        t.rows[3][4] = String::new();
        let v = bias_verdicts(&t).unwrap();
        assert!(!get(&v, "V7a").pass);
        assert!(!get(&v, "V1").pass);
    }

    #[test]
    fn crossover_interpolates() {
        let adv = [(1.0, 0.5), (2.0, 0.2), (4.0, -0.2)];
        assert_eq!(crossover(&adv), Some(3.0));
        assert_eq!(crossover(&adv[..2]), None);
    }

    #[test]
    fn flatness_constant_in_bias_is_not_decreasing() {
        let mut vds = Table::new("iv_vds.csv", &["v_an", "v_ds", "i_ds"]);
        let mut vgs = Table::new("iv_vgs.csv", &["v_an", "v_gs", "i_ds"]);
        for (k, scale) in [3.0, 2.0, 1.0].iter().enumerate() {
            for (x, shape) in [(0.0, 0.0), (0.1, 0.9), (0.2, 1.0)] {
                vds.push(vec![
                    (0.1 * k as f64).to_string(),
                    x.to_string(),
                    (scale * shape).to_string(),
                ]);
                vgs.push(vec![
                    (0.1 * k as f64).to_string(),
                    x.to_string(),
                    (scale * (1.0 + x)).to_string(),
                ]);
            }
        }
        let v = iv_verdicts(&vgs, &vds).unwrap();
        assert!(get(&v, "V6a").pass);
        assert!(!get(&v, "V6b").pass);
        assert!(get(&v, "iv.output-swing").pass);
        assert!(get(&v, "iv.zero-vds").pass);
    }
}
