use std::path::Path;

use vtmos::device::{ModelCard, MosKind};
use vtmos::experiments::{run_experiment, ExperimentConfig, ExperimentId, Table};
use vtmos::measure::{
    average_power, crossings, logic_levels, propagation_delay_multi, rise_fall_times,
    MeasurementReport, Polarity,
};
use vtmos::netlist::{
    build_gate, parse_netlist, print_netlist, BodyStyle, GateKind, GateSpec, InputStimulus, Model,
};
use vtmos::solver::{dc_operating_point, dc_sweep, transient, SolverOptions, Waveform};
use vtmos::units::parse_value;

use crate::error::{CliError, EXIT_OK, EXIT_VERDICT};
use crate::gnuplot;
use crate::output::OutDir;
use crate::{emit, say};
use crate::{Analysis, Cli, Command, ExpArgs, GateArgs, MeasureArgs, SimArgs};

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Sim(a) => sim(a, &cli.overrides, cli.verbose),
        Command::Gate(a) => gate(a, &cli.overrides),
        Command::Exp(a) => exp(a, &cli.overrides, cli.verbose),
        Command::Measure(a) => {
            if let Some((k, _)) = cli.overrides.first() {
                return Err(CliError::Input(format!(
                    "measure takes no overrides (got `{k}`)"
                )));
            }
            measure(a)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn number(key: &str, value: &str) -> Result<f64, CliError> {
    parse_value(value).map_err(|e| CliError::Input(format!("{key}: {e}")))
}

fn apply_device_override(card: &mut ModelCard, key: &str, value: &str) -> Result<bool, CliError> {
    if !(key.starts_with("nmos.") || key.starts_with("pmos.")) {
        return Ok(false);
    }
    card.set(key, number(key, value)?)
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(true)
}

fn sim(a: &SimArgs, overrides: &[(String, String)], verbose: bool) -> Result<u8, CliError> {
    let text = read(&a.netlist)?;
    let mut circuit = parse_netlist(&text).map_err(CliError::Diagnostics)?;
    let mut opts = SolverOptions::default();
    for (k, v) in overrides {
        if let Some(opt) = k.strip_prefix("solver.") {
            opts.set(opt, v)
                .map_err(|e| CliError::Input(e.to_string()))?;
        } else if let Some((kind, param)) = k
            .split_once('.')
            .filter(|(p, _)| *p == "nmos" || *p == "pmos")
        {
            let kind: MosKind = kind
                .parse()
                .map_err(|_| CliError::Input(format!("bad key `{k}`")))?;
            let value = number(k, v)?;
            for model in circuit.models.values_mut() {
                if let Model::Mosfet(p) = model {
                    if p.kind == kind {
                        p.set(param, value)
                            .map_err(|e| CliError::Input(e.to_string()))?;
                    }
                }
            }
        } else {
            return Err(CliError::Input(format!(
                "unknown override `{k}` (sim accepts solver.*, nmos.* and pmos.*)"
            )));
        }
    }
    let out = OutDir::new(&a.out);
    let start = std::time::Instant::now();
    let (name, csv) = match &a.analysis {
        Analysis::Op => {
            let s = dc_operating_point(&circuit, &opts)?;
            for (n, v) in s.node_names.iter().zip(&s.voltages) {
                say!("v({n}) = {v:.6e} V");
            }
            for (n, i) in s.source_names.iter().zip(&s.currents) {
                say!("i({n}) = {i:.6e} A");
            }
            ("op.csv", s.to_csv())
        }
        Analysis::Dc {
            source,
            start,
            stop,
            step,
        } => {
            let values = sweep_values(*start, *stop, *step)?;
            let points = dc_sweep(&circuit, source, &values, &opts)?;
            let csv = sweep_csv(source, &points);
            say!("dc sweep of {source}: {} points", points.len());
            ("dc.csv", csv)
        }
        Analysis::Tran { t_stop } => {
            let r = transient(&circuit, *t_stop, &opts)?;
            say!(
                "transient to {t_stop:e} s: {} accepted, {} rejected steps",
                r.accepted_steps,
                r.rejected_steps
            );
            for (label, s) in r.labels.iter().zip(&r.signals) {
                if let Some(v) = s.last() {
                    say!("{label} = {v:.6e} at t_stop");
                }
            }
            ("tran.csv", r.to_csv())
        }
    };
    let path = out.write(name, &csv)?;
    say!("wrote {}", path.display());
    if a.gnuplot && name != "op.csv" {
        let header: Vec<String> = csv
            .lines()
            .next()
            .unwrap_or("")
            .split(',')
            .map(String::from)
            .collect();
        let p = out.write(
            &name.replace(".csv", ".gp"),
            &gnuplot::columns_script(name, &header, false),
        )?;
        say!("wrote {}", p.display());
    }
    if verbose {
        eprintln!(
            "{} in {:.3} s",
            circuit.title,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(EXIT_OK)
}

fn sweep_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(CliError::Input(
            "dc sweep needs finite bounds and a positive step".into(),
        ));
    }
    let n = ((stop - start).abs() / step + 1e-9).floor() as usize;
    let dir = if stop >= start { 1.0 } else { -1.0 };
    Ok((0..=n).map(|k| start + dir * step * k as f64).collect())
}

fn sweep_csv(source: &str, points: &[vtmos::solver::SweepPoint]) -> String {
    let Some(first) = points.first() else {
        return format!("{source}\n");
    };
    let s = &first.solution;
    let mut out = String::from(source);
    for n in &s.node_names {
        out.push_str(&format!(",v({n})"));
    }
    for n in &s.source_names {
        out.push_str(&format!(",i({n})"));
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!("{:e}", p.value));
        for v in p.solution.voltages.iter().chain(&p.solution.currents) {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

fn gate_spec(a: &GateArgs, overrides: &[(String, String)]) -> Result<GateSpec, CliError> {
    let gate: GateKind = a.gate.parse()?;
    let style: BodyStyle = a.style.parse()?;
    let mut card = match &a.card {
        Some(p) => ModelCard::parse(&read(p)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        None => ModelCard::reference(),
    };
    for (k, v) in overrides {
        if !apply_device_override(&mut card, k, v)? {
            return Err(CliError::Input(format!(
                "unknown override `{k}` (gate accepts nmos.* and pmos.*)"
            )));
        }
    }
    let v_an = match (style, a.v_an) {
        (BodyStyle::Vtmos, v) => v.unwrap_or(0.0),
        (_, None) => 0.0,
        (_, Some(_)) => return Err(CliError::Input(format!("{} takes no bias", style.as_str()))),
    };
    let spec = GateSpec {
        v_an,
        v_ap: a.v_ap.unwrap_or(v_an),
        vdd: a.vdd,
        nmos: card.nmos,
        pmos: card.pmos,
        load_cap: a.load_cap,
        stimulus: InputStimulus::pulse(a.freq),
        ..GateSpec::new(gate, style)
    };
    spec.check()?;
    Ok(spec)
}

fn gate(a: &GateArgs, overrides: &[(String, String)]) -> Result<u8, CliError> {
    let spec = gate_spec(a, overrides)?;
    let text = print_netlist(&build_gate(&spec)?);
    match &a.out {
        Some(dir) => {
            let name = match spec.style {
                BodyStyle::Vtmos => format!("{}_vtmos_{}.cir", spec.gate.as_str(), spec.v_an),
                s => format!("{}_{}.cir", spec.gate.as_str(), s.as_str()),
            };
            let path = OutDir::new(dir).write(&name, &text)?;
            say!("wrote {}", path.display());
        }
        None => emit(&text),
    }
    Ok(EXIT_OK)
}

fn exp(a: &ExpArgs, overrides: &[(String, String)], verbose: bool) -> Result<u8, CliError> {
    let id: ExperimentId = a.experiment.parse()?;
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v).map_err(CliError::Input)?;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j.max(1);
    }
    if let Some(dir) = &a.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(other) = cfg.experiment.filter(|e| *e != id) {
        return Err(CliError::Input(format!(
            "config names experiment `{other}` but `{id}` was requested"
        )));
    }
    let start = std::time::Instant::now();
    let result = run_experiment(id, &cfg)?;
    if verbose {
        eprintln!(
            "{id} in {:.2} s on {} threads",
            start.elapsed().as_secs_f64(),
            cfg.jobs
        );
    }
    let out = OutDir::new(&cfg.out_dir);
    for t in &result.tables {
        let p = out.write(&t.name, &t.to_csv())?;
        say!("wrote {}", p.display());
    }
    if a.gnuplot {
        for (name, script) in gnuplot::experiment_scripts(&result.tables) {
            let p = out.write(&name, &script)?;
            say!("wrote {}", p.display());
        }
    }
    out.write("verdicts.txt", &result.verdict_text())?;
    emit(&result.verdict_text());
    Ok(if result.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}

fn column_waveform(t: &Table, name: &str, kind: &str) -> Result<Waveform, CliError> {
    let wanted = if name.contains('(') {
        name.to_ascii_lowercase()
    } else {
        format!("{kind}({})", name.to_ascii_lowercase())
    };
    let col = t
        .header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(&wanted))
        .ok_or_else(|| CliError::Input(format!("no column `{wanted}` in {}", t.name)))?;
    let times = (0..t.rows.len()).map(|r| t.num(r, 0)).collect();
    let values = (0..t.rows.len()).map(|r| t.num(r, col)).collect();
    Ok(Waveform::new(wanted, times, values)?)
}

/// Midpoints between successive input events inside the window.
fn quiet_times(inputs: &[Waveform], vdd: f64, (t0, t1): (f64, f64)) -> Vec<f64> {
    let mut events: Vec<f64> = inputs
        .iter()
        .flat_map(|w| crossings(w, 0.5 * vdd))
        .map(|(t, _)| t)
        .filter(|t| (t0..=t1).contains(t))
        .collect();
    events.sort_by(f64::total_cmp);
    events.insert(0, t0);
    events.push(t1);
    events
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect()
}

fn measure(a: &MeasureArgs) -> Result<u8, CliError> {
    let name = a
        .csv
        .file_name()
        .map_or("input".into(), |n| n.to_string_lossy().into_owned());
    let t = Table::parse(&name, &read(&a.csv)?)?;
    if t.header.first().map(String::as_str) != Some("time") {
        return Err(CliError::Input(format!(
            "{name}: first column must be `time`"
        )));
    }
    let inputs = a
        .inputs
        .iter()
        .map(|n| column_waveform(&t, n, "v"))
        .collect::<Result<Vec<_>, _>>()?;
    let output = column_waveform(&t, &a.output, "v")?;
    let window = match a.window.as_deref() {
        Some([t0, t1]) => (*t0, *t1),
        _ => (0.5 * (output.start() + output.end()), output.end()),
    };
    let (t0, t1) = window;
    let clip = |w: &Waveform| w.window(t0, t1);
    let ins = inputs.iter().map(clip).collect::<Result<Vec<_>, _>>()?;
    let out_w = clip(&output)?;
    let refs: Vec<&Waveform> = ins.iter().collect();
    let polarity = if a.non_inverting {
        Polarity::NonInverting
    } else {
        Polarity::Inverting
    };
    let delay = propagation_delay_multi(&refs, &out_w, 0.0, a.vdd, polarity)?;
    let (t_rise, t_fall) = rise_fall_times(&out_w, 0.0, a.vdd)?;
    let p_supply = average_power(a.vdd, &column_waveform(&t, &a.supply, "i")?, t0, t1)?;
    let mut p_bias = 0.0;
    for (src, volts) in &a.bias {
        p_bias += average_power(number(src, volts)?, &column_waveform(&t, src, "i")?, t0, t1)?;
    }
    let levels = logic_levels(&output, &quiet_times(&inputs, a.vdd, window), a.vdd);
    let p_avg = p_supply + p_bias;
    let report = MeasurementReport {
        label: name,
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
        window,
    };
    say!("{report}");
    if let Some(dir) = &a.out {
        let csv = format!("{}\n{}\n", MeasurementReport::CSV_HEADER, report.csv_row());
        let p = OutDir::new(dir).write("measure.csv", &csv)?;
        say!("wrote {}", p.display());
    }
    Ok(if report.logic_pass {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}
