//! One line per acceptance criterion. Exits non-zero when a criterion that
//! is expected to hold fails; criteria listed in `KNOWN_RED` are printed as
//! FAIL with their reason but do not fail the run.

use std::path::Path;
use std::process::ExitCode;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vtmos::device::{evaluate, MosfetParams, OperatingPoint, SQRT_CLAMP_MARGIN};
use vtmos::experiments::{run_experiment, ExperimentConfig, ExperimentId, ExperimentResult};
use vtmos::netlist::{build_gate, parse_netlist, print_netlist, BodyStyle, GateKind, GateSpec};
use vtmos::solver::{dc_operating_point, transient, SolverOptions};

/// Relative error allowed against the RC step response.
const RC_TOL: f64 = 1e-3;
/// Relative error allowed between analytic and finite-difference
/// conductances.
const DERIV_TOL: f64 = 1e-4;
const DERIV_POINTS: usize = 1000;
const DERIV_STEP: f64 = 1e-6;

const KNOWN_RED: &[(&str, &str)] = &[(
    "V6",
    "the weak-inversion drain factor 1-exp(-V_ds/U_T) does not depend on the threshold, so the \
     relative flatness of I_ds(V_ds) is identical at every V_AN; the absolute output swing does \
     fall with V_AN (iv.output-swing)",
)];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn a1() -> Line {
    let opts = SolverOptions::default();
    let rc = parse_netlist(&fixture("rc.cir")).expect("rc fixture");
    let run = transient(&rc, 35e-6, &opts).expect("rc transient");
    let out = run.waveform("out").expect("v(out)");
    // 1 V step through a 1 ns linear ramp into R = 10k, C = 1n
    let (tau, tr) = (10e-6_f64, 1e-9_f64);
    let exact = |t: f64| 1.0 - tau / tr * ((tr / tau).exp() - 1.0) * (-t / tau).exp();
    let errs: Vec<f64> = [tau, 3.0 * tau]
        .iter()
        .map(|&t| (out.value_at(t) - exact(t)).abs() / exact(t))
        .collect();

    let diode = parse_netlist(&fixture("diode.cir")).expect("diode fixture");
    let v = dc_operating_point(&diode, &opts)
        .expect("diode op")
        .voltage("k")
        .expect("node k");
    // Shockley diode with the solver's node leakage, by bisection
    let vt = 1.380649e-23 * 300.0 / 1.602176634e-19;
    let f = |v: f64| (1.0 - v) / 1e3 - 1e-14 * ((v / vt).exp() - 1.0) - opts.gmin * v;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dv = (v - lo).abs();
    let pass = errs.iter().all(|e| *e <= RC_TOL) && dv <= opts.vntol;
    Line {
        id: "A1",
        pass,
        detail: format!(
            "rc rel err {:.2e} @RC, {:.2e} @3RC (tol {RC_TOL:e}); diode |dV| {dv:.2e} V (tol vntol {:e})",
            errs[0], errs[1], opts.vntol
        ),
    }
}

fn a2() -> Line {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let devices = [
        MosfetParams::reference_nmos(),
        MosfetParams::reference_pmos(),
    ];
    let mut worst = 0.0_f64;
    let mut checked = 0;
    while checked < DERIV_POINTS {
        let p = &devices[checked % 2];
        let vgs: f64 = rng.random_range(-0.2..0.4);
        let vds: f64 = rng.random_range(-0.4..0.4);
        let vbs: f64 = rng.random_range(-0.4..0.4);
        // keep the central difference on one side of the piecewise joins
        if vds.abs() < 1e-3 || (vbs - (p.phi2f - SQRT_CLAMP_MARGIN)).abs() < 1e-3 {
            continue;
        }
        let (_, g) = evaluate(p, OperatingPoint::new(vgs, vds, vbs));
        let i = |dg: f64, dd: f64, db: f64| {
            evaluate(p, OperatingPoint::new(vgs + dg, vds + dd, vbs + db)).0
        };
        let h = DERIV_STEP;
        let fd = [
            (i(h, 0.0, 0.0) - i(-h, 0.0, 0.0)) / (2.0 * h),
            (i(0.0, h, 0.0) - i(0.0, -h, 0.0)) / (2.0 * h),
            (i(0.0, 0.0, h) - i(0.0, 0.0, -h)) / (2.0 * h),
        ];
        for (a, n) in [g.g_m, g.g_ds, g.g_mb].iter().zip(fd) {
            let scale = a.abs().max(n.abs());
            if scale > 0.0 {
                worst = worst.max((a - n).abs() / scale);
            }
        }
        checked += 1;
    }
    Line {
        id: "A2",
        pass: worst <= DERIV_TOL,
        detail: format!(
            "{DERIV_POINTS} random points (NMOS and PMOS), worst relative mismatch {worst:.2e} (tol {DERIV_TOL:e})"
        ),
    }
}

fn verdict_line(id: &'static str, results: &[&ExperimentResult], parts: &[&str]) -> Line {
    let mut pass = true;
    let mut detail = Vec::new();
    for part in parts {
        match results.iter().find_map(|r| r.verdict(part)) {
            Some(v) => {
                pass &= v.pass;
                detail.push(format!(
                    "{part} {} margin {:+.3e}",
                    if v.pass { "pass" } else { "fail" },
                    v.margin
                ));
            }
            None => {
                pass = false;
                detail.push(format!("{part} missing"));
            }
        }
    }
    Line {
        id,
        pass,
        detail: detail.join("; "),
    }
}

fn v7(results: &[&ExperimentResult]) -> Line {
    let mut line = verdict_line("V7", results, &["V7a", "V7b"]);
    let mut over = GateSpec::vtmos(GateKind::Inverter, 0.3);
    over.vdd = 0.2;
    let rejected = over.check().is_err() && build_gate(&over).is_err();
    line.pass &= rejected;
    line.detail.push_str(&format!(
        "; bias 0.3 V on 0.2 V supply rejected: {rejected}"
    ));
    line
}

fn a3(first: &[ExperimentResult], second: &[ExperimentResult]) -> Line {
    let mut mismatched = Vec::new();
    for (a, b) in first.iter().zip(second) {
        for (x, y) in a.tables.iter().zip(&b.tables) {
            if x.to_csv() != y.to_csv() {
                mismatched.push(x.name.clone());
            }
        }
        if a.verdict_text() != b.verdict_text() {
            mismatched.push(format!("{} verdicts", a.id));
        }
    }
    let mut decks: Vec<(String, String)> = [
        "inverter.cir",
        "rc.cir",
        "divider.cir",
        "diode.cir",
        "nand2_vtmos.cir",
    ]
    .iter()
    .map(|n| (n.to_string(), fixture(n)))
    .collect();
    for gate in GateKind::ALL {
        for style in [BodyStyle::Cmos, BodyStyle::Dtmos, BodyStyle::Vtmos] {
            let spec = GateSpec {
                v_an: if style == BodyStyle::Vtmos { 0.1 } else { 0.0 },
                v_ap: if style == BodyStyle::Vtmos { 0.1 } else { 0.0 },
                ..GateSpec::new(gate, style)
            };
            let c = build_gate(&spec).expect("generated gate");
            decks.push((format!("{gate}/{}", style.as_str()), print_netlist(&c)));
        }
    }
    let mut broken = Vec::new();
    for (name, text) in &decks {
        let c = parse_netlist(text).expect("fixture parses");
        let printed = print_netlist(&c);
        let again = parse_netlist(&printed).expect("printed netlist parses");
        if again != c || print_netlist(&again) != printed {
            broken.push(name.clone());
        }
    }
    Line {
        id: "A3",
        pass: mismatched.is_empty() && broken.is_empty(),
        detail: format!(
            "{} tables rerun on a different thread count, {} differ; {} netlists round-tripped, {} differ",
            first.iter().map(|r| r.tables.len()).sum::<usize>(),
            mismatched.len(),
            decks.len(),
            broken.len()
        ),
    }
}

fn run_all(jobs: usize) -> Vec<ExperimentResult> {
    let cfg = ExperimentConfig {
        jobs,
        ..ExperimentConfig::default()
    };
    ExperimentId::ALL
        .iter()
        .map(|&id| run_experiment(id, &cfg).unwrap_or_else(|e| panic!("{id}: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let start = std::time::Instant::now();
    let jobs = vtmos::experiments::default_jobs();
    let first = run_all(jobs);
    let second = run_all(if jobs > 1 { 1 } else { 2 });
    let get = |id: ExperimentId| first.iter().find(|r| r.id == id).expect("experiment ran");
    let bias = get(ExperimentId::BiasSweep);
    let freq = get(ExperimentId::FrequencySweep);
    let iv = get(ExperimentId::IvCurves);
    let vtc = get(ExperimentId::Vtc);
    let random = get(ExperimentId::RandomVectors);

    let lines = vec![
        a1(),
        a2(),
        verdict_line("V1", &[bias], &["V1"]),
        verdict_line("V2", &[bias], &["V2"]),
        verdict_line("V3", &[bias], &["V3"]),
        verdict_line("V4", &[bias], &["V4"]),
        verdict_line("V5", &[freq], &["V5"]),
        verdict_line("V6", &[iv], &["V6a", "V6b", "iv.output-swing"]),
        v7(&[bias, vtc]),
        verdict_line("V8", &[random], &["V8a", "V8b"]),
        a3(&first, &second),
    ];

    let mut unexpected = 0;
    for l in &lines {
        let known = KNOWN_RED.iter().find(|(id, _)| *id == l.id);
        println!(
            "{:<3} {}  {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
        match (l.pass, known) {
            (false, Some((_, why))) => println!("    known red: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("    listed as known red but passed"),
            (true, None) => {}
        }
    }
    println!(
        "{} criteria, {} pass, {} known red, {} unexpected failures ({:.1} s)",
        lines.len(),
        lines.iter().filter(|l| l.pass).count(),
        lines
            .iter()
            .filter(|l| !l.pass && KNOWN_RED.iter().any(|(id, _)| *id == l.id))
            .count(),
        unexpected,
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
