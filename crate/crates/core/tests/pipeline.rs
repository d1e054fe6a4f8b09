use std::path::Path;

use vtmos::experiments::{
    measure_gate, measure_run, run_experiment, ExperimentConfig, ExperimentId, RunPlan,
};
use vtmos::netlist::{parse_netlist, GateKind, GateSpec};
use vtmos::solver::{transient, SolverOptions};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn hand_written_nand2_matches_generated() {
    let text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nand2_vtmos.cir"),
    )
    .unwrap();
    let deck = parse_netlist(&text).unwrap();
    let spec = GateSpec::vtmos(GateKind::Nand2, 0.15);
    let plan = RunPlan::for_spec(&spec, 0).unwrap();
    let opts = SolverOptions::default();
    let run = transient(&deck, plan.t_stop, &opts).unwrap();
    let from_deck = measure_run(&spec, &plan, &run).unwrap();
    let generated = measure_gate(&spec, 0, &opts).unwrap();
    assert!(
        rel(from_deck.p_avg, generated.p_avg) < 1e-3,
        "{from_deck}\n{generated}"
    );
    assert!(
        rel(from_deck.tp_avg, generated.tp_avg) < 1e-3,
        "{from_deck}\n{generated}"
    );
    assert!(from_deck.p_bias > 0.0);
}

#[test]
fn config_file_with_relative_card() {
    let dir = std::env::temp_dir().join(format!("vtmos-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("slow.card"), "nmos.vth0 = 0.25\n").unwrap();
    std::fs::write(
        dir.join("run.cfg"),
        "# slower NMOS\nexperiment = vtc\ncard = slow.card\nv_an = 0 0.2\njobs = 2\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&dir.join("run.cfg")).unwrap();
    assert_eq!(cfg.model_card().unwrap().nmos.vth0, 0.25);
    let r = run_experiment(ExperimentId::Vtc, &cfg).unwrap();
    assert!(r.verdict("V7b").unwrap().pass, "{}", r.verdict_text());
    let written = r.write(&dir.join("out")).unwrap();
    assert_eq!(written.len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_line_is_located() {
    let e = ExperimentConfig::parse("seed = 0x1\nvdd 0.2\n").unwrap_err();
    assert!(e.to_string().contains("line 2"), "{e}");
    let e = ExperimentConfig::parse("seed = 0\n").unwrap_err();
    assert!(e.to_string().contains("line 1"), "{e}");
}
