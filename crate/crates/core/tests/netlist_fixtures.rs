use std::path::{Path, PathBuf};

use vtmos::device::ModelCard;
use vtmos::netlist::{parse_netlist, print_netlist, Element, Model};

const DECKS: [&str; 5] = [
    "inverter.cir",
    "rc.cir",
    "divider.cir",
    "diode.cir",
    "nand2_vtmos.cir",
];

fn path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(path(rel)).unwrap()
}

#[test]
fn fixtures_round_trip() {
    for name in DECKS {
        let c = parse_netlist(&read(&format!("tests/fixtures/{name}")))
            .unwrap_or_else(|d| panic!("{name}: {d:?}"));
        let printed = print_netlist(&c);
        let again = parse_netlist(&printed).unwrap();
        assert_eq!(again, c, "{name}");
        assert_eq!(print_netlist(&again), printed, "{name}");
    }
}

#[test]
fn fixture_census() {
    let census = |name: &str| {
        parse_netlist(&read(&format!("tests/fixtures/{name}")))
            .unwrap()
            .census()
    };
    // mosfets, sources, resistors, capacitors, diodes
    assert_eq!(census("inverter.cir"), [2, 2, 0, 1, 0]);
    assert_eq!(census("nand2_vtmos.cir"), [4, 7, 0, 1, 0]);
    assert_eq!(census("diode.cir"), [0, 1, 1, 0, 1]);
}

#[test]
fn pmos_override_in_model_line() {
    let c = parse_netlist(&read("tests/fixtures/nand2_vtmos.cir")).unwrap();
    let Some(Model::Mosfet(p)) = c.models.get("pch") else {
        panic!("pch model")
    };
    assert_eq!(p.vth0, 0.22);
    assert!(c
        .elements
        .iter()
        .any(|e| matches!(e, Element::VSource { name, plus, minus, .. } if name == "vap1" && plus == "pba" && minus == "a")));
}

#[test]
fn malformed_reports_every_line() {
    let diags = parse_netlist(&read("tests/fixtures/malformed.cir")).unwrap_err();
    let mut lines: Vec<usize> = diags.iter().map(|d| d.line).filter(|l| *l > 0).collect();
    lines.sort();
    lines.dedup();
    assert_eq!(lines, [2, 3, 4, 5, 6], "{diags:?}");
    assert!(diags.iter().all(|d| d.line == 0 || d.column > 0));
}

#[test]
fn shipped_card_is_the_reference() {
    let card = ModelCard::parse(&read("../../models/ref65.card")).unwrap();
    assert_eq!(card, ModelCard::reference());
    assert_eq!(ModelCard::parse(&card.to_text()).unwrap(), card);
}
