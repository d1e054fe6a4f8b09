//! Circuit data model, netlist reader/writer, topology validation and the
//! logic-gate generator.

mod circuit;
mod gates;
mod parser;
mod validate;

pub use circuit::{Circuit, Element, Model, Prbs, Pulse, SourceSpec, GROUND};
pub use gates::{
    bias_source_names, build_gate, BodyStyle, GateError, GateKind, GateSpec, InputStimulus,
    DEFAULT_LOAD_CAP,
};
pub use parser::{parse_netlist, print_netlist, Diagnostic};
pub use validate::validate;
