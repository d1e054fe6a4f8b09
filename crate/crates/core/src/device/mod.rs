//! Compact device models: sub-threshold MOSFET with body-bias-dependent
//! threshold, pn junctions, and the parameter card format.
//!
//! Everything here is a pure function of its arguments.

mod card;
mod diode;
mod mosfet;
mod params;

pub use card::ModelCard;
pub use diode::diode_current;
pub use mosfet::{
    evaluate, limited_exp, mosfet_conductances, mosfet_ids, threshold_voltage,
    threshold_with_slope, Conductances, OperatingPoint, EXP_LIMIT, SQRT_CLAMP_MARGIN,
};
pub use params::{thermal_voltage, DiodeParams, MosKind, MosfetParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DeviceError {
    #[error("invalid parameter: {0}")]
    Invalid(&'static str),
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("unknown device kind `{0}`")]
    UnknownKind(String),
    #[error("card line {line}: {message}")]
    Card { line: usize, message: String },
}
