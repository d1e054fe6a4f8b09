//! Transistor-level simulator for sub-threshold logic with dynamic and
//! variable body biasing (CMOS, DTMOS and VTMOS body ties).
//!
//! The crate is organised bottom-up:
//!
//! * [`device`]: compact MOSFET/junction models and parameter cards.
//! * [`netlist`]: circuit model, SPICE-subset netlists, gate generator.
//! * [`solver`]: MNA assembly, Newton DC solution, DC sweep, transient.
//! * [`measure`]: delay, rise/fall, power, PDP, noise margins.
//! * [`experiments`]: the named experiment scenarios and their verdicts.

pub mod device;
pub mod experiments;
pub mod lfsr;
pub mod measure;
pub mod netlist;
pub mod solver;
pub mod units;
