//! Ideal-diode junction current with a bounded exponential.

use super::mosfet::limited_exp;
use super::params::{thermal_voltage, DiodeParams};

/// Junction current (A) and its derivative (S) at forward voltage `v`.
///
/// Above `emission * U_T * 40` the exponential continues linearly.
pub fn diode_current(d: &DiodeParams, v: f64, temp_kelvin: f64) -> (f64, f64) {
    let nut = d.emission * thermal_voltage(temp_kelvin);
    let (e, de) = limited_exp(v / nut);
    (d.i_sat * (e - 1.0), d.i_sat * de / nut)
}
