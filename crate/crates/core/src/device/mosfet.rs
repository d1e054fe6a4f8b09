//! Sub-threshold MOSFET current with a square-root body effect.
//!
//! ```text
//! V_th(v_bs) = vth0 + gamma * (sqrt(phi2f - v_bs) - sqrt(phi2f))
//! I_ds       = i_spec * W/L * exp((v_gs - V_th) / (n U_T)) * (1 - exp(-v_ds / U_T))
//! ```
//!
//! Voltages are in the NMOS frame. PMOS callers reflect the terminal
//! differences (`v_gs -> v_sg` etc.) and negate the current; see
//! [`OperatingPoint::reflected`]. For `v_ds < 0` the drain and source swap
//! roles and the current changes sign, so the model covers all quadrants and
//! stays C1 across `v_ds = 0`.
//!
//! Valid for |V| <= 0.4 V; strong inversion is not modeled.

use super::params::MosfetParams;

/// Exponent above which `exp` continues along its tangent.
pub const EXP_LIMIT: f64 = 40.0;

/// Distance below `phi2f` at which the square-root law is replaced by its
/// tangent line.
pub const SQRT_CLAMP_MARGIN: f64 = 0.1;

/// `exp(x)` with a C1 linear continuation above [`EXP_LIMIT`].
/// Returns (value, derivative).
#[inline]
pub fn limited_exp(x: f64) -> (f64, f64) {
    if x <= EXP_LIMIT {
        let e = x.exp();
        (e, e)
    } else {
        let e = EXP_LIMIT.exp();
        (e * (1.0 + x - EXP_LIMIT), e)
    }
}

/// Terminal voltage differences in the NMOS frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v_gs: f64,
    pub v_ds: f64,
    pub v_bs: f64,
}

impl OperatingPoint {
    pub fn new(v_gs: f64, v_ds: f64, v_bs: f64) -> Self {
        Self { v_gs, v_ds, v_bs }
    }

    /// Operating point of a PMOS in the NMOS frame: every difference is
    /// negated (v_sg, v_sd, v_sb).
    pub fn reflected(self) -> Self {
        Self::new(-self.v_gs, -self.v_ds, -self.v_bs)
    }
}

/// Small-signal conductances (S): dI/dv_gs, dI/dv_ds, dI/dv_bs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Conductances {
    pub g_m: f64,
    pub g_ds: f64,
    pub g_mb: f64,
}

/// Threshold voltage and its derivative with respect to v_bs.
pub fn threshold_with_slope(p: &MosfetParams, v_bs: f64) -> (f64, f64) {
    if p.gamma == 0.0 {
        return (p.vth0, 0.0);
    }
    let knee = p.phi2f - SQRT_CLAMP_MARGIN;
    let root0 = p.phi2f.sqrt();
    if v_bs <= knee {
        let root = (p.phi2f - v_bs).sqrt();
        (p.vth0 + p.gamma * (root - root0), -p.gamma / (2.0 * root))
    } else {
        let root = (p.phi2f - knee).sqrt();
        let at_knee = p.vth0 + p.gamma * (root - root0);
        let slope = -p.gamma / (2.0 * root);
        (at_knee + slope * (v_bs - knee), slope)
    }
}

pub fn threshold_voltage(p: &MosfetParams, v_bs: f64) -> f64 {
    threshold_with_slope(p, v_bs).0
}

/// Drain current (A), flowing drain to source in the NMOS frame.
pub fn mosfet_ids(p: &MosfetParams, op: OperatingPoint) -> f64 {
    evaluate(p, op).0
}

/// Analytic partial derivatives of [`mosfet_ids`].
pub fn mosfet_conductances(p: &MosfetParams, op: OperatingPoint) -> Conductances {
    evaluate(p, op).1
}

/// Current and conductances in one pass.
pub fn evaluate(p: &MosfetParams, op: OperatingPoint) -> (f64, Conductances) {
    if op.v_ds >= 0.0 {
        forward(p, op.v_gs, op.v_ds, op.v_bs)
    } else {
        // Source and drain exchange roles: evaluate at (v_gd, v_sd, v_bd)
        // and map derivatives back through the chain rule.
        let (i, g) = forward(p, op.v_gs - op.v_ds, -op.v_ds, op.v_bs - op.v_ds);
        let c = Conductances {
            g_m: -g.g_m,
            g_mb: -g.g_mb,
            g_ds: g.g_m + g.g_ds + g.g_mb,
        };
        (-i, c)
    }
}

fn forward(p: &MosfetParams, v_gs: f64, v_ds: f64, v_bs: f64) -> (f64, Conductances) {
    let ut = p.thermal_voltage();
    let nut = p.n_slope * ut;
    let (vth, dvth) = threshold_with_slope(p, v_bs);
    let (e, de) = limited_exp((v_gs - vth) / nut);
    let tail = (-v_ds / ut).exp();
    let sat = 1.0 - tail;
    let k = p.drive();
    let i = k * e * sat;
    let g_m = k * de * sat / nut;
    (
        i,
        Conductances {
            g_m,
            g_ds: k * e * tail / ut,
            g_mb: -g_m * dvth,
        },
    )
}
