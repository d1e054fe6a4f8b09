//! Device parameter sets and the reference 65 nm card.

use std::fmt;
use std::str::FromStr;

use super::DeviceError;

const BOLTZMANN: f64 = 1.380_649e-23;
const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Thermal voltage kT/q at the given absolute temperature.
pub fn thermal_voltage(temp_kelvin: f64) -> f64 {
    BOLTZMANN * temp_kelvin / ELECTRON_CHARGE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MosKind {
    Nmos,
    Pmos,
}

impl MosKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MosKind::Nmos => "nmos",
            MosKind::Pmos => "pmos",
        }
    }
}

impl fmt::Display for MosKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MosKind {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nmos" => Ok(MosKind::Nmos),
            "pmos" => Ok(MosKind::Pmos),
            other => Err(DeviceError::UnknownKind(other.to_string())),
        }
    }
}

/// pn-junction parameters (body-source and body-drain junctions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeParams {
    /// Saturation current in amperes.
    pub i_sat: f64,
    /// Emission coefficient.
    pub emission: f64,
    /// Constant junction capacitance in farads.
    pub cap: f64,
}

impl DiodeParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        check(self.i_sat > 0.0, "i_sat must be > 0")?;
        check(self.emission >= 1.0, "emission must be >= 1")?;
        check(self.cap >= 0.0, "junction cap must be >= 0")
    }
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self {
            i_sat: 1e-18,
            emission: 1.0,
            cap: 0.0,
        }
    }
}

/// Sub-threshold compact-model parameters for one device.
///
/// PMOS devices use the same magnitudes as NMOS (`vth0 > 0`) and are
/// evaluated through sign reflection of the terminal voltages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetParams {
    pub kind: MosKind,
    /// Zero-bias threshold magnitude (V).
    pub vth0: f64,
    /// Body-effect coefficient (V^0.5).
    pub gamma: f64,
    /// Surface potential 2*phi_F (V).
    pub phi2f: f64,
    /// Sub-threshold slope factor.
    pub n_slope: f64,
    /// Specific current at W/L = 1 and zero exponent (A).
    pub i_spec: f64,
    pub width: f64,
    pub length: f64,
    pub temp_kelvin: f64,
    pub cgs: f64,
    pub cgd: f64,
    pub cgb: f64,
    pub junction: DiodeParams,
}

impl MosfetParams {
    /// Reference NMOS: V_th = 0.22 V, W/L = 200 nm / 65 nm.
    ///
    /// `i_spec` puts I_on (V_gs = V_ds = 0.2 V, V_bs = 0) near 100 nA.
    pub fn reference_nmos() -> Self {
        Self {
            kind: MosKind::Nmos,
            vth0: 0.22,
            gamma: 0.3,
            phi2f: 0.8,
            n_slope: 1.4,
            i_spec: 56e-9,
            width: 200e-9,
            length: 65e-9,
            temp_kelvin: 300.0,
            cgs: 0.05e-15,
            cgd: 0.05e-15,
            cgb: 0.02e-15,
            junction: DiodeParams {
                i_sat: 1e-18,
                emission: 1.0,
                cap: 0.1e-15,
            },
        }
    }

    /// Reference PMOS: twice the NMOS width, half the specific current
    /// (hole mobility), capacitances scaled with width.
    pub fn reference_pmos() -> Self {
        let n = Self::reference_nmos();
        Self {
            kind: MosKind::Pmos,
            i_spec: n.i_spec / 2.0,
            width: 400e-9,
            cgs: 2.0 * n.cgs,
            cgd: 2.0 * n.cgd,
            cgb: 2.0 * n.cgb,
            junction: DiodeParams {
                cap: 2.0 * n.junction.cap,
                ..n.junction
            },
            ..n
        }
    }

    pub fn reference(kind: MosKind) -> Self {
        match kind {
            MosKind::Nmos => Self::reference_nmos(),
            MosKind::Pmos => Self::reference_pmos(),
        }
    }

    pub fn thermal_voltage(&self) -> f64 {
        thermal_voltage(self.temp_kelvin)
    }

    /// i_spec * W / L.
    pub fn drive(&self) -> f64 {
        self.i_spec * self.width / self.length
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        check(self.vth0 > 0.0, "vth0 must be > 0")?;
        check(self.n_slope >= 1.0, "n_slope must be >= 1")?;
        check(self.width > 0.0, "width must be > 0")?;
        check(self.length > 0.0, "length must be > 0")?;
        check(self.gamma >= 0.0, "gamma must be >= 0")?;
        check(self.phi2f > 0.0, "phi2f must be > 0")?;
        check(self.i_spec > 0.0, "i_spec must be > 0")?;
        check(self.temp_kelvin > 0.0, "temp_kelvin must be > 0")?;
        check(
            self.cgs >= 0.0 && self.cgd >= 0.0 && self.cgb >= 0.0,
            "capacitances must be >= 0",
        )?;
        self.junction.validate()
    }

    /// Sets a numeric parameter by card key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), DeviceError> {
        let slot = match key {
            "vth0" => &mut self.vth0,
            "gamma" => &mut self.gamma,
            "phi2f" => &mut self.phi2f,
            "n_slope" => &mut self.n_slope,
            "i_spec" => &mut self.i_spec,
            "width" => &mut self.width,
            "length" => &mut self.length,
            "temp_kelvin" => &mut self.temp_kelvin,
            "cgs" => &mut self.cgs,
            "cgd" => &mut self.cgd,
            "cgb" => &mut self.cgb,
            "junction_isat" => &mut self.junction.i_sat,
            "junction_emission" => &mut self.junction.emission,
            "junction_cap" => &mut self.junction.cap,
            _ => return Err(DeviceError::UnknownKey(key.to_string())),
        };
        *slot = value;
        Ok(())
    }

    /// Numeric parameters as (key, value) pairs, in card order.
    pub fn entries(&self) -> [(&'static str, f64); 14] {
        [
            ("vth0", self.vth0),
            ("gamma", self.gamma),
            ("phi2f", self.phi2f),
            ("n_slope", self.n_slope),
            ("i_spec", self.i_spec),
            ("width", self.width),
            ("length", self.length),
            ("temp_kelvin", self.temp_kelvin),
            ("cgs", self.cgs),
            ("cgd", self.cgd),
            ("cgb", self.cgb),
            ("junction_isat", self.junction.i_sat),
            ("junction_emission", self.junction.emission),
            ("junction_cap", self.junction.cap),
        ]
    }
}

fn check(ok: bool, msg: &'static str) -> Result<(), DeviceError> {
    if ok {
        Ok(())
    } else {
        Err(DeviceError::Invalid(msg))
    }
}
