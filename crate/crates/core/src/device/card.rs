//! Parameter card files: `nmos.<key> = value` / `pmos.<key> = value`, one per
//! line, `#` comments. Keys left out keep their reference values.

use std::fmt::Write;

use super::params::{MosKind, MosfetParams};
use super::DeviceError;
use crate::units::parse_value;

/// An NMOS/PMOS pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCard {
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
}

impl Default for ModelCard {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelCard {
    pub fn reference() -> Self {
        Self {
            nmos: MosfetParams::reference_nmos(),
            pmos: MosfetParams::reference_pmos(),
        }
    }

    pub fn get(&self, kind: MosKind) -> &MosfetParams {
        match kind {
            MosKind::Nmos => &self.nmos,
            MosKind::Pmos => &self.pmos,
        }
    }

    /// Applies one `nmos.key` / `pmos.key` assignment.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), DeviceError> {
        let (device, param) = key
            .split_once('.')
            .ok_or_else(|| DeviceError::UnknownKey(key.to_string()))?;
        let params = match device.parse::<MosKind>() {
            Ok(MosKind::Nmos) => &mut self.nmos,
            Ok(MosKind::Pmos) => &mut self.pmos,
            Err(_) => return Err(DeviceError::UnknownKey(key.to_string())),
        };
        params
            .set(param, value)
            .map_err(|_| DeviceError::UnknownKey(key.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self, DeviceError> {
        let mut card = Self::reference();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: DeviceError| DeviceError::Card {
                line: line_no,
                message: e.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| DeviceError::Card {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = parse_value(value.trim()).map_err(|e| DeviceError::Card {
                line: line_no,
                message: e,
            })?;
            card.set(&key, value).map_err(at)?;
        }
        card.nmos.validate()?;
        card.pmos.validate()?;
        Ok(card)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in [&self.nmos, &self.pmos] {
            for (k, v) in p.entries() {
                let _ = writeln!(out, "{}.{} = {:e}", p.kind, k, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_card_is_reference() {
        assert_eq!(
            ModelCard::parse("# nothing\n").unwrap(),
            ModelCard::reference()
        );
    }

    #[test]
    fn text_round_trip() {
        let mut card = ModelCard::reference();
        card.pmos.gamma = 0.123_456_789;
        assert_eq!(ModelCard::parse(&card.to_text()).unwrap(), card);
    }

    #[test]
    fn suffixes_and_comments() {
        let card = ModelCard::parse("nmos.width = 250n # wider\nPMOS.cgs=0.1f\n").unwrap();
        assert_eq!(card.nmos.width, 250e-9);
        assert_eq!(card.pmos.cgs, 0.1e-15);
    }

    #[test]
    fn unknown_key_is_error_with_line() {
        let err = ModelCard::parse("nmos.vth0 = 0.2\nnmos.tox = 1n\n").unwrap_err();
        match err {
            DeviceError::Card { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ModelCard::parse("vth0 = 0.2").is_err());
    }

    #[test]
    fn invalid_value_rejected() {
        assert!(ModelCard::parse("nmos.n_slope = 0.5").is_err());
    }
}
