//! Molecule configuration files (TOML).
//!
//! ```toml
//! ancilla = "Ca"
//! j_hz = [["Ca", "H", 143.0]]
//!
//! [[spins]]
//! name = "Ca"
//! gamma_ratio = 1.0
//! offset_hz = 0.0
//! ```
//!
//! Data qubits are the non-ancilla spins in file order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{Spin, SpinSystem};

pub const ALANINE_TOML: &str = include_str!("../molecules/alanine.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub ancilla: String,
    #[serde(default)]
    pub j_hz: Vec<(String, String, f64)>,
    pub spins: Vec<SpinEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinEntry {
    pub name: String,
    pub gamma_ratio: f64,
    #[serde(default)]
    pub offset_hz: f64,
}

impl MoleculeConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `alanine` or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "alanine" => Self::parse(ALANINE_TOML),
            p => Self::load(Path::new(p)),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<SpinSystem> {
        let index = |name: &str| {
            self.spins
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::Config(format!("unknown spin {name:?}")))
        };
        let ancilla = index(&self.ancilla)?;
        let couplings = self.j_hz.iter().map(|(a, b, j)| Ok((index(a)?, index(b)?, *j))).collect::<Result<Vec<_>>>()?;
        let spins = self
            .spins
            .iter()
            .map(|s| Spin { name: s.name.clone(), gamma_ratio: s.gamma_ratio, offset_hz: s.offset_hz })
            .collect();
        SpinSystem::new(spins, ancilla, &couplings).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    pub fn from_system(system: &SpinSystem) -> Self {
        let names: Vec<&str> = system.spins().iter().map(|s| s.name.as_str()).collect();
        MoleculeConfig {
            ancilla: names[system.ancilla()].to_string(),
            j_hz: system
                .couplings()
                .into_iter()
                .map(|(a, b, j)| (names[a].to_string(), names[b].to_string(), j))
                .collect(),
            spins: system
                .spins()
                .iter()
                .map(|s| SpinEntry { name: s.name.clone(), gamma_ratio: s.gamma_ratio, offset_hz: s.offset_hz })
                .collect(),
        }
    }
}

pub fn alanine() -> SpinSystem {
    MoleculeConfig::parse(ALANINE_TOML).and_then(|c| c.system()).expect("builtin alanine config is valid")
}
