//! Experiment configuration.
//!
//! A config file is a TOML document whose tables mirror the module
//! configurations. Every key is optional; missing keys take the desk-scale
//! defaults below. Keys that do not exist in the default tree are rejected
//! with their full dotted path.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use simstack_core::ao::AoConfig;
use simstack_core::channel::ScenarioConfig;
use simstack_core::geometry::SimGeometry;
use simstack_ddpg::{AgentConfig, ChannelRefresh};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub layers: usize,
    /// Meta-atoms per layer; must be a perfect square.
    pub atoms: usize,
    /// Data streams, equal to users and transmit antennas.
    pub users: usize,
    pub carrier_ghz: f64,
    pub thickness_wl: f64,
    pub element_spacing_wl: f64,
    pub atom_area_wl_sq: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            atoms: 16,
            users: 2,
            carrier_ghz: 28.0,
            thickness_wl: 5.0,
            element_spacing_wl: 0.5,
            atom_area_wl_sq: 0.25,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<SimGeometry> {
        Ok(SimGeometry::from_wavelengths(
            self.layers,
            self.atoms,
            self.users,
            self.carrier_ghz,
            self.thickness_wl,
            self.element_spacing_wl,
            self.atom_area_wl_sq,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookConfig {
    pub size: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { size: 10_000 }
    }
}

/// Digital ZF/MMSE baselines: `M` transmit antennas on a half-wavelength
/// line, direct Rayleigh channel to the users.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoSimConfig {
    pub correlated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: usize,
    pub first_seed: u64,
    pub ao_restarts: usize,
    /// Wall time breaks byte-identical output, so it is off by default.
    pub record_wall_time: bool,
    /// Write per-step reward traces for the DRL schemes.
    pub traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: 20,
            first_seed: 0,
            ao_restarts: 1,
            record_wall_time: false,
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub levels: usize,
    /// Power grid resolution: powers are multiples of `P / power_steps`.
    pub power_steps: usize,
    pub max_evaluations: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            power_steps: 10,
            max_evaluations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PowerDbm,
    Layers,
    Atoms,
    Users,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PowerDbm => "power_dbm",
            Axis::Layers => "layers",
            Axis::Atoms => "atoms",
            Axis::Users => "users",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "power_dbm" => Ok(Axis::PowerDbm),
            "layers" => Ok(Axis::Layers),
            "atoms" => Ok(Axis::Atoms),
            "users" => Ok(Axis::Users),
            _ => Err(HarnessError::Config(format!(
                "unknown sweep axis `{s}` (expected power_dbm, layers, atoms or users)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: Axis::PowerDbm,
            values: vec![0.0, 10.0, 20.0],
            schemes: vec!["random".into(), "codebook".into(), "ao".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub scenario: ScenarioConfig,
    pub codebook: CodebookConfig,
    pub nosim: NoSimConfig,
    pub ao: AoConfig,
    pub drl: AgentConfig,
    pub run: RunConfig,
    pub oracle: OracleConfig,
    pub sweep: SweepConfig,
}

/// Desk-scale DRL: reference hyperparameters with a short horizon, on the
/// same fixed channel the other schemes see.
pub fn desk_scale_drl() -> AgentConfig {
    AgentConfig {
        episodes: 5,
        steps_per_episode: 2000,
        channel_refresh: ChannelRefresh::Fixed,
        ..AgentConfig::default()
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            scenario: ScenarioConfig::default(),
            codebook: CodebookConfig::default(),
            nosim: NoSimConfig::default(),
            ao: AoConfig::default(),
            drl: desk_scale_drl(),
            run: RunConfig::default(),
            oracle: OracleConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table, path: &str) -> Result<()> {
    for (key, value) in overlay {
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match base.get_mut(&key) {
            None => return Err(HarnessError::UnknownKey(full)),
            Some(toml::Value::Table(inner)) => match value {
                toml::Value::Table(t) => merge(inner, t, &full)?,
                other => {
                    return Err(HarnessError::Config(format!(
                        "`{full}` must be a table, got {}",
                        other.type_str()
                    )))
                }
            },
            Some(slot) => *slot = value,
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let overlay: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let mut tree = toml::Table::try_from(Self::default()).map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut tree, overlay, "")?;
        let cfg: Self = toml::Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.build()?;
        self.scenario.validate()?;
        self.ao.validate()?;
        self.drl.validate()?;
        if self.codebook.size == 0 {
            return Err(HarnessError::Config("codebook.size must be positive".into()));
        }
        if self.run.ao_restarts == 0 {
            return Err(HarnessError::Config("run.ao_restarts must be positive".into()));
        }
        if self.oracle.levels < 2 || self.oracle.power_steps == 0 {
            return Err(HarnessError::Config(
                "oracle.levels must be at least 2 and oracle.power_steps positive".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (key-sorted, compact) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("configuration serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: Axis, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let count = || -> Result<usize> {
            if value.fract() != 0.0 || value < 1.0 || value > u32::MAX as f64 {
                return Err(HarnessError::Config(format!(
                    "{} must be a positive integer, got {value}",
                    axis.name()
                )));
            }
            Ok(value as usize)
        };
        match axis {
            Axis::PowerDbm => {
                if !value.is_finite() {
                    return Err(HarnessError::Config(format!("power must be finite, got {value}")));
                }
                cfg.scenario.power_dbm = value;
            }
            Axis::Layers => cfg.geometry.layers = count()?,
            Axis::Atoms => cfg.geometry.atoms = count()?,
            Axis::Users => cfg.geometry.users = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
