//! The TOML configuration document, shipped presets and `key=value`
//! overrides.
//!
//! Every section is optional and falls back to its defaults; unknown keys
//! anywhere in the document are rejected. The document carries a
//! `schema_version` that must match [`SCHEMA_VERSION`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actuation::{EncoderModel, MotorParams, PidGains};
use crate::dynamics::{BodyParams, SimConfig};
use crate::error::{Error, Result};
use crate::estimation::{FitWeighting, OptimizerConfig};
use crate::kinematics::{BodyVelocity, RobotGeometry};
use crate::signals::{ExcitationProfile, ResponseSignal, Segment};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub geometry: RobotGeometry,
    #[serde(default)]
    pub body: BodyParams,
    #[serde(default)]
    pub motor: MotorParams,
    #[serde(default)]
    pub controller: PidGains,
    #[serde(default)]
    pub encoder: EncoderModel,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub identification: IdentificationSection,
    #[serde(default)]
    pub friction: FrictionSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub profile: ProfileConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub physics_dt_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Wheel-shaft reference slope limit (rad/s²).
    pub accel_limit: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            physics_dt_s: d.physics_dt_s,
            duration_s: None,
            accel_limit: d.accel_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentificationSection {
    /// Response channel compared by the fit and validate commands.
    pub signal: ResponseSignal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionSection {
    pub weighting: FitWeighting,
}

/// Knobs for generating synthetic fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    /// Std of additive Gaussian noise on the logged body response.
    pub response_noise_std: f64,
    /// Relative std of multiplicative noise on steady-sweep voltages.
    pub voltage_noise_rel: f64,
    /// Voltages applied by the steady sweep, on every wheel.
    pub sweep_voltages: Vec<f64>,
    /// Give up on a sweep point that has not settled after this long.
    pub settle_time_s: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            response_noise_std: 0.0,
            voltage_noise_rel: 0.0,
            sweep_voltages: (1..=12).map(|k| 2.0 * k as f64).collect(),
            settle_time_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `steps` are `[duration_s, omega]` pairs.
    #[default]
    Rotation,
    /// `steps` are `[duration_s, v]` pairs.
    Linear,
    /// Explicit `[[profile.segments]]` tables.
    Segments,
    /// Zero reference for `duration_s`.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub duration_s: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub vn: f64,
    #[serde(default)]
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    pub steps: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub segments: Vec<SegmentConfig>,
}

/// Rotation steps: each is long against the ~10 s closed-loop time constant,
/// stays clear of the wheel dead zone and below saturation, and the robot
/// turns in place so the workspace stays bounded.
pub const ROTATION_STEPS: [[f64; 2]; 4] = [[15.0, 2.0], [15.0, -2.0], [15.0, 3.0], [15.0, 1.0]];
pub const LINEAR_STEPS: [[f64; 2]; 4] = [[15.0, 0.5], [15.0, -0.5], [15.0, 0.8], [15.0, 0.0]];

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Rotation,
            steps: ROTATION_STEPS.to_vec(),
            duration_s: None,
            segments: Vec::new(),
        }
    }
}

impl ProfileConfig {
    pub fn build(&self) -> Result<ExcitationProfile> {
        let steps: Vec<(f64, f64)> = self.steps.iter().map(|s| (s[0], s[1])).collect();
        let need_steps = || {
            if steps.is_empty() {
                Err(Error::Config(format!("profile kind {:?} needs `steps`", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ProfileKind::Rotation => {
                need_steps()?;
                ExcitationProfile::pure_rotation(&steps)
            }
            ProfileKind::Linear => {
                need_steps()?;
                ExcitationProfile::pure_linear(&steps)
            }
            ProfileKind::Segments => ExcitationProfile::new(
                self.segments
                    .iter()
                    .map(|s| Segment {
                        duration_s: s.duration_s,
                        reference: BodyVelocity::new(s.v, s.vn, s.omega),
                    })
                    .collect(),
            ),
            ProfileKind::Null => ExcitationProfile::new(vec![Segment {
                duration_s: self.duration_s.unwrap_or(10.0),
                reference: BodyVelocity::ZERO,
            }]),
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "datasheet",
        summary: "manufacturer and measured starting values, untuned gains, rotation steps",
    },
    Preset {
        name: "fitted",
        summary: "identified friction, gains and yaw inertia, rotation steps",
    },
    Preset {
        name: "fitted-linear",
        summary: "identified parameters with forward/backward linear steps",
    },
    Preset {
        name: "null",
        summary: "identified parameters with a zero reference",
    },
];

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sim: SimSection::default(),
            geometry: RobotGeometry::default(),
            body: BodyParams::default(),
            motor: MotorParams::default(),
            controller: PidGains::default(),
            encoder: EncoderModel::default(),
            optimizer: OptimizerConfig::default(),
            identification: IdentificationSection::default(),
            friction: FrictionSection::default(),
            synthetic: SyntheticSection::default(),
            profile: ProfileConfig::default(),
        }
    }
}

impl ConfigDocument {
    pub fn preset(name: &str) -> Result<Self> {
        let mut doc = Self::default();
        match name {
            "fitted" => {}
            "datasheet" => {
                doc.body.j_z = 0.705;
                doc.controller.kp = 0.2;
                doc.controller.ki = 0.2;
                doc.controller.kd = 0.01;
            }
            "fitted-linear" => {
                doc.profile.kind = ProfileKind::Linear;
                doc.profile.steps = LINEAR_STEPS.to_vec();
            }
            "null" => {
                doc.profile = ProfileConfig {
                    kind: ProfileKind::Null,
                    steps: Vec::new(),
                    duration_s: Some(10.0),
                    segments: Vec::new(),
                };
            }
            other => {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (available: {})",
                    names.join(", ")
                )));
            }
        }
        Ok(doc)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_table(value)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// A preset with overrides applied through the same path as a file.
    pub fn preset_with(name: &str, overrides: &[String]) -> Result<Self> {
        let doc = Self::preset(name)?;
        if overrides.is_empty() {
            return Ok(doc);
        }
        let mut value = toml::Table::try_from(&doc).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_table(value)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let doc: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        doc.sim_config()?;
        doc.optimizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(doc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The simulator configuration, validated.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let cfg = SimConfig {
            physics_dt_s: self.sim.physics_dt_s,
            duration_s: self.sim.duration_s,
            geometry: self.geometry,
            body: self.body,
            motor: self.motor,
            gains: self.controller,
            accel_limit: self.sim.accel_limit,
            encoder: self.encoder,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn set_sim_config(&mut self, cfg: &SimConfig) {
        self.sim.physics_dt_s = cfg.physics_dt_s;
        self.sim.duration_s = cfg.duration_s;
        self.sim.accel_limit = cfg.accel_limit;
        self.geometry = cfg.geometry;
        self.body = cfg.body;
        self.motor = cfg.motor;
        self.controller = cfg.gains;
        self.encoder = cfg.encoder;
    }

    pub fn profile(&self) -> Result<ExcitationProfile> {
        self.profile.build().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            e => Error::Config(format!("profile: {e}")),
        })
    }
}

/// Applies `dotted.key=value` to a parsed document. The value is read as a
/// TOML literal, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("x = {raw}")) {
        Ok(mut t) => t.remove("x").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };

    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{spec}`: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
