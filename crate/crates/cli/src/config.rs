//! JSON config documents for the CLI subcommands.
//!
//! Documents are strict: unknown keys are rejected so typos fail loudly
//! instead of silently falling back to defaults. Every document carries a
//! `schema_version` field so old configs fail with a clear message when the
//! format changes.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use slipsim::controller::SlipEstimates;
use slipsim::kinematics::{RobotGeometry, RobotPose};
use slipsim::simulator::{ControllerMode, SimulationConfig};
use slipsim::slip::{SlipProfile, SlipTable};
use slipsim::tuning::{log_grid, TuningSpec};
use slipsim::ControllerGains;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn check_schema(version: u32) -> Result<(), CliError> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema_version {version} not supported; this build reads version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Reads and parses a JSON config document.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Directory a config's relative paths are resolved against.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf()
}

fn default_sigma_scale() -> f64 {
    1.0
}

/// Slip scenario selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SlipSpec {
    /// Fixed longitudinal slip parameters, no lateral slip.
    Constant { a_l: f64, a_r: f64 },
    /// Built-in stepwise profile (left wheel slips on [15, 50), right on [30, 65)).
    Training,
    /// Built-in smooth profile with a lateral pulse scaled by `sigma_scale`.
    Validation {
        #[serde(default = "default_sigma_scale")]
        sigma_scale: f64,
    },
    /// CSV table `t,a_l,a_r,sigma`, interpolated linearly. Relative paths
    /// resolve against the config file's directory.
    Table { path: PathBuf },
}

impl SlipSpec {
    pub fn to_profile(&self, base: &Path) -> Result<SlipProfile, CliError> {
        match self {
            SlipSpec::Constant { a_l, a_r } => {
                SlipProfile::constant(*a_l, *a_r).map_err(crate::from_core)
            }
            SlipSpec::Training => Ok(SlipProfile::training()),
            SlipSpec::Validation { sigma_scale } => {
                SlipProfile::validation_scaled(*sigma_scale).map_err(crate::from_core)
            }
            SlipSpec::Table { path } => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let file = File::open(&resolved).map_err(|e| {
                    CliError::Config(format!("cannot open slip table {}: {e}", resolved.display()))
                })?;
                let table = SlipTable::from_csv(file).map_err(crate::from_core)?;
                Ok(SlipProfile::Table(table))
            }
        }
    }
}

fn identity3() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn default_r_weight() -> [[f64; 2]; 2] {
    [[0.05, 0.0], [0.0, 0.05]]
}

fn default_sample_dt() -> f64 {
    0.1
}

/// Config for `slipsim simulate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    pub schema_version: u32,
    pub mode: ControllerMode,
    pub gains: ControllerGains,
    #[serde(default)]
    pub geometry: RobotGeometry,
    pub slip: SlipSpec,
    pub initial_pose: RobotPose,
    pub initial_estimates: SlipEstimates,
    pub t_final: f64,
    pub step: f64,
    /// Start of the settling window used for the ultimate-bound summary.
    /// Defaults to `max(0, t_final - 10)`.
    #[serde(default)]
    pub transient: Option<f64>,
    /// State weight for the tracking cost reported in the summary.
    #[serde(default = "identity3")]
    pub q_weight: [[f64; 3]; 3],
    /// Input weight for the tracking cost reported in the summary.
    #[serde(default = "default_r_weight")]
    pub r_weight: [[f64; 2]; 2],
}

impl SimulateDoc {
    pub fn to_sim_config(&self, base: &Path) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            geometry: self.geometry,
            gains: self.gains,
            mode: self.mode,
            slip: self.slip.to_profile(base)?,
            initial_pose: self.initial_pose,
            initial_estimates: self.initial_estimates,
            t_final: self.t_final,
            step: self.step,
        })
    }
}

/// One gain axis of the tuning grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `n` log-spaced points on `[lo, hi]`.
    Log { lo: f64, hi: f64, n: usize },
    /// Explicit grid points.
    Values { values: Vec<f64> },
}

impl GridSpec {
    pub fn to_values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridSpec::Log { lo, hi, n } => log_grid(*lo, *hi, *n).map_err(crate::from_core),
            GridSpec::Values { values } => Ok(values.clone()),
        }
    }
}

/// The scenario a tuning sweep simulates for every candidate gain triple.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub geometry: RobotGeometry,
    pub slip: SlipSpec,
    pub initial_pose: RobotPose,
    pub initial_estimates: SlipEstimates,
    pub t_final: f64,
    pub step: f64,
}

/// Config for `slipsim tune`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneDoc {
    pub schema_version: u32,
    pub mode: ControllerMode,
    pub k1: GridSpec,
    pub k2: GridSpec,
    pub k3: GridSpec,
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(default = "identity3")]
    pub q_weight: [[f64; 3]; 3],
    #[serde(default = "default_r_weight")]
    pub r_weight: [[f64; 2]; 2],
    pub scenario: ScenarioDoc,
}

impl TuneDoc {
    pub fn to_spec(&self, base: &Path) -> Result<TuningSpec, CliError> {
        let scenario = SimulationConfig {
            geometry: self.scenario.geometry,
            // Placeholder; the sweep overwrites gains per candidate.
            gains: ControllerGains {
                k1: 1.0,
                k2: 1.0,
                k3: 1.0,
                gamma1: self.gamma1,
                gamma2: self.gamma2,
            },
            mode: self.mode,
            slip: self.scenario.slip.to_profile(base)?,
            initial_pose: self.scenario.initial_pose,
            initial_estimates: self.scenario.initial_estimates,
            t_final: self.scenario.t_final,
            step: self.scenario.step,
        };
        Ok(TuningSpec {
            mode: self.mode,
            k1_grid: self.k1.to_values()?,
            k2_grid: self.k2.to_values()?,
            k3_grid: self.k3.to_values()?,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            q_weight: self.q_weight,
            r_weight: self.r_weight,
            scenario,
        })
    }
}

/// Config for `slipsim stability`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityDoc {
    pub schema_version: u32,
    pub gains: ControllerGains,
    #[serde(default)]
    pub geometry: RobotGeometry,
    pub slip: SlipSpec,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// Classification margin: conditions within `margin` of zero count as
    /// marginal rather than stable.
    #[serde(default)]
    pub margin: f64,
}

/// Config for `slipsim compare`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareDoc {
    pub schema_version: u32,
    pub akc_gains: ControllerGains,
    pub nkc_gains: ControllerGains,
    #[serde(default)]
    pub geometry: RobotGeometry,
    pub slip: SlipSpec,
    pub initial_pose: RobotPose,
    pub initial_estimates: SlipEstimates,
    pub t_final: f64,
    pub step: f64,
    /// Start of the window for the RMS position-error comparison.
    #[serde(default)]
    pub rms_start: f64,
    /// Settling-window start for per-controller ultimate bounds.
    /// Defaults to `max(0, t_final - 10)`.
    #[serde(default)]
    pub transient: Option<f64>,
    #[serde(default = "identity3")]
    pub q_weight: [[f64; 3]; 3],
    #[serde(default = "default_r_weight")]
    pub r_weight: [[f64; 2]; 2],
}

impl CompareDoc {
    pub fn to_sim_config(
        &self,
        base: &Path,
        mode: ControllerMode,
        gains: ControllerGains,
    ) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            geometry: self.geometry,
            gains,
            mode,
            slip: self.slip.to_profile(base)?,
            initial_pose: self.initial_pose,
            initial_estimates: self.initial_estimates,
            t_final: self.t_final,
            step: self.step,
        })
    }
}
