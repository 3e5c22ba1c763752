//! Scenario configuration.
//!
//! A scenario is a single JSON document. Field names carry their units
//! (`horizon_seconds`, `cell_size_m`, ...). Two presets ship with the crate:
//! [`Scenario::full`] (100x100 grid, 40x30 observation, full network) and
//! [`Scenario::desk`] (20x20 grid, 10x8 observation, reduced network).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aircraft::{AircraftState, DEFAULT_SPEED};
use crate::error::{Error, Result};
use crate::fire_sim::{Cell, PropagationParams, SeedPattern, Wind};
use crate::neuralnet::NetworkSpec;
use crate::receding_horizon::RHConfig;
use crate::rewards::RewardWeights;
use crate::sensing::PolarSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Full,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(format!("unknown profile `{other}` (expected desk or full)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size_m: f64,
    pub fuel_min: f64,
    pub fuel_max: f64,
    pub seed_pattern: SeedPattern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpawnSpec {
    /// Every aircraft starts at one shared position drawn uniformly from the
    /// rectangle, each with its own uniformly drawn heading.
    SharedRandom {
        x_min_m: f64,
        x_max_m: f64,
        y_min_m: f64,
        y_max_m: f64,
    },
    /// Fixed poses, one per aircraft.
    Explicit { poses: Vec<AircraftState> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Observation,
    Belief,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    ObservationNet { weights: PathBuf },
    BeliefNet { weights: PathBuf },
    RecedingHorizon,
    Random,
}

impl ControllerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerSpec::ObservationNet { .. } => "observation-net",
            ControllerSpec::BeliefNet { .. } => "belief-net",
            ControllerSpec::RecedingHorizon => "receding-horizon",
            ControllerSpec::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkLayout {
    Full,
    Reduced,
}

/// Scaling of the continuous network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputEncoding {
    /// Range is fed to the network as `rho / rho_scale_m`.
    pub rho_scale_m: f64,
    /// Range reported when an aircraft has no peers.
    pub lone_range_m: f64,
}

impl Default for InputEncoding {
    fn default() -> Self {
        InputEncoding {
            rho_scale_m: 500.0,
            lone_range_m: 2000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: GridSpec,
    #[serde(default)]
    pub propagation: PropagationParams,
    #[serde(default)]
    pub wind: Wind,
    pub aircraft_count: usize,
    pub spawn: SpawnSpec,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
    #[serde(default = "default_pre_growth")]
    pub pre_growth_seconds: f64,
    #[serde(default = "default_horizon")]
    pub horizon_seconds: f64,
    #[serde(default)]
    pub observation: PolarSpec,
    #[serde(default)]
    pub rewards: RewardWeights,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub receding_horizon: RHConfig,
    pub network: NetworkLayout,
    #[serde(default)]
    pub encoding: InputEncoding,
    /// Belief/fire snapshots are kept every this many agent steps (0 = only
    /// the initial and final snapshots).
    #[serde(default)]
    pub snapshot_interval_steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED
}

fn default_pre_growth() -> f64 {
    30.0
}

fn default_horizon() -> f64 {
    100.0
}

impl Scenario {
    pub fn preset(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Full => Self::full(),
        }
    }

    /// 1 km square, 100x100 cells, circular seed at the center.
    pub fn full() -> Self {
        Scenario {
            grid: GridSpec {
                width: 100,
                height: 100,
                cell_size_m: 10.0,
                fuel_min: 15.0,
                fuel_max: 20.0,
                seed_pattern: SeedPattern::Circular {
                    center: Cell::new(50, 50),
                    radius: 3.0,
                },
            },
            propagation: PropagationParams::default(),
            wind: Wind::calm(),
            aircraft_count: 2,
            spawn: SpawnSpec::SharedRandom {
                x_min_m: 0.0,
                x_max_m: 1000.0,
                y_min_m: 0.0,
                y_max_m: 1000.0,
            },
            speed_mps: DEFAULT_SPEED,
            pre_growth_seconds: 30.0,
            horizon_seconds: 100.0,
            observation: PolarSpec::default(),
            rewards: RewardWeights::default(),
            controller: ControllerSpec::Random,
            receding_horizon: RHConfig::default(),
            network: NetworkLayout::Full,
            encoding: InputEncoding::default(),
            snapshot_interval_steps: 250,
            seed: 0,
        }
    }

    /// 500 m square of 20x20 coarse cells. The aircraft spawn together just
    /// off the south-west corner and must find the fire.
    pub fn desk() -> Self {
        Scenario {
            grid: GridSpec {
                width: 20,
                height: 20,
                cell_size_m: 25.0,
                fuel_min: 15.0,
                fuel_max: 20.0,
                seed_pattern: SeedPattern::Circular {
                    center: Cell::new(10, 10),
                    radius: 2.0,
                },
            },
            spawn: SpawnSpec::SharedRandom {
                x_min_m: -200.0,
                x_max_m: 0.0,
                y_min_m: -200.0,
                y_max_m: 0.0,
            },
            observation: PolarSpec {
                range_bins: 10,
                angle_bins: 8,
                ..PolarSpec::default()
            },
            receding_horizon: RHConfig {
                horizon: 30,
                execute: 10,
                restarts: 4,
            },
            network: NetworkLayout::Reduced,
            snapshot_interval_steps: 100,
            ..Self::full()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s = Self::from_json(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Agent steps per episode at 10 Hz.
    pub fn horizon_steps(&self) -> usize {
        (self.horizon_seconds / crate::aircraft::DECISION_PERIOD).round() as usize
    }

    /// Agent steps per fire step.
    pub fn agent_steps_per_fire_step(&self) -> usize {
        ((self.propagation.step_duration / crate::aircraft::DECISION_PERIOD).round() as usize).max(1)
    }

    pub fn image_shape(&self, approach: Approach) -> [usize; 3] {
        match approach {
            Approach::Observation => [self.observation.range_bins, self.observation.angle_bins, 1],
            Approach::Belief => [self.grid.height, self.grid.width, 2],
        }
    }

    pub fn network_spec(&self, approach: Approach) -> NetworkSpec {
        let shape = self.image_shape(approach);
        match self.network {
            NetworkLayout::Full => NetworkSpec::full(shape),
            NetworkLayout::Reduced => NetworkSpec::reduced(shape),
        }
    }

    /// Checks every invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.width == 0 || g.height == 0 {
            return Err(Error::config("grid.width", "grid dimensions must be positive"));
        }
        if !(g.cell_size_m > 0.0) {
            return Err(Error::config("grid.cell_size_m", "must be positive"));
        }
        if !(g.fuel_min >= 0.0 && g.fuel_min <= g.fuel_max) {
            return Err(Error::config("grid.fuel_min", "need 0 <= fuel_min <= fuel_max"));
        }
        let probe = crate::fire_sim::FireGrid::empty(g.width, g.height, g.cell_size_m)?;
        probe
            .seed_cells(&g.seed_pattern)
            .map_err(|e| Error::config("grid.seed_pattern", e.to_string()))?;
        self.propagation
            .validate()
            .map_err(|e| Error::config("propagation", e.to_string()))?;
        if !(self.wind.strength >= 0.0) {
            return Err(Error::config("wind.strength", "must be non-negative"));
        }
        if self.aircraft_count == 0 {
            return Err(Error::config("aircraft_count", "at least one aircraft is required"));
        }
        match &self.spawn {
            SpawnSpec::SharedRandom { x_min_m, x_max_m, y_min_m, y_max_m } => {
                if !(x_min_m <= x_max_m && y_min_m <= y_max_m) {
                    return Err(Error::config("spawn", "empty spawn rectangle"));
                }
            }
            SpawnSpec::Explicit { poses } => {
                if poses.len() != self.aircraft_count {
                    return Err(Error::config(
                        "spawn.poses",
                        format!("{} poses for {} aircraft", poses.len(), self.aircraft_count),
                    ));
                }
            }
        }
        if !(self.speed_mps > 0.0) {
            return Err(Error::config("speed_mps", "must be positive"));
        }
        if !(self.pre_growth_seconds >= 0.0) {
            return Err(Error::config("pre_growth_seconds", "must be non-negative"));
        }
        if !(self.horizon_seconds > 0.0) {
            return Err(Error::config("horizon_seconds", "must be positive"));
        }
        if self.observation.range_bins == 0 || self.observation.angle_bins == 0 {
            return Err(Error::config("observation", "bin counts must be positive"));
        }
        if !(self.observation.max_range > 0.0) || !(self.observation.width_ratio >= 1.0) {
            return Err(Error::config("observation", "bad range geometry"));
        }
        self.rewards
            .validate()
            .map_err(|e| Error::config("rewards", e.to_string()))?;
        self.receding_horizon
            .validate()
            .map_err(|e| Error::config("receding_horizon", e.to_string()))?;
        if !(self.encoding.rho_scale_m > 0.0) {
            return Err(Error::config("encoding.rho_scale_m", "must be positive"));
        }
        match &self.controller {
            ControllerSpec::ObservationNet { weights } | ControllerSpec::BeliefNet { weights } => {
                if !weights.exists() {
                    return Err(Error::config(
                        "controller.weights",
                        format!("weight file {} does not exist", weights.display()),
                    ));
                }
            }
            ControllerSpec::RecedingHorizon | ControllerSpec::Random => {}
        }
        for approach in [Approach::Observation, Approach::Belief] {
            self.network_spec(approach)
                .validate()
                .map_err(|e| Error::config("network", e.to_string()))?;
        }
        Ok(())
    }
}
