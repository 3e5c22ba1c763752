//! The multi-aircraft surveillance world.
//!
//! One agent step lasts 0.1 s. Each step every aircraft applies its bank
//! command and flies, then the shared belief map is refreshed from the true
//! fire. The fire itself advances in a single burst once every
//! [`Scenario::agent_steps_per_fire_step`] agent steps.

use rand::Rng;

use crate::aircraft::{Action, AircraftState, RelativeGeometry, DECISION_PERIOD};
use crate::error::{Error, Result};
use crate::fire_sim::{FireGrid, SpreadKernel};
use crate::neuralnet::{Tensor, CONTINUOUS_INPUTS};
use crate::rewards::{belief_reward, discovery_term, observation_reward};
use crate::rng::{rng_for, stream, SimRng};
use crate::scenario::{Approach, Scenario, SpawnSpec};
use crate::sensing::{BeliefMap, PolarObservation, PolarSensor};

/// Network input for one ownship: a single image shared by every pairing plus
/// one continuous vector per peer.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentInput {
    pub image: Tensor<f32>,
    pub pairs: Vec<[f32; CONTINUOUS_INPUTS]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// Cells that flipped to believed-burning during this step's belief update.
    pub discovered: usize,
    /// Team discovery reward for this step.
    pub score: f64,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct World {
    scenario: Scenario,
    kernel: SpreadKernel,
    sensor: PolarSensor,
    grid: FireGrid,
    belief: BeliefMap,
    aircraft: Vec<AircraftState>,
    fire_rng: SimRng,
    step: usize,
    horizon: usize,
    steps_per_fire: usize,
}

/// Draws the spawn poses for one episode.
pub fn spawn_poses(scenario: &Scenario, rng: &mut SimRng) -> Vec<AircraftState> {
    match &scenario.spawn {
        SpawnSpec::SharedRandom { x_min_m, x_max_m, y_min_m, y_max_m } => {
            let x = if x_min_m < x_max_m { rng.random_range(*x_min_m..*x_max_m) } else { *x_min_m };
            let y = if y_min_m < y_max_m { rng.random_range(*y_min_m..*y_max_m) } else { *y_min_m };
            (0..scenario.aircraft_count)
                .map(|_| {
                    let psi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    AircraftState::new(x, y, psi, 0.0)
                })
                .collect()
        }
        SpawnSpec::Explicit { poses } => poses.clone(),
    }
}

impl World {
    /// Builds the episode for `seed`: random fuel, the seed pattern, the
    /// pre-growth period and the spawn poses. The belief starts from the fire
    /// as it was seeded and then receives one unrewarded update at spawn.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<World> {
        scenario.validate()?;
        Self::new_unchecked(scenario, seed)
    }

    /// Like [`World::new`] but skips scenario validation (which checks that
    /// weight files exist); used when many episodes share one scenario.
    pub fn new_unchecked(scenario: &Scenario, seed: u64) -> Result<World> {
        let g = &scenario.grid;
        let mut fire_rng = rng_for(seed, stream::FIRE);
        let mut grid = FireGrid::new(g.width, g.height, g.cell_size_m, g.fuel_min, g.fuel_max, &mut fire_rng)?;
        grid.apply_seed(&g.seed_pattern)?;
        let mut belief = BeliefMap::from_grid(&grid);
        let grid = grid.pre_grow(scenario.pre_growth_seconds, &scenario.propagation, &scenario.wind, &mut fire_rng)?;
        let aircraft = spawn_poses(scenario, &mut rng_for(seed, stream::SPAWN));
        belief.update(&grid, &aircraft)?;
        Ok(World {
            kernel: SpreadKernel::new(&scenario.propagation, &scenario.wind),
            sensor: PolarSensor::new(&scenario.observation)?,
            grid,
            belief,
            aircraft,
            fire_rng,
            step: 0,
            horizon: scenario.horizon_steps(),
            steps_per_fire: scenario.agent_steps_per_fire_step(),
            scenario: scenario.clone(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn grid(&self) -> &FireGrid {
        &self.grid
    }

    pub fn belief(&self) -> &BeliefMap {
        &self.belief
    }

    pub fn sensor(&self) -> &PolarSensor {
        &self.sensor
    }

    pub fn aircraft(&self) -> &[AircraftState] {
        &self.aircraft
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.horizon
    }

    /// Advances one agent step with one action per aircraft.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if actions.len() != self.aircraft.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.aircraft.len()],
                actual: vec![actions.len()],
            });
        }
        if self.is_done() {
            return Err(Error::Precondition("episode already finished".into()));
        }
        let v = self.scenario.speed_mps;
        for (a, &act) in self.aircraft.iter_mut().zip(actions) {
            *a = a.apply_action(act).integrate(DECISION_PERIOD, v);
        }
        let discovered = self.belief.update(&self.grid, &self.aircraft)?;
        self.step += 1;
        if self.step % self.steps_per_fire == 0 {
            self.grid = self
                .grid
                .step_with(&self.kernel, self.scenario.propagation.beta, &mut self.fire_rng);
        }
        Ok(StepOutcome {
            discovered,
            score: discovery_term(discovered, &self.scenario.rewards),
            done: self.is_done(),
        })
    }

    pub fn observe(&self, i: usize) -> PolarObservation {
        self.sensor.render(&self.grid, &self.aircraft[i])
    }

    /// Geometry from aircraft `i` to each other aircraft, in index order.
    pub fn peer_geometries(&self, i: usize) -> Vec<RelativeGeometry> {
        let own = &self.aircraft[i];
        self.aircraft
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, other)| own.relative_geometry(other))
            .collect()
    }

    /// The pairings used for network inputs. An aircraft without peers is
    /// paired with a stand-in peer at `encoding.lone_range_m`.
    fn pairings(&self, i: usize) -> Vec<RelativeGeometry> {
        let g = self.peer_geometries(i);
        if g.is_empty() {
            vec![RelativeGeometry {
                rho: self.scenario.encoding.lone_range_m,
                theta: 0.0,
                psi_rel: 0.0,
                phi_own: self.aircraft[i].phi,
                phi_other: 0.0,
            }]
        } else {
            g
        }
    }

    pub fn encode_pair(&self, g: &RelativeGeometry) -> [f32; CONTINUOUS_INPUTS] {
        [
            g.phi_own as f32,
            (g.rho / self.scenario.encoding.rho_scale_m) as f32,
            g.theta as f32,
            g.psi_rel as f32,
            g.phi_other as f32,
        ]
    }

    pub fn agent_input(&self, i: usize, approach: Approach) -> AgentInput {
        let image = match approach {
            Approach::Observation => self.observe(i).to_tensor(),
            Approach::Belief => self
                .belief
                .ego_image(&self.aircraft[i], self.grid.width(), self.grid.height())
                .into_tensor(),
        };
        let pairs = self.pairings(i).iter().map(|g| self.encode_pair(g)).collect();
        AgentInput { image, pairs }
    }

    /// Training reward of aircraft `i` for each of its pairings, evaluated on
    /// the current state. `discovered` is the count from the step just taken.
    pub fn pair_rewards(&self, i: usize, approach: Approach, discovered: usize) -> Vec<f64> {
        let w = &self.scenario.rewards;
        let peers = self.peer_geometries(i);
        match approach {
            Approach::Observation => {
                let obs = self.observe(i);
                if peers.is_empty() {
                    let lone = RelativeGeometry {
                        rho: f64::INFINITY,
                        theta: 0.0,
                        psi_rel: 0.0,
                        phi_own: self.aircraft[i].phi,
                        phi_other: 0.0,
                    };
                    vec![observation_reward(&obs, self.sensor.bins(), &lone, w)]
                } else {
                    peers
                        .iter()
                        .map(|g| observation_reward(&obs, self.sensor.bins(), g, w))
                        .collect()
                }
            }
            Approach::Belief => {
                if peers.is_empty() {
                    vec![belief_reward(discovered, &[], w)]
                } else {
                    peers
                        .iter()
                        .map(|g| belief_reward(discovered, std::slice::from_ref(g), w))
                        .collect()
                }
            }
        }
    }
}
