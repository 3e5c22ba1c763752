//! Receding-horizon baseline.
//!
//! Each aircraft plans a `horizon`-step bank-command sequence against a frozen
//! copy of the true fire map, scoring it with the observation penalties, and
//! flies the first `execute` steps before planning again. Plans are found by
//! coordinate descent over single-action flips with random restarts.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aircraft::{Action, AircraftState, DECISION_PERIOD};
use crate::error::{Error, Result};
use crate::fire_sim::FireGrid;
use crate::rewards::{ObservationPenalties, RewardWeights};
use crate::rng::{rng_for, SimRng};
use crate::sensing::PolarSensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RHConfig {
    /// Planned steps per optimization.
    pub horizon: usize,
    /// Steps flown before re-planning.
    pub execute: usize,
    pub restarts: usize,
}

impl Default for RHConfig {
    fn default() -> Self {
        RHConfig {
            horizon: 50,
            execute: 10,
            restarts: 10,
        }
    }
}

impl RHConfig {
    pub fn validate(&self) -> Result<()> {
        if self.execute == 0 || self.execute >= self.horizon {
            return Err(Error::arg(format!(
                "need 0 < execute < horizon, got execute={} horizon={}",
                self.execute, self.horizon
            )));
        }
        if self.restarts == 0 {
            return Err(Error::arg("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Everything a plan is scored against. Peers are held fixed.
#[derive(Clone, Copy, Debug)]
pub struct PlanContext<'a> {
    pub grid: &'a FireGrid,
    pub sensor: &'a PolarSensor,
    pub peers: &'a [AircraftState],
    pub weights: &'a RewardWeights,
    pub speed: f64,
}

impl PlanContext<'_> {
    fn advance(&self, s: &AircraftState, a: Action) -> AircraftState {
        s.apply_action(a).integrate(DECISION_PERIOD, self.speed)
    }

    fn reward_at(&self, s: &AircraftState) -> f64 {
        let obs = self.sensor.render(self.grid, s);
        let ranges = self.peers.iter().map(|p| (p.x - s.x).hypot(p.y - s.y));
        ObservationPenalties::evaluate(&obs, self.sensor.bins(), s.phi, ranges, self.weights).total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub score: f64,
}

/// Sum of per-step observation rewards along `actions` from `start`.
pub fn rollout_score(ctx: &PlanContext<'_>, start: &AircraftState, actions: &[Action]) -> f64 {
    let mut s = *start;
    let mut total = 0.0;
    for &a in actions {
        s = ctx.advance(&s, a);
        total += ctx.reward_at(&s);
    }
    total
}

/// Coordinate descent from `initial`: sweeps positions in order, keeping any
/// flip that strictly raises the score, until a sweep changes nothing.
///
/// Scores are accumulated in the same order as [`rollout_score`], so the
/// returned score equals `rollout_score` of the returned actions exactly.
pub fn local_search(ctx: &PlanContext<'_>, start: &AircraftState, initial: Vec<Action>) -> Plan {
    let n = initial.len();
    let mut actions = initial;
    // states[k] is the pose after k actions; prefix[k] the score of those k steps.
    let mut states = Vec::with_capacity(n + 1);
    let mut prefix = Vec::with_capacity(n + 1);
    states.push(*start);
    prefix.push(0.0);
    for k in 0..n {
        let s = ctx.advance(&states[k], actions[k]);
        prefix.push(prefix[k] + ctx.reward_at(&s));
        states.push(s);
    }
    let mut suffix_states = Vec::with_capacity(n + 1);
    let mut suffix_prefix = Vec::with_capacity(n + 1);
    loop {
        let mut improved = false;
        for k in 0..n {
            let current = prefix[n];
            suffix_states.clear();
            suffix_prefix.clear();
            let mut s = states[k];
            let mut acc = prefix[k];
            for (m, &a) in actions.iter().enumerate().skip(k) {
                let a = if m == k { a.flipped() } else { a };
                s = ctx.advance(&s, a);
                acc += ctx.reward_at(&s);
                suffix_states.push(s);
                suffix_prefix.push(acc);
            }
            if acc > current {
                actions[k] = actions[k].flipped();
                states.truncate(k + 1);
                prefix.truncate(k + 1);
                states.extend_from_slice(&suffix_states);
                prefix.extend_from_slice(&suffix_prefix);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Plan {
        actions,
        score: prefix[n],
    }
}

/// Best local optimum over `cfg.restarts` uniformly random initial sequences.
///
/// One seed is drawn from `rng`; restart `r` uses its own stream derived from
/// that seed, so adding restarts never changes the earlier ones. Ties keep the
/// lowest restart index.
pub fn optimize_trajectory(
    ctx: &PlanContext<'_>,
    start: &AircraftState,
    horizon: usize,
    restarts: usize,
    rng: &mut SimRng,
) -> Plan {
    let base: u64 = rng.random();
    let mut best: Option<Plan> = None;
    for r in 0..restarts.max(1) {
        let mut rr = rng_for(base, r as u64);
        let init: Vec<Action> = (0..horizon).map(|_| Action::from_index(rr.random_range(0..2))).collect();
        let plan = local_search(ctx, start, init);
        if best.as_ref().is_none_or(|b| plan.score > b.score) {
            best = Some(plan);
        }
    }
    best.expect("at least one restart")
}

/// Per-aircraft buffers of planned actions.
#[derive(Clone, Debug)]
pub struct RecedingHorizonController {
    cfg: RHConfig,
    weights: RewardWeights,
    speed: f64,
    buffers: Vec<VecDeque<Action>>,
    plans_made: usize,
}

impl RecedingHorizonController {
    pub fn new(cfg: RHConfig, weights: RewardWeights, speed: f64, aircraft: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(RecedingHorizonController {
            cfg,
            weights,
            speed,
            buffers: vec![VecDeque::new(); aircraft],
            plans_made: 0,
        })
    }

    /// Number of optimizer calls so far, over all aircraft.
    pub fn plans_made(&self) -> usize {
        self.plans_made
    }

    /// Next action for aircraft `i`. When its buffer is empty a new plan is
    /// made against the current grid with every other aircraft frozen, and the
    /// first `execute` actions of that plan are buffered.
    pub fn rh_step(
        &mut self,
        i: usize,
        grid: &FireGrid,
        sensor: &PolarSensor,
        aircraft: &[AircraftState],
        rng: &mut SimRng,
    ) -> Action {
        if self.buffers[i].is_empty() {
            let peers: Vec<AircraftState> = aircraft
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, a)| *a)
                .collect();
            let ctx = PlanContext {
                grid,
                sensor,
                peers: &peers,
                weights: &self.weights,
                speed: self.speed,
            };
            let plan = optimize_trajectory(&ctx, &aircraft[i], self.cfg.horizon, self.cfg.restarts, rng);
            self.plans_made += 1;
            self.buffers[i].extend(plan.actions.into_iter().take(self.cfg.execute));
        }
        self.buffers[i].pop_front().expect("buffer refilled")
    }
}
