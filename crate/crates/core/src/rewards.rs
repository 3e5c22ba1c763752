//! Reward models for the two control approaches.

use serde::{Deserialize, Serialize};

use crate::aircraft::RelativeGeometry;
use crate::error::{Error, Result};
use crate::sensing::{PolarObservation, RangeBins};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    /// Distance-to-fire-front weight.
    pub lambda1: f64,
    /// Non-burning-nearby weight.
    pub lambda2: f64,
    /// Bank-angle weight.
    pub lambda3: f64,
    /// Observation-approach proximity weight.
    pub lambda4: f64,
    /// Radius of the non-burning penalty disk, meters.
    pub r0: f64,
    /// Proximity length scale, meters.
    pub c: f64,
    /// Belief-approach proximity weight.
    pub lambda_prox_belief: f64,
    /// Reward per newly discovered burning cell.
    pub discovery_reward: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            lambda1: 0.02,
            lambda2: 0.02,
            lambda3: 0.5,
            lambda4: 2.0,
            r0: 60.0,
            c: 100.0,
            lambda_prox_belief: 0.1,
            discovery_reward: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda_prox_belief];
        if w.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::arg("reward weights must be non-negative"));
        }
        if !(self.r0 > 0.0) || !(self.c > 0.0) {
            return Err(Error::arg("r0 and c must be positive"));
        }
        if !(self.discovery_reward >= 0.0) {
            return Err(Error::arg("discovery_reward must be non-negative"));
        }
        Ok(())
    }

    /// `exp(-rho / c)`, the shared proximity kernel.
    pub fn proximity(&self, rho: f64) -> f64 {
        (-rho / self.c).exp()
    }
}

/// The four observation-approach penalty terms; each is non-positive.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObservationPenalties {
    pub fire_distance: f64,
    pub unburnt_nearby: f64,
    pub bank: f64,
    pub proximity: f64,
}

impl ObservationPenalties {
    pub fn total(&self) -> f64 {
        self.fire_distance + self.unburnt_nearby + self.bank + self.proximity
    }

    /// Penalties for an ownship with bank `phi_own` and the given peer ranges.
    /// The proximity term sums over peers.
    pub fn evaluate(
        obs: &PolarObservation,
        bins: &RangeBins,
        phi_own: f64,
        peer_ranges: impl IntoIterator<Item = f64>,
        w: &RewardWeights,
    ) -> Self {
        let (nr, na) = obs.shape();
        let mut nearest: Option<f64> = None;
        let mut unburnt = 0usize;
        for i in 0..nr {
            let r = bins.center(i);
            for j in 0..na {
                if obs.get(i, j) {
                    nearest = Some(nearest.map_or(r, |n: f64| n.min(r)));
                } else if r < w.r0 {
                    unburnt += 1;
                }
            }
        }
        let proximity: f64 = peer_ranges.into_iter().map(|rho| w.proximity(rho)).sum();
        ObservationPenalties {
            fire_distance: -w.lambda1 * nearest.unwrap_or_else(|| bins.max_range()),
            unburnt_nearby: -w.lambda2 * unburnt as f64,
            bank: -w.lambda3 * phi_own * phi_own,
            proximity: -w.lambda4 * proximity,
        }
    }
}

/// Sum of the four observation penalties for one ownship/peer pair.
pub fn observation_reward(
    obs: &PolarObservation,
    bins: &RangeBins,
    geom: &RelativeGeometry,
    w: &RewardWeights,
) -> f64 {
    ObservationPenalties::evaluate(obs, bins, geom.phi_own, [geom.rho], w).total()
}

/// Team discovery reward minus a proximity penalty toward each other aircraft.
pub fn belief_reward(discovered: usize, geoms: &[RelativeGeometry], w: &RewardWeights) -> f64 {
    let prox: f64 = geoms.iter().map(|g| w.proximity(g.rho)).sum();
    discovery_term(discovered, w) - w.lambda_prox_belief * prox
}

/// The part of [`belief_reward`] shared by every aircraft in the team.
pub fn discovery_term(discovered: usize, w: &RewardWeights) -> f64 {
    w.discovery_reward * discovered as f64
}
