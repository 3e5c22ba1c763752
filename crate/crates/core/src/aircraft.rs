//! Constant-speed banked-turn (Dubins) kinematics.
//!
//! Positions are meters east (`x`) and north (`y`); heading `psi` is measured
//! counterclockwise from east, so `x' = v cos(psi)`, `y' = v sin(psi)` and
//! `psi' = g tan(phi) / v`. A positive bank angle therefore turns the aircraft
//! counterclockwise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;
/// Nominal airspeed, m/s.
pub const DEFAULT_SPEED: f64 = 20.0;
/// Agent decision period, seconds (10 Hz).
pub const DECISION_PERIOD: f64 = 0.1;
pub const BANK_STEP_DEG: f64 = 5.0;
pub const MAX_BANK_DEG: f64 = 50.0;

const STRAIGHT_TURN_RATE: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    /// Bank angle -5 deg.
    DecreaseBank,
    /// Bank angle +5 deg.
    IncreaseBank,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::DecreaseBank, Action::IncreaseBank];

    pub fn index(self) -> usize {
        match self {
            Action::DecreaseBank => 0,
            Action::IncreaseBank => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::DecreaseBank
        } else {
            Action::IncreaseBank
        }
    }

    pub fn flipped(self) -> Action {
        match self {
            Action::DecreaseBank => Action::IncreaseBank,
            Action::IncreaseBank => Action::DecreaseBank,
        }
    }

    fn sign(self) -> i64 {
        match self {
            Action::DecreaseBank => -1,
            Action::IncreaseBank => 1,
        }
    }
}

/// Pairwise state between an ownship and one other aircraft.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeGeometry {
    pub rho: f64,
    pub theta: f64,
    pub psi_rel: f64,
    pub phi_own: f64,
    pub phi_other: f64,
}

impl AircraftState {
    pub fn new(x: f64, y: f64, psi: f64, phi: f64) -> Self {
        AircraftState {
            x,
            y,
            psi: wrap_angle(psi),
            phi,
        }
    }

    /// Steps the commanded bank by one increment. Commands beyond the
    /// +/-50 deg cap leave the bank unchanged.
    ///
    /// Bank angles on the 5 deg lattice are kept exactly on it, so opposite
    /// actions cancel bit-for-bit.
    pub fn apply_action(&self, action: Action) -> AircraftState {
        let step = BANK_STEP_DEG.to_radians();
        let max = MAX_BANK_DEG.to_radians();
        let k = (self.phi / step).round();
        let on_lattice = (self.phi - k * step).abs() < 1e-9;
        let phi = if on_lattice {
            let next = k as i64 + action.sign();
            let cap = (MAX_BANK_DEG / BANK_STEP_DEG) as i64;
            if next.abs() > cap {
                self.phi
            } else {
                (next as f64 * BANK_STEP_DEG).to_radians()
            }
        } else {
            let next = self.phi + action.sign() as f64 * step;
            if next.abs() > max + 1e-12 {
                self.phi
            } else {
                next
            }
        };
        AircraftState { phi, ..*self }
    }

    pub fn turn_rate(&self, v: f64) -> f64 {
        GRAVITY * self.phi.tan() / v
    }

    /// Advances the state by `dt` seconds at constant bank along the exact arc.
    pub fn integrate(&self, dt: f64, v: f64) -> AircraftState {
        let omega = self.turn_rate(v);
        if omega.abs() < STRAIGHT_TURN_RATE {
            return AircraftState {
                x: self.x + v * dt * self.psi.cos(),
                y: self.y + v * dt * self.psi.sin(),
                ..*self
            };
        }
        let r = v / omega;
        let psi_next = self.psi + omega * dt;
        AircraftState {
            x: self.x + r * (psi_next.sin() - self.psi.sin()),
            y: self.y - r * (psi_next.cos() - self.psi.cos()),
            psi: wrap_angle(psi_next),
            phi: self.phi,
        }
    }

    /// Expresses a world-frame point in this aircraft's body frame as
    /// `(downrange, crossrange)`, crossrange positive to the left.
    pub fn to_body(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        let (s, c) = self.psi.sin_cos();
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Inverse of [`to_body`](Self::to_body).
    pub fn to_world(&self, downrange: f64, crossrange: f64) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        (
            self.x + downrange * c - crossrange * s,
            self.y + downrange * s + crossrange * c,
        )
    }

    pub fn relative_geometry(&self, other: &AircraftState) -> RelativeGeometry {
        let rho = (other.x - self.x).hypot(other.y - self.y);
        let theta = if rho == 0.0 {
            0.0
        } else {
            let (d, c) = self.to_body(other.x, other.y);
            wrap_angle(c.atan2(d))
        };
        RelativeGeometry {
            rho,
            theta,
            psi_rel: wrap_angle(other.psi - self.psi),
            phi_own: self.phi,
            phi_other: other.phi,
        }
    }
}
