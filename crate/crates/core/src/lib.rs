//! Decentralized fixed-wing wildfire surveillance.
//!
//! The crate is organized bottom-up:
//!
//! - [`fire_sim`]: stochastic cellular fire propagation with wind bias.
//! - [`aircraft`]: constant-speed banked-turn kinematics and pairwise geometry.
//! - [`sensing`]: polar observation images and the shared belief map.
//! - [`rewards`]: observation penalties and the belief discovery reward.
//! - [`neuralnet`]: the dual-branch Q-network, backpropagation and AdaMax.
//! - [`dqn`]: replay, exploration, target bootstrapping and the training loop.
//! - [`receding_horizon`]: coordinate-descent trajectory baseline.
//! - [`scenario`], [`env`], [`harness`]: configuration, the multi-aircraft
//!   world, episode/suite orchestration and file export.

pub mod aircraft;
pub mod dqn;
pub mod env;
pub mod error;
pub mod fire_sim;
pub mod harness;
pub mod neuralnet;
pub mod pgm;
pub mod receding_horizon;
pub mod rewards;
pub mod rng;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
