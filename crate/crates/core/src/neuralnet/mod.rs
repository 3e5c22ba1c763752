//! A small dense/convolutional network with backpropagation and AdaMax.

mod adamax;
pub mod io;
pub mod layers;
mod network;
mod tensor;

pub use adamax::AdaMax;
pub use network::{Gradients, NetworkSpec, QNetwork, Sample, ACTIONS, CONTINUOUS_INPUTS};
pub use tensor::{Real, Tensor};
