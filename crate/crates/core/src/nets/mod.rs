//! Network building blocks.

pub mod coupling;
pub mod icnn;
pub mod lyapunov;
pub mod mlp;

pub use coupling::{CouplingLayer, CouplingStack};
pub use icnn::{IcnnActivation, IcnnSpec};
pub use lyapunov::{LyapunovMode, LyapunovSpec};
pub use mlp::{Activation, MlpSpec};
