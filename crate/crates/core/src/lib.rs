//! Learning Lyapunov-stable dynamical systems from demonstrations with
//! neural ODEs.

pub mod ad;
pub mod checks;
pub mod dataset;
pub mod error;
pub mod field;
pub mod metrics;
pub mod model;
pub mod nets;
pub mod odeint;
pub mod params;
pub mod trainer;

pub use ad::{Graph, Tensor};
pub use error::{Error, Result};
pub use params::{Bound, ParamStore};
pub use field::{CorrectiveParams, FieldParts};
pub use model::{BoundModel, InputMap, ModelSpec, OutputMap, StableNodeModel};
