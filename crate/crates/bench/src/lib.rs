//! Fixtures shared by the benchmarks.

use stablenode::dataset::{bundled_shape, DemoSet};
use stablenode::nets::LyapunovMode;
use stablenode::{ModelSpec, StableNodeModel, Tensor};

/// A single-attractor model at the width used for the handwriting shapes.
pub fn shape_model(hidden: usize) -> StableNodeModel {
    let spec = ModelSpec::new(2, &[hidden, hidden], &[hidden, hidden], LyapunovMode::Single, vec![vec![0.0, 0.0]])
        .expect("valid spec");
    StableNodeModel::new(spec, 1).expect("valid model")
}

pub fn hook() -> DemoSet {
    bundled_shape("hook").expect("bundled shape")
}

/// `n` points spread over [-1, 1]².
pub fn grid_points(n: usize) -> Tensor {
    let data: Vec<f64> = (0..2 * n).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
    Tensor::new(vec![n, 2], data).expect("shape")
}
