//! Two handwriting-style planar shapes with seven demonstrations each.
//!
//! Each demo is a cubic Bézier curve ending at the origin, traversed with a
//! minimum-jerk timing law so it starts and stops at rest, like a pen stroke.
//! Control points and durations are jittered per demo from a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Demo, DemoSet, Trajectory};
use crate::error::{Error, Result};

pub const SHAPE_NAMES: [&str; 2] = ["hook", "sweep"];

/// Names accepted by [`bundled_dataset`].
pub const DATASET_NAMES: [&str; 3] = ["hook", "sweep", "multi"];

/// Attractors of the combined two-shape set: hook ends on the first, sweep on the second.
pub const MULTI_ATTRACTORS: [[f64; 2]; 2] = [[0.0, 0.0], [0.0, -0.2]];

const DEMOS: usize = 7;
const SAMPLES: usize = 200;
const JITTER: f64 = 0.08;

/// Control points P0..P2 (P3 is the origin) and nominal duration.
fn template(name: &str) -> Option<([[f64; 2]; 3], f64, u64)> {
    match name {
        // upper half plane, curls over and arrives moving right
        "hook" => Some(([[0.2, 0.9], [-0.9, 0.8], [-0.5, 0.05]], 3.0, 101)),
        // lower half plane, swings under and arrives moving left
        "sweep" => Some(([[-0.7, -0.9], [0.2, -1.0], [0.5, -0.05]], 3.0, 202)),
        _ => None,
    }
}

fn bezier(p: &[[f64; 2]; 4], s: f64) -> Vec<f64> {
    let r = 1.0 - s;
    let w = [r * r * r, 3.0 * r * r * s, 3.0 * r * s * s, s * s * s];
    (0..2).map(|k| (0..4).map(|i| w[i] * p[i][k]).sum()).collect()
}

fn min_jerk(tau: f64) -> f64 {
    tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// The bundled demonstrations of `name` (see [`SHAPE_NAMES`]).
pub fn bundled_shape(name: &str) -> Result<DemoSet> {
    let (base, duration, seed) =
        template(name).ok_or_else(|| Error::config(format!("unknown shape `{name}`, expected one of {SHAPE_NAMES:?}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demos = Vec::with_capacity(DEMOS);
    for k in 0..DEMOS {
        let mut ctrl = [[0.0; 2]; 4];
        for (c, b) in ctrl.iter_mut().zip(&base) {
            for d in 0..2 {
                c[d] = b[d] + rng.random_range(-JITTER..JITTER);
            }
        }
        let t_end = duration * (1.0 + rng.random_range(-0.1..0.1));
        let times: Vec<f64> = (0..SAMPLES).map(|i| t_end * (i as f64 / (SAMPLES - 1) as f64)).collect();
        let points = times.iter().map(|t| bezier(&ctrl, min_jerk(t / t_end))).collect();
        demos.push(Demo {
            name: format!("{name}_{k}"),
            trajectory: Trajectory::new(times, points)?,
            attractor: None,
        });
    }
    DemoSet::new(demos, vec![vec![0.0, 0.0]])
}

/// A bundled shape, or `"multi"`: both shapes translated onto
/// [`MULTI_ATTRACTORS`] and annotated with their attractor.
pub fn bundled_dataset(name: &str) -> Result<DemoSet> {
    if name == "multi" {
        let groups = [bundled_shape("hook")?, bundled_shape("sweep")?];
        let attractors: Vec<Vec<f64>> = MULTI_ATTRACTORS.iter().map(|a| a.to_vec()).collect();
        return super::synth_multimodal(&groups, &attractors);
    }
    bundled_shape(name).map_err(|_| Error::config(format!("unknown dataset `{name}`, expected one of {DATASET_NAMES:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_end_at_origin_and_are_deterministic() {
        for name in SHAPE_NAMES {
            let a = bundled_shape(name).unwrap();
            assert_eq!(a.len(), DEMOS);
            for d in &a.demos {
                assert_eq!(d.trajectory.len(), SAMPLES);
                assert_eq!(d.trajectory.points.last().unwrap(), &vec![0.0, 0.0]);
                assert!(d.trajectory.points.iter().flatten().all(|v| v.abs() <= 1.2));
            }
            assert_eq!(a, bundled_shape(name).unwrap());
        }
        assert!(bundled_shape("spiral").is_err());
    }

    #[test]
    fn multi_ends_on_its_attractors() {
        let m = bundled_dataset("multi").unwrap();
        assert_eq!(m.len(), 2 * DEMOS);
        for d in &m.demos {
            let a = d.attractor.unwrap();
            assert_eq!(d.trajectory.points.last().unwrap(), &MULTI_ATTRACTORS[a].to_vec());
            assert_eq!(a, usize::from(d.name.starts_with("g1_")));
        }
        assert!(bundled_dataset("spiral").is_err());
    }
}
