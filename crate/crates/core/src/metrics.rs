//! Trajectory losses and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};

/// Default weight of the initial-point anchor in the composite loss.
pub const DEFAULT_ANCHOR_WEIGHT: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Average Hausdorff distance plus k‖z₀ − z₀ᵈ‖².
    AhdComposite,
    /// Mean squared pointwise error; needs equal lengths.
    Mse,
}

fn check_set(op: &str, t: &Tensor) -> Result<()> {
    if t.shape().len() != 2 || t.shape()[0] == 0 || t.shape()[1] == 0 {
        return Err(Error::shape(op, &[t.shape()]));
    }
    Ok(())
}

/// Average Hausdorff distance between the row sets `a: [Na, d]` and `b: [Nb, d]`:
/// mean nearest-neighbour distance from `a` to `b` plus the same from `b` to `a`.
pub fn ahd(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_set("ahd", a)?;
    check_set("ahd", b)?;
    let d = a.pairwise_dist(b)?;
    let ab = d.min_over_axis(1)?.mean()?;
    let ba = d.min_over_axis(0)?.mean()?;
    ab.add(&ba)
}

pub fn training_loss(rollout: &Tensor, demo: &Tensor, k: f64, mode: LossMode) -> Result<Tensor> {
    check_set("training_loss", rollout)?;
    check_set("training_loss", demo)?;
    match mode {
        LossMode::AhdComposite => {
            let h = ahd(rollout, demo)?;
            if k == 0.0 {
                return Ok(h);
            }
            let anchor = rollout.slice(0, 0, 1)?.sub(&demo.slice(0, 0, 1)?)?.square()?.sum()?;
            h.add(&anchor.scale(k)?)
        }
        LossMode::Mse => {
            if rollout.shape() != demo.shape() {
                return Err(Error::shape("mse", &[rollout.shape(), demo.shape()]));
            }
            rollout.sub(demo)?.square()?.mean()
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_curves<P: AsRef<[f64]>>(op: &str, p: &[P], q: &[P]) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::config(format!("{op}: empty trajectory")));
    }
    let d = p[0].as_ref().len();
    if p.iter().chain(q).any(|x| x.as_ref().len() != d) {
        return Err(Error::config(format!("{op}: points of mixed dimension")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dtw {
    /// Sum of point distances along the optimal alignment.
    pub raw: f64,
    /// `raw` divided by the number of aligned pairs on that path.
    pub normalized: f64,
    pub path_len: usize,
}

/// Dynamic time warping with steps (1,0), (0,1), (1,1) and Euclidean cost.
pub fn dtw<P: AsRef<[f64]>>(p: &[P], q: &[P]) -> Result<Dtw> {
    check_curves("dtw", p, q)?;
    let (n, m) = (p.len(), q.len());
    let mut cost = vec![f64::INFINITY; n * m];
    let mut len = vec![0usize; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = dist(p[i].as_ref(), q[j].as_ref());
            let (best, l) = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                // on equal cost prefer the diagonal, then the shorter path
                let mut cands = Vec::with_capacity(3);
                if i > 0 && j > 0 {
                    cands.push((cost[(i - 1) * m + j - 1], len[(i - 1) * m + j - 1]));
                }
                if i > 0 {
                    cands.push((cost[(i - 1) * m + j], len[(i - 1) * m + j]));
                }
                if j > 0 {
                    cands.push((cost[i * m + j - 1], len[i * m + j - 1]));
                }
                cands
                    .into_iter()
                    .reduce(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
                    .expect("at least one predecessor")
            };
            cost[i * m + j] = best + c;
            len[i * m + j] = l + 1;
        }
    }
    let raw = cost[n * m - 1];
    let path_len = len[n * m - 1];
    Ok(Dtw {
        raw,
        normalized: raw / path_len as f64,
        path_len,
    })
}

/// Discrete Fréchet distance with Euclidean cost.
pub fn discrete_frechet<P: AsRef<[f64]>>(p: &[P], q: &[P]) -> Result<f64> {
    check_curves("discrete_frechet", p, q)?;
    let (n, m) = (p.len(), q.len());
    let mut ca = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = dist(p[i].as_ref(), q[j].as_ref());
            ca[i * m + j] = match (i, j) {
                (0, 0) => d,
                (0, _) => ca[j - 1].max(d),
                (_, 0) => ca[(i - 1) * m].max(d),
                _ => ca[(i - 1) * m + j]
                    .min(ca[(i - 1) * m + j - 1])
                    .min(ca[i * m + j - 1])
                    .max(d),
            };
        }
    }
    Ok(ca[n * m - 1])
}

/// Rows of a `[N, d]` tensor as points.
pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, c) = t.dims2();
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::matrix(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn ahd_hand_values() {
        assert_eq!(ahd(&col(&[0.0]), &col(&[1.0])).unwrap().item().unwrap(), 2.0);
        assert_eq!(ahd(&col(&[0.0, 1.0]), &col(&[0.0])).unwrap().item().unwrap(), 0.5);
        let a = Tensor::matrix(3, 2, [0.0, 1.0, 2.0, 3.0, -1.0, 0.5]).unwrap();
        assert_eq!(ahd(&a, &a).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn ahd_rejects_empty() {
        assert!(ahd(&Tensor::zeros([0, 2]), &Tensor::row([1.0, 1.0])).is_err());
    }

    #[test]
    fn composite_loss_hand_value() {
        let l = training_loss(&col(&[0.0, 1.0]), &col(&[0.0]), 15.0, LossMode::AhdComposite).unwrap();
        assert_eq!(l.item().unwrap(), 0.5);
        let l = training_loss(&col(&[1.0, 1.0]), &col(&[0.0]), 15.0, LossMode::AhdComposite).unwrap();
        assert_eq!(l.item().unwrap(), 2.0 + 15.0);
    }

    #[test]
    fn mse_mode() {
        let l = training_loss(&col(&[1.0, 2.0]), &col(&[0.0, 0.0]), 15.0, LossMode::Mse).unwrap();
        assert_eq!(l.item().unwrap(), 2.5);
        assert!(training_loss(&col(&[1.0, 2.0]), &col(&[0.0]), 0.0, LossMode::Mse).is_err());
    }

    #[test]
    fn dtw_hand_values() {
        let p = [[0.0], [0.0]];
        let q = [[1.0]];
        let r = dtw(&p[..], &q[..]).unwrap();
        assert_eq!(r.raw, 2.0);
        assert_eq!(r.path_len, 2);
        assert_eq!(r.normalized, 1.0);
        assert_eq!(dtw(&p[..], &p[..]).unwrap().raw, 0.0);
    }

    #[test]
    fn frechet_hand_values() {
        assert_eq!(discrete_frechet(&[[0.0], [2.0]][..], &[[1.0]][..]).unwrap(), 1.0);
        assert_eq!(discrete_frechet(&[[0.0, 0.0]][..], &[[3.0, 4.0]][..]).unwrap(), 5.0);
    }

    #[test]
    fn empty_curves_rejected() {
        let empty: [[f64; 1]; 0] = [];
        assert!(dtw(&empty[..], &[[1.0]][..]).is_err());
        assert!(discrete_frechet(&[[1.0]][..], &empty[..]).is_err());
    }
}
