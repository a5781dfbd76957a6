//! The corrective term and the stabilized field f̂ = f + u.
//!
//! With L(x) = ∇V·f + αV the corrective term is
//!
//! ```text
//! u = 0                                  L ≤ 0
//! u = −(∇V·L + ε·s·L·f) / (‖∇V‖² + ε)     0 < L < 1/s
//! u = −(∇V·L + ε·f) / (‖∇V‖² + ε)         L ≥ 1/s
//! ```
//!
//! All three branches are evaluated as one expression with detached 0/1 masks
//! picked from the same L values that enter the formula.

use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_S: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectiveParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub s: f64,
}

impl Default for CorrectiveParams {
    fn default() -> Self {
        CorrectiveParams {
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            s: DEFAULT_S,
        }
    }
}

impl CorrectiveParams {
    pub fn new(alpha: f64, epsilon: f64, s: f64) -> Result<Self> {
        let c = CorrectiveParams { alpha, epsilon, s };
        c.validate()?;
        Ok(c)
    }

    /// α and s must be positive. ε = 0 is accepted for the unregularized
    /// baseline; the denominator is then floored at the smallest normal float.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::config(format!("s must be positive, got {}", self.s)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Level 1/(sα) below which descent is no longer guaranteed.
    pub fn level(&self) -> f64 {
        1.0 / (self.s * self.alpha)
    }

    fn denom_offset(&self) -> f64 {
        self.epsilon.max(f64::MIN_POSITIVE)
    }
}

/// Everything the corrective term is built from, evaluated at a batch of rows.
#[derive(Debug, Clone)]
pub struct FieldParts {
    /// Nominal velocity, `[B, n]`.
    pub f: Tensor,
    /// Lyapunov value, `[B, 1]`.
    pub v: Tensor,
    /// Lyapunov gradient, `[B, n]`.
    pub grad_v: Tensor,
}

impl FieldParts {
    /// L = ∇V·f + αV, `[B, 1]`.
    pub fn l_value(&self, c: &CorrectiveParams) -> Result<Tensor> {
        self.grad_v.mul(&self.f)?.sum_axis(1)?.add(&self.v.scale(c.alpha)?)
    }

    pub fn corrective(&self, c: &CorrectiveParams) -> Result<Tensor> {
        let l = self.l_value(c)?;
        self.corrective_with(c, &l)
    }

    fn corrective_with(&self, c: &CorrectiveParams, l: &Tensor) -> Result<Tensor> {
        let cutoff = 1.0 / c.s;
        let (b, _) = l.dims2();
        let mut pos = Vec::with_capacity(b);
        let mut mid = Vec::with_capacity(b);
        let mut hi = Vec::with_capacity(b);
        for &v in l.data() {
            pos.push(f64::from(u8::from(v > 0.0)));
            mid.push(f64::from(u8::from(v > 0.0 && v < cutoff)));
            hi.push(f64::from(u8::from(v >= cutoff)));
        }
        let pos = Tensor::new(vec![b, 1], pos)?;
        let mid = Tensor::new(vec![b, 1], mid)?;
        let hi = Tensor::new(vec![b, 1], hi)?;

        // coefficient of ε·f: s·L in the middle branch, 1 in the upper one
        let c_f = mid.mul(&l.scale(c.s)?)?.add(&hi)?;
        let num = self
            .grad_v
            .mul(&pos.mul(l)?)?
            .add(&self.f.mul(&c_f.scale(c.epsilon)?)?)?;
        let den = self.grad_v.row_sq_norm()?.offset(c.denom_offset())?;
        num.div(&den)?.neg()
    }

    /// (L, u, f̂).
    pub fn stabilize(&self, c: &CorrectiveParams) -> Result<(Tensor, Tensor, Tensor)> {
        let l = self.l_value(c)?;
        let u = self.corrective_with(c, &l)?;
        let f_hat = self.f.add(&u)?;
        Ok((l, u, f_hat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // V = ‖x‖²/2 so ∇V = x
    fn quadratic(x: [f64; 2], f: [f64; 2]) -> FieldParts {
        let v = 0.5 * (x[0] * x[0] + x[1] * x[1]);
        FieldParts {
            f: Tensor::row(f),
            v: Tensor::matrix(1, 1, [v]).unwrap(),
            grad_v: Tensor::row(x),
        }
    }

    #[test]
    fn l_value_hand_cases() {
        let c = CorrectiveParams::new(1.0, 1e-5, 20.0).unwrap();
        assert_eq!(quadratic([1.0, 0.0], [1.0, 0.0]).l_value(&c).unwrap().data(), &[1.5]);
        assert_eq!(quadratic([1.0, 0.0], [-1.0, 0.0]).l_value(&c).unwrap().data(), &[-0.5]);
        assert_eq!(quadratic([0.0, 0.0], [0.3, 0.1]).l_value(&c).unwrap().data(), &[0.0]);
    }

    #[test]
    fn negative_l_leaves_field_alone() {
        let c = CorrectiveParams::new(1.0, 1e-5, 20.0).unwrap();
        let parts = quadratic([1.0, 0.0], [-1.0, 0.0]);
        let (_, u, f_hat) = parts.stabilize(&c).unwrap();
        assert!(u.data().iter().all(|&v| v == 0.0));
        assert_eq!(f_hat.data(), parts.f.data());
    }

    #[test]
    fn upper_branch_hand_case() {
        let c = CorrectiveParams::new(1.0, 0.0, 1.0).unwrap();
        let (_, u, f_hat) = quadratic([1.0, 0.0], [1.0, 0.0]).stabilize(&c).unwrap();
        assert_eq!(u.data(), &[-1.5, 0.0]);
        assert_eq!(f_hat.data(), &[-0.5, 0.0]);
    }

    #[test]
    fn middle_branch_hand_case() {
        let c = CorrectiveParams::new(1.0, 1.0, 5.0).unwrap();
        let (l, u, f_hat) = quadratic([1.0, 0.0], [-0.4, 0.0]).stabilize(&c).unwrap();
        assert!((l.data()[0] - 0.1).abs() < 1e-15);
        assert!((u.data()[0] - 0.05).abs() < 1e-15 && u.data()[1] == 0.0);
        assert!((f_hat.data()[0] + 0.35).abs() < 1e-15);
    }

    #[test]
    fn finite_at_critical_point() {
        let c = CorrectiveParams::default();
        let parts = FieldParts {
            f: Tensor::row([1.0, 2.0]),
            v: Tensor::matrix(1, 1, [3.0]).unwrap(),
            grad_v: Tensor::row([0.0, 0.0]),
        };
        let (_, u, _) = parts.stabilize(&c).unwrap();
        assert!(u.all_finite());
        // ∇V = 0 and L = 3α < 1/s: u = −s·L·f
        let k = -20.0 * 3e-3;
        assert!((u.data()[0] - k).abs() < 1e-15 && (u.data()[1] - 2.0 * k).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(CorrectiveParams::new(0.0, 1e-5, 20.0).is_err());
        assert!(CorrectiveParams::new(1e-3, -1.0, 20.0).is_err());
        assert!(CorrectiveParams::new(1e-3, 1e-5, f64::NAN).is_err());
    }
}
