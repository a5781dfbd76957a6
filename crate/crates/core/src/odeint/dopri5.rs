//! Dormand–Prince 5(4) with PI step control and the quartic dense output of
//! Hairer, Nørsett & Wanner.

use super::{lincomb, Evaluator, SolveStats, Solution, SolverConfig, VectorField};
use crate::ad::Tensor;
use crate::error::{Error, Result};

// The fields are autonomous, so the node coefficients c_i never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const EXPO_ERR: f64 = 0.7 / 5.0;
const EXPO_PREV: f64 = 0.4 / 5.0;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// RMS of `e / (atol + rtol·max(|a|, |b|))`.
fn error_norm(e: &[f64], a: &[f64], b: &[f64], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = e
        .iter()
        .zip(a.iter().zip(b))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / e.len() as f64).sqrt()
}

/// Classical starting step from the first two derivative estimates.
fn initial_step<F: VectorField>(
    eval: &Evaluator<'_, F>,
    x0: &Tensor,
    f0: &Tensor,
    span: f64,
    cfg: &SolverConfig,
    stats: &mut SolveStats,
) -> Result<f64> {
    let y = x0.data();
    let zero = vec![0.0; y.len()];
    let d0 = error_norm(y, y, &zero, cfg.rtol, cfg.atol);
    let d1 = error_norm(f0.data(), y, &zero, cfg.rtol, cfg.atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let x1 = lincomb(&x0.detach(), h0, &[(1.0, &f0.detach())])?;
    let f1 = eval.eval_plain(&x1)?;
    stats.evals += 1;
    let diff: Vec<f64> = f1.data().iter().zip(f0.data()).map(|(a, b)| a - b).collect();
    let d2 = error_norm(&diff, y, &zero, cfg.rtol, cfg.atol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(1.0 / 5.0)
    };
    let h = (100.0 * h0).min(h1).min(span);
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::NonFinite { t: 0.0 });
    }
    Ok(h)
}

pub(super) fn integrate<F: VectorField>(
    eval: &Evaluator<'_, F>,
    x0: &Tensor,
    t0: f64,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    let t_end = *times.last().expect("nonempty");
    let mut stats = SolveStats::default();
    let mut states = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] == t0 {
        states.push(x0.clone());
        next += 1;
    }
    if next == times.len() {
        return Ok(Solution {
            times: times.to_vec(),
            states,
            stats,
        });
    }

    let mut x = x0.clone();
    let mut t = t0;
    let mut k1 = eval.eval(&x)?;
    stats.evals += 1;
    if !k1.all_finite() {
        return Err(Error::NonFinite { t });
    }
    let mut h = initial_step(eval, &x, &k1, t_end - t0, cfg, &mut stats)?;
    let mut err_prev: f64 = 1e-4;
    let mut attempts = 0usize;

    while next < times.len() {
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(Error::MaxSteps {
                max_steps: cfg.max_steps,
                t_start: t0,
                t_end,
                t,
            });
        }
        let last = t + h >= t_end || (t_end - (t + h)) <= 1e-12 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }

        let mark = eval.mark();
        let k2 = eval.eval(&lincomb(&x, h, &[(A21, &k1)])?)?;
        let k3 = eval.eval(&lincomb(&x, h, &[(A31, &k1), (A32, &k2)])?)?;
        let k4 = eval.eval(&lincomb(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)])?)?;
        let k5 = eval.eval(&lincomb(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)])?)?;
        let k6 = eval.eval(&lincomb(
            &x,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        )?)?;
        let x1 = lincomb(&x, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)])?;
        let k7 = eval.eval(&x1)?;
        stats.evals += 6;

        let n = x.numel();
        let err_vec: Vec<f64> = (0..n)
            .map(|i| {
                h * (E1 * k1.data()[i]
                    + E3 * k3.data()[i]
                    + E4 * k4.data()[i]
                    + E5 * k5.data()[i]
                    + E6 * k6.data()[i]
                    + E7 * k7.data()[i])
            })
            .collect();
        let err = error_norm(&err_vec, x.data(), x1.data(), cfg.rtol, cfg.atol);

        if !err.is_finite() || !x1.all_finite() {
            if let Some((g, m)) = &mark {
                g.truncate(*m);
            }
            stats.rejected += 1;
            h *= FAC_MIN;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::NonFinite { t });
            }
            continue;
        }

        if err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            debug_assert!(err <= 1.0);
            // samples inside (t, t_new]
            let mut dense: Option<[Tensor; 5]> = None;
            while next < times.len() && times[next] <= t_new {
                let ts = times[next];
                if ts == t_new {
                    states.push(x1.clone());
                } else {
                    if dense.is_none() {
                        dense = Some(dense_coeffs(&x, &x1, h, [&k1, &k3, &k4, &k5, &k6, &k7])?);
                    }
                    let r = dense.as_ref().expect("just built");
                    states.push(interpolate(r, (ts - t) / h)?);
                }
                next += 1;
            }
            stats.accepted += 1;
            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-EXPO_ERR) * err_prev.powf(EXPO_PREV)).clamp(FAC_MIN, FAC_MAX)
            };
            err_prev = err.max(1e-4);
            x = x1;
            k1 = k7;
            t = t_new;
            h *= fac;
        } else {
            if let Some((g, m)) = &mark {
                g.truncate(*m);
            }
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-1.0 / 5.0)).clamp(FAC_MIN, 1.0);
        }
    }
    Ok(Solution {
        times: times.to_vec(),
        states,
        stats,
    })
}

fn dense_coeffs(x: &Tensor, x1: &Tensor, h: f64, k: [&Tensor; 6]) -> Result<[Tensor; 5]> {
    let [k1, k3, k4, k5, k6, k7] = k;
    let r1 = x.clone();
    let ydiff = x1.sub(x)?;
    let r3 = k1.scale(h)?.sub(&ydiff)?;
    let r4 = ydiff.sub(&k7.scale(h)?)?.sub(&r3)?;
    let zero = Tensor::zeros(x.shape().to_vec());
    let r5 = lincomb(&zero, h, &[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)])?;
    Ok([r1, ydiff, r3, r4, r5])
}

/// y(θ) = r1 + θ(r2 + (1−θ)(r3 + θ(r4 + (1−θ)r5))).
fn interpolate(r: &[Tensor; 5], theta: f64) -> Result<Tensor> {
    let th1 = 1.0 - theta;
    let inner = r[3].add(&r[4].scale(th1)?)?;
    let inner = r[2].add(&inner.scale(theta)?)?;
    let inner = r[1].add(&inner.scale(th1)?)?;
    r[0].add(&inner.scale(theta)?)
}
