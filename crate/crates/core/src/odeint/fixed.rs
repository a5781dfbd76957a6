use super::{lincomb, Evaluator, Method, SolveStats, Solution, SolverConfig, VectorField};
use crate::ad::Tensor;
use crate::error::{Error, Result};

pub(super) fn integrate<F: VectorField>(
    eval: &Evaluator<'_, F>,
    x0: &Tensor,
    t0: f64,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    let mut stats = SolveStats::default();
    let mut states = Vec::with_capacity(times.len());
    let mut x = x0.clone();
    let mut t = t0;
    let mut steps = 0usize;
    for &target in times {
        while t < target {
            // land exactly on the sample time, never leaving a sliver step
            let h = if target - t <= cfg.dt * (1.0 + 1e-9) { target - t } else { cfg.dt };
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::MaxSteps {
                    max_steps: cfg.max_steps,
                    t_start: t0,
                    t_end: *times.last().expect("nonempty"),
                    t,
                });
            }
            x = step(eval, cfg.method, &x, h, &mut stats)?;
            t = if h == target - t { target } else { t + h };
            if !x.all_finite() {
                return Err(Error::NonFinite { t });
            }
            stats.accepted += 1;
        }
        states.push(x.clone());
    }
    Ok(Solution {
        times: times.to_vec(),
        states,
        stats,
    })
}

fn step<F: VectorField>(
    eval: &Evaluator<'_, F>,
    method: Method,
    x: &Tensor,
    h: f64,
    stats: &mut SolveStats,
) -> Result<Tensor> {
    match method {
        Method::Euler => {
            stats.evals += 1;
            let k1 = eval.eval(x)?;
            lincomb(x, h, &[(1.0, &k1)])
        }
        Method::Rk4 => {
            stats.evals += 4;
            let k1 = eval.eval(x)?;
            let k2 = eval.eval(&lincomb(x, h, &[(0.5, &k1)])?)?;
            let k3 = eval.eval(&lincomb(x, h, &[(0.5, &k2)])?)?;
            let k4 = eval.eval(&lincomb(x, h, &[(1.0, &k3)])?)?;
            lincomb(x, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
        }
        Method::Dopri5 => unreachable!("adaptive method routed elsewhere"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{integrate, FnField, Record};
    use super::*;

    #[test]
    fn rk4_decay_matches_closed_form() {
        let f = FnField::new(|x: &Tensor| x.neg());
        let sol = integrate(
            &f,
            &Tensor::row([1.0]),
            0.0,
            &[1.0],
            &SolverConfig::fixed(Method::Rk4, 0.01),
            Record::Off,
        )
        .unwrap();
        assert!((sol.states[0].data()[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(sol.stats.accepted, 100);
    }

    #[test]
    fn rk4_rotation_preserves_norm() {
        let f = FnField::new(|x: &Tensor| {
            let c = x.split(1, &[1, 1])?;
            Tensor::concat(&[c[1].neg()?, c[0].clone()], 1)
        });
        let period = 2.0 * std::f64::consts::PI;
        let sol = integrate(
            &f,
            &Tensor::row([1.0, 0.0]),
            0.0,
            &[period],
            &SolverConfig::fixed(Method::Rk4, 1e-3),
            Record::Off,
        )
        .unwrap();
        let d = sol.states[0].data();
        assert!(((d[0] * d[0] + d[1] * d[1]).sqrt() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn off_grid_sample_times_are_hit_exactly() {
        // ẋ = 1 so x(t) = t exactly
        let f = FnField::new(|x: &Tensor| Ok(Tensor::full(x.shape().to_vec(), 1.0)));
        let times = [0.013, 0.5, 0.777];
        let sol = integrate(
            &f,
            &Tensor::row([0.0]),
            0.0,
            &times,
            &SolverConfig::fixed(Method::Euler, 0.1),
            Record::Off,
        )
        .unwrap();
        for (s, t) in sol.states.iter().zip(times) {
            assert!((s.data()[0] - t).abs() < 1e-14);
        }
    }
}
