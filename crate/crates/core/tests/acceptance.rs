//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Every expected value here comes from an oracle written in this file (hand
//! evaluation, brute-force enumeration, closed-form solutions, central
//! differences) rather than from the code under test.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stablenode::ad::{Graph, ScalarFunction, TapeFunction};
use stablenode::checks::{flatten_grads, ParamFunction};
use stablenode::dataset::{bundled_dataset, bundled_shape, DemoSet, MULTI_ATTRACTORS};
use stablenode::field::{CorrectiveParams, FieldParts};
use stablenode::metrics::{ahd, discrete_frechet, dtw, training_loss, LossMode};
use stablenode::nets::{Activation, CouplingStack, IcnnActivation, IcnnSpec, LyapunovMode, MlpSpec};
use stablenode::odeint::{adjoint_gradients, integrate, FnField, Method, Record, SolverConfig};
use stablenode::trainer::{fit, rollout, TrainConfig};
use stablenode::{Bound, BoundModel, ModelSpec, ParamStore, Result, StableNodeModel, Tensor};

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        summary: summary.into(),
    }
}

fn rows(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Tensor {
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(vec![n, d], data).expect("shape")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// V = ‖x‖²/2 so ∇V = x.
fn quadratic(x: &[f64], f: &[f64]) -> FieldParts {
    FieldParts {
        f: Tensor::row(f.to_vec()),
        v: Tensor::matrix(1, 1, [0.5 * x.iter().map(|v| v * v).sum::<f64>()]).unwrap(),
        grad_v: Tensor::row(x.to_vec()),
    }
}

fn criterion_1() -> Result<Outcome> {
    let hand = [
        (quadratic(&[1.0, 0.0], &[-1.0, 0.0]), CorrectiveParams::new(1.0, 1e-5, 20.0)?, [0.0, 0.0]),
        // ε = 0 is the limit case
        (quadratic(&[1.0, 0.0], &[1.0, 0.0]), CorrectiveParams::new(1.0, 0.0, 1.0)?, [-1.5, 0.0]),
        (quadratic(&[1.0, 0.0], &[-0.4, 0.0]), CorrectiveParams::new(1.0, 1.0, 5.0)?, [0.05, 0.0]),
    ];
    let mut hand_err = 0.0_f64;
    for (parts, c, want) in &hand {
        hand_err = hand_err.max(max_abs_diff(parts.corrective(c)?.data(), want));
    }

    // Paths f(t) = f0 + t·d make L affine in t, so each boundary crossing is
    // found exactly and bracketed by points a hair on either side.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let c = CorrectiveParams::new(0.7, 1e-3, 4.0)?;
    let mut jump = 0.0_f64;
    let mut brackets = 0;
    for _ in 0..100 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let f0 = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let v = 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let slope = x[0] * d[0] + x[1] * d[1];
        let l0 = x[0] * f0[0] + x[1] * f0[1] + c.alpha * v;
        for boundary in [0.0, 1.0 / c.s] {
            let t = (boundary - l0) / slope;
            let h = 1e-12 / slope.abs();
            let at = |t: f64| -> Result<(f64, Vec<f64>)> {
                let f = [f0[0] + t * d[0], f0[1] + t * d[1]];
                let l = x[0] * f[0] + x[1] * f[1] + c.alpha * v;
                Ok((l, quadratic(&x, &f).corrective(&c)?.to_vec()))
            };
            let (la, ua) = at(t - h)?;
            let (lb, ub) = at(t + h)?;
            if (la - boundary).signum() != (lb - boundary).signum() {
                brackets += 1;
            }
            jump = jump.max(max_abs_diff(&ua, &ub));
        }
    }
    let passed = hand_err < 1e-12 && jump < 1e-9 && brackets >= 190;
    Ok(outcome(
        passed,
        format!("hand cases max err {hand_err:.1e} (< 1e-12); max jump {jump:.1e} over {brackets}/200 bracketed crossings (< 1e-9)"),
    ))
}

/// Model families and rollout settings for the descent suite.
const DESCENT_MODELS: u64 = 20;
const DESCENT_STARTS: usize = 100;
const DESCENT_BATCH: usize = 25;
const START_BOX: f64 = 60.0;
const HORIZON: f64 = 1500.0;
const SAMPLES: usize = 300;
const STATIONARY_SPEED: f64 = 1e-4;

fn criterion_2() -> Result<Outcome> {
    let mut cfg = SolverConfig::dopri5(1e-7, 1e-9);
    cfg.max_steps = 200_000;
    let times: Vec<f64> = (1..=SAMPLES).map(|i| HORIZON * i as f64 / SAMPLES as f64).collect();
    let (mut violations, mut checked, mut started_above) = (0usize, 0usize, 0usize);
    let (mut in_level, mut stationary, mut stuck) = (0usize, 0usize, 0usize);
    let mut worst_excess = f64::NEG_INFINITY;
    for seed in 0..DESCENT_MODELS {
        let spec = ModelSpec::new(2, &[16, 16], &[16, 16], LyapunovMode::Single, vec![vec![0.0, 0.0]])?
            .with_corrective(CorrectiveParams::new(1e-3, 1e-5, 20.0)?)?;
        let model = StableNodeModel::new(spec, seed)?;
        let level = model.spec.corrective.level();
        let bm = model.frozen()?;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..DESCENT_STARTS / DESCENT_BATCH {
            let x0 = rows(&mut rng, DESCENT_BATCH, 2, START_BOX);
            let mut prev = bm.detached(|b| Ok(b.lyapunov(&x0)?.to_vec()))?;
            started_above += prev.iter().filter(|&&v| v > level).count();
            let sol = integrate(&bm, &x0, 0.0, &times, &cfg, Record::Off)?;
            for x in &sol.states {
                let v = bm.detached(|b| Ok(b.lyapunov(x)?.to_vec()))?;
                for (p, q) in prev.iter().zip(&v) {
                    if *p > level {
                        checked += 1;
                        // 1e-6 plus a local-error allowance ten times rtol
                        let excess = q - p - 1e-6 - 1e-6 * p.abs();
                        worst_excess = worst_excess.max(excess);
                        if excess > 0.0 {
                            violations += 1;
                        }
                    }
                }
                prev = v;
            }
            let end = sol.states.last().expect("samples");
            let speed = bm.detached(|b| Ok(b.f_hat(end)?.to_vec()))?;
            for (v, f) in prev.iter().zip(speed.chunks(2)) {
                if *v <= level {
                    in_level += 1;
                } else if f[0].hypot(f[1]) < STATIONARY_SPEED {
                    stationary += 1;
                } else {
                    stuck += 1;
                }
            }
        }
    }
    let passed = violations == 0 && stuck == 0 && started_above > 0;
    Ok(outcome(
        passed,
        format!(
            "{} rollouts, {started_above} starting above 1/(sα); {violations} descent violations in {checked} checked samples (worst excess {worst_excess:.1e}); ends: {in_level} in level set, {stationary} stationary, {stuck} neither",
            DESCENT_MODELS as usize * DESCENT_STARTS
        ),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let spec = ModelSpec::new(2, &[16, 16], &[16, 16], LyapunovMode::Single, vec![vec![0.0, 0.0]])?;
    let model = StableNodeModel::new(spec, 3)?;
    let c = model.spec.corrective;
    let bm = model.frozen()?;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst, mut hits, mut drawn) = (0.0_f64, 0usize, 0usize);
    while hits < 1000 && drawn < 200_000 {
        let x = rows(&mut rng, 500, 2, 4.0);
        drawn += 500;
        let (grad_v, f, v, f_hat) = bm.detached(|b| {
            let parts = b.parts(&x)?;
            let (_, _, f_hat) = parts.stabilize(&c)?;
            Ok((parts.grad_v.to_vec(), parts.f.to_vec(), parts.v.to_vec(), f_hat.to_vec()))
        })?;
        for i in 0..500 {
            let g = &grad_v[2 * i..2 * i + 2];
            let f = &f[2 * i..2 * i + 2];
            let v = v[i];
            let l = g[0] * f[0] + g[1] * f[1] + c.alpha * v;
            if l < 1.0 / c.s || hits == 1000 {
                continue;
            }
            hits += 1;
            let fh = &f_hat[2 * i..2 * i + 2];
            let gg = g[0] * g[0] + g[1] * g[1];
            let lhs = g[0] * fh[0] + g[1] * fh[1];
            let rhs = -c.alpha * (1.0 - c.epsilon / (gg + c.epsilon)) * v;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(outcome(
        hits == 1000 && worst < 1e-9,
        format!("{hits} points with L ≥ 1/s (of {drawn} drawn); max |∇V·f̂ − rhs| = {worst:.1e} (< 1e-9)"),
    ))
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

/// Worst relative error between `f.gradient` and central differences of `f.value`.
fn fd_error(f: &impl ScalarFunction, x: &[f64]) -> Result<f64> {
    let analytic = f.gradient(x)?;
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let fp = f.value(&probe)?;
        probe[i] = x[i] - FD_STEP;
        let fm = f.value(&probe)?;
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        // what the difference can resolve given rounding in fp − fm
        let floor = 2.0 * f64::EPSILON * fp.abs().max(fm.abs()) / FD_STEP / FD_TOL;
        let denom = analytic[i].abs().max(numeric.abs()).max(floor).max(1e-10);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

fn check_model(mode: LyapunovMode, maps: bool, seed: u64) -> Result<StableNodeModel> {
    let attractors = match mode {
        LyapunovMode::Single => vec![vec![0.1, -0.2]],
        _ => MULTI_ATTRACTORS.iter().map(|a| a.to_vec()).collect(),
    };
    let mut spec = ModelSpec::new(2, &[6], &[5], mode, attractors)?.with_corrective(CorrectiveParams::new(0.5, 1e-3, 20.0)?)?;
    spec.lyapunov.delta = 0.5;
    if maps {
        spec = spec.with_coupling(2, &[4])?.with_input_mlp(&[4])?;
    }
    StableNodeModel::new(spec, seed)
}

fn bound<'m>(model: &'m StableNodeModel, g: &Graph, p: &Bound) -> Result<BoundModel<'m>> {
    BoundModel::with(&model.spec, g.clone(), p.clone())
}

fn rollout_loss(bm: &BoundModel, y0: &Tensor, times: &[f64], target: &Tensor, cfg: &SolverConfig) -> Result<Tensor> {
    let sol = integrate(bm, &bm.encode(y0)?, 0.0, times, cfg, Record::Tape)?;
    let zs = sol.states.iter().map(|x| bm.decode(x)).collect::<Result<Vec<_>>>()?;
    training_loss(&Tensor::concat(&zs, 0)?, target, 15.0, LossMode::AhdComposite)
}

fn criterion_4() -> Result<Outcome> {
    let mut errors: Vec<(&str, f64)> = Vec::new();
    let seed = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    let mlp = MlpSpec::new("net", vec![2, 5, 5, 2], Activation::Tanh)?;
    let mut store = ParamStore::new();
    mlp.init(&mut store, &mut rng)?;
    let x = rows(&mut rng, 3, 2, 1.0);
    let f = ParamFunction::new(&store, |_, p: &Bound| mlp.forward(p, &x)?.square()?.sum());
    errors.push(("mlp", fd_error(&f, &store.flatten())?));

    let icnn = IcnnSpec::new("g", vec![2, 6, 6, 1], IcnnActivation::Softplus)?;
    let mut store = ParamStore::new();
    icnn.init(&mut store, &mut rng)?;
    let f = ParamFunction::new(&store, |_, p: &Bound| icnn.value(p, &x)?.sum());
    errors.push(("icnn", fd_error(&f, &store.flatten())?));

    for (name, mode) in [
        ("lyapunov single", LyapunovMode::Single),
        ("lyapunov blend", LyapunovMode::SigmoidBlend),
        ("lyapunov product", LyapunovMode::Product),
    ] {
        let model = check_model(mode, false, seed)?;
        let f = ParamFunction::new(&model.params, |g: &Graph, p: &Bound| {
            let parts = bound(&model, g, p)?.parts(&x)?;
            parts.v.sum()?.add(&parts.grad_v.square()?.sum()?)
        });
        errors.push((name, fd_error(&f, &model.params.flatten())?));
    }

    let y = rows(&mut rng, 3, 2, 1.0);
    for (name, mode) in [("corrective field", LyapunovMode::Single), ("corrective field blend", LyapunovMode::SigmoidBlend)] {
        let model = check_model(mode, true, seed)?;
        let f = ParamFunction::new(&model.params, |g: &Graph, p: &Bound| {
            let bm = bound(&model, g, p)?;
            bm.f_hat(&bm.encode(&y)?)?.square()?.sum()
        });
        errors.push((name, fd_error(&f, &model.params.flatten())?));
    }

    let model = check_model(LyapunovMode::Single, true, seed)?;
    let y0 = rows(&mut rng, 1, 2, 1.0);
    let target = rows(&mut rng, 5, 2, 1.0);
    let rk4 = SolverConfig::fixed(Method::Rk4, 0.05);
    let times = [0.1, 0.2, 0.3, 0.4, 0.5];
    let f = ParamFunction::new(&model.params, |g: &Graph, p: &Bound| rollout_loss(&bound(&model, g, p)?, &y0, &times, &target, &rk4));
    errors.push(("rk4 rollout", fd_error(&f, &model.params.flatten())?));

    let a = rows(&mut rng, 5, 2, 1.0);
    let b = rows(&mut rng, 4, 2, 1.0);
    let f = TapeFunction::new([5, 2], |x: &Tensor| training_loss(x, &b, 15.0, LossMode::AhdComposite));
    errors.push(("ahd loss", fd_error(&f, a.data())?));

    // adjoint against tape on the same dopri5 rollout
    let y0 = rows(&mut rng, 2, 2, 1.0);
    let target = rows(&mut rng, 8, 2, 1.0);
    let times = [0.25, 0.5, 0.75, 1.0];
    let tight = SolverConfig::dopri5(1e-9, 1e-9);
    let g = Graph::new();
    let bm = model.bind(&g)?;
    let loss = rollout_loss(&bm, &y0, &times, &target, &tight)?;
    let tape = flatten_grads(&model.params, g.backward(&loss)?.params());
    let adj = adjoint_gradients(
        &model,
        |g, p| bound(&model, g, p)?.encode(&y0),
        0.0,
        &times,
        |g, p, xs| {
            let bm = bound(&model, g, p)?;
            let zs = xs.iter().map(|x| bm.decode(x)).collect::<Result<Vec<_>>>()?;
            training_loss(&Tensor::concat(&zs, 0)?, &target, 15.0, LossMode::AhdComposite)
        },
        &tight,
    )?;
    let adj = flatten_grads(&model.params, &adj.grads);
    let dot: f64 = tape.iter().zip(&adj).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = dot / (norm(&tape) * norm(&adj));

    let (worst_name, worst) = errors.iter().copied().fold(("", 0.0), |acc, e| if e.1 >= acc.1 { e } else { acc });
    Ok(outcome(
        worst < FD_TOL && cosine > 0.999,
        format!(
            "{} gradient checks, worst rel err {worst:.1e} ({worst_name}) (< 1e-4); adjoint/tape cosine {cosine:.6} (> 0.999)",
            errors.len()
        ),
    ))
}

fn decay_error(cfg: &SolverConfig) -> Result<f64> {
    let field = FnField::new(|x: &Tensor| x.neg());
    let sol = integrate(&field, &Tensor::row([1.0]), 0.0, &[1.0], cfg, Record::Off)?;
    Ok((sol.states[0].item()? - (-1.0_f64).exp()).abs())
}

fn criterion_5() -> Result<Outcome> {
    let ratio = decay_error(&SolverConfig::fixed(Method::Rk4, 0.1))? / decay_error(&SolverConfig::fixed(Method::Rk4, 0.05))?;
    let dopri = decay_error(&SolverConfig::dopri5(1e-8, 1e-8))?;
    Ok(outcome(
        (8.0..=32.0).contains(&ratio) && dopri < 1e-6,
        format!("rk4 error ratio {ratio:.2} (in [8, 32]); dopri5 error {dopri:.1e} (< 1e-6)"),
    ))
}

/// Every monotone alignment from (i, j) to the end, each scored by `fold`
/// along the path, best taken by `min`.
fn brute(p: &[Vec<f64>], q: &[Vec<f64>], i: usize, j: usize, fold: fn(f64, f64) -> f64) -> f64 {
    let here = dist(&p[i], &q[j]);
    if i + 1 == p.len() && j + 1 == q.len() {
        return here;
    }
    let mut best = f64::INFINITY;
    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
        if i + di < p.len() && j + dj < q.len() {
            best = best.min(brute(p, q, i + di, j + dj, fold));
        }
    }
    fold(here, best)
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let mut pts = |k: usize| -> Vec<Vec<f64>> { (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect() };
        let (p, q) = (pts(n), pts(m));
        worst = worst.max((dtw(&p, &q)?.raw - brute(&p, &q, 0, 0, |a, b| a + b)).abs());
        worst = worst.max((discrete_frechet(&p, &q)? - brute(&p, &q, 0, 0, f64::max)).abs());
    }
    let h1 = ahd(&Tensor::matrix(1, 1, [0.0])?, &Tensor::matrix(1, 1, [1.0])?)?.item()?;
    let h2 = ahd(&Tensor::matrix(2, 1, [0.0, 1.0])?, &Tensor::matrix(1, 1, [0.0])?)?.item()?;
    Ok(outcome(
        worst < 1e-12 && h1 == 2.0 && h2 == 0.5,
        format!("200 random pairs, max |dp − brute force| {worst:.1e}; ahd hand values {h1}, {h2} (exact 2, 0.5)"),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut stack_err = 0.0_f64;
    for dim in [2, 3, 4] {
        let stack = CouplingStack::new("psi", dim, 3, &[8, 8])?;
        let mut store = ParamStore::new();
        stack.init(&mut store, &mut rng, 1.0)?;
        let p = store.detached();
        let x = rows(&mut rng, 1000, dim, 3.0);
        stack_err = stack_err.max(max_abs_diff(stack.inverse(&p, &stack.forward(&p, &x)?)?.data(), x.data()));
        stack_err = stack_err.max(max_abs_diff(stack.forward(&p, &stack.inverse(&p, &x)?)?.data(), x.data()));
    }
    let mut attractor_err = 0.0_f64;
    let attractors = vec![vec![0.0, 0.0], vec![0.0, -0.2], vec![0.7, 0.4]];
    for seed in 0..5 {
        let spec = ModelSpec::new(2, &[8], &[8], LyapunovMode::Product, attractors.clone())?.with_coupling(3, &[8])?;
        let model = StableNodeModel::new(spec, seed)?;
        let bm = model.frozen()?;
        for (x, z) in bm.latent.iter().zip(&attractors) {
            attractor_err = attractor_err.max(max_abs_diff(bm.decode(x)?.data(), z));
        }
    }
    Ok(outcome(
        stack_err < 1e-9 && attractor_err < 1e-9,
        format!("3-layer stacks round trip {stack_err:.1e} over 3×1000 points; ψ(ψ⁻¹(z*)) error {attractor_err:.1e} (< 1e-9)"),
    ))
}

/// Test-side metrics for the learning criteria.
fn oracle_ahd(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let side = |p: &[Vec<f64>], q: &[Vec<f64>]| p.iter().map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min)).sum::<f64>() / p.len() as f64;
    side(a, b) + side(b, a)
}

fn oracle_dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut c = vec![vec![f64::INFINITY; m + 1]; n + 1];
    c[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            c[i][j] = dist(&a[i - 1], &b[j - 1]) + c[i - 1][j].min(c[i][j - 1]).min(c[i - 1][j - 1]);
        }
    }
    c[n][m]
}

/// Per demo (AHD, DTW) of the rollout from its first point over its own timestamps.
fn demo_scores(model: &StableNodeModel, demos: &DemoSet, solver: &SolverConfig) -> Result<Vec<(f64, f64)>> {
    demos
        .demos
        .iter()
        .map(|d| {
            let t = &d.trajectory;
            let rel: Vec<f64> = t.times.iter().map(|s| s - t.times[0]).collect();
            let mut pts = vec![t.points[0].clone()];
            pts.extend(rollout(model, &t.points[0], &rel[1..], solver)?);
            Ok((oracle_ahd(&pts, &t.points), oracle_dtw(&pts, &t.points)))
        })
        .collect()
}

fn learning_config(iterations: usize, lr: f64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.iterations = iterations;
    cfg.adam.lr = lr;
    cfg.batch = 120;
    cfg.window = 25;
    cfg.solver = SolverConfig::dopri5(1e-4, 1e-5);
    cfg.evaluate = false;
    cfg
}

fn criterion_8() -> Result<Outcome> {
    let cfg = learning_config(150, 5e-3);
    let mut passed = true;
    let mut parts = Vec::new();
    for shape in ["hook", "sweep"] {
        let demos = bundled_shape(shape)?;
        let mut spec = ModelSpec::new(2, &[16, 16], &[16, 16], LyapunovMode::Single, vec![vec![0.0, 0.0]])?
            .with_corrective(CorrectiveParams::new(1e-3, 1e-5, 20.0)?)?;
        spec.lyapunov.delta = 1e-3;
        let model = StableNodeModel::new(spec, 1)?;
        let before = demo_scores(&model, &demos, &cfg.solver)?;
        let (trained, _) = fit(model, &demos, &cfg)?;
        let after = demo_scores(&trained, &demos, &cfg.solver)?;
        let mean = |s: &[(f64, f64)]| s.iter().map(|x| x.0).sum::<f64>() / s.len() as f64;
        let reduction = 1.0 - mean(&after) / mean(&before);
        let dtw_down = before.iter().zip(&after).filter(|(b, a)| a.1 < b.1).count();
        passed &= reduction >= 0.7 && dtw_down == demos.len();
        parts.push(format!(
            "{shape}: mean AHD {:.3} → {:.3} ({:.0}% reduction, ≥ 70%), DTW lower on {dtw_down}/{}",
            mean(&before),
            mean(&after),
            100.0 * reduction,
            demos.len()
        ));
    }
    Ok(outcome(passed, parts.join("; ")))
}

fn criterion_9() -> Result<Outcome> {
    let demos = bundled_dataset("multi")?;
    let attractors: Vec<Vec<f64>> = MULTI_ATTRACTORS.iter().map(|a| a.to_vec()).collect();
    let mut spec = ModelSpec::new(2, &[16, 16], &[16, 16], LyapunovMode::SigmoidBlend, attractors.clone())?
        .with_corrective(CorrectiveParams::new(1.0, 1e-5, 1000.0)?)?;
    spec.lyapunov.gamma = 70.0;
    spec.lyapunov.delta = 1.0;
    let cfg = learning_config(100, 1e-3);
    let (model, _) = fit(StableNodeModel::new(spec, 1)?, &demos, &cfg)?;
    let mut converged = 0;
    let mut worst = 0.0_f64;
    for d in &demos.demos {
        let own = &attractors[d.attractor.expect("annotated")];
        let horizon = 3.0 * d.trajectory.duration();
        let end = rollout(&model, &d.trajectory.points[0], &[horizon], &cfg.solver)?.remove(0);
        let e = dist(&end, own);
        worst = worst.max(e);
        if e < 0.05 {
            converged += 1;
        }
    }
    let fraction = converged as f64 / demos.len() as f64;

    let mut zero = 0.0_f64;
    for seed in 0..5 {
        let spec = ModelSpec::new(2, &[8], &[8], LyapunovMode::Product, attractors.clone())?.with_coupling(2, &[6])?;
        let model = StableNodeModel::new(spec, seed)?;
        let bm = model.frozen()?;
        for x in &bm.latent {
            zero = zero.max(bm.lyapunov(x)?.item()?.abs());
        }
    }
    Ok(outcome(
        fraction >= 0.9 && zero < 1e-12,
        format!(
            "{converged}/{} starts within 0.05 of their own attractor (≥ 90%, worst {worst:.3}); product-form |V(x*)| max {zero:.1e} (< 1e-12)",
            demos.len()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("corrective hand cases and branch continuity", criterion_1),
        ("Lyapunov descent and terminal set", criterion_2),
        ("upper-branch decay identity", criterion_3),
        ("gradient correctness", criterion_4),
        ("solver orders", criterion_5),
        ("metric oracles", criterion_6),
        ("coupling round trip", criterion_7),
        ("learning two shapes", criterion_8),
        ("two-attractor convergence", criterion_9),
    ];
    // `cargo test --test acceptance -- 3 7` runs only the listed criteria
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (passed, summary) = match run() {
            Ok(o) => (o.passed, o.summary),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {summary} [{:.1}s]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
