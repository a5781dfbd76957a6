use stablenode::dataset::{bundled_dataset, load_demos, write_demos, DATASET_NAMES};
use stablenode::field::CorrectiveParams;
use stablenode::nets::LyapunovMode;
use stablenode::odeint::SolverConfig;
use stablenode::trainer::{evaluate, fit, fit_with, load_model, rollout, save_model, GradientMode, TrainConfig};
use stablenode::{ModelSpec, StableNodeModel};

fn quick(iterations: usize) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.iterations = iterations;
    cfg.batch = 8;
    cfg.window = 10;
    cfg.solver = SolverConfig::dopri5(1e-3, 1e-4);
    cfg.evaluate = false;
    cfg.seed = 5;
    cfg
}

fn small(attractors: Vec<Vec<f64>>, mode: LyapunovMode) -> StableNodeModel {
    let spec = ModelSpec::new(2, &[8], &[8], mode, attractors)
        .unwrap()
        .with_corrective(CorrectiveParams::new(0.1, 1e-5, 20.0).unwrap())
        .unwrap();
    StableNodeModel::new(spec, 2).unwrap()
}

#[test]
fn every_bundled_dataset_survives_a_disk_round_trip() {
    for name in DATASET_NAMES {
        let set = bundled_dataset(name).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_demos(dir.path(), &set).unwrap();
        let back = load_demos(dir.path()).unwrap();
        assert_eq!(back.len(), set.len(), "{name}");
        assert_eq!(back.attractors, set.attractors, "{name}");
        // files come back sorted by name
        let mut want = set.demos.clone();
        want.sort_by(|a, b| a.name.cmp(&b.name));
        assert_eq!(back.demos, want, "{name}");
    }
}

#[test]
fn training_is_deterministic_and_checkpoints_reload() {
    let demos = bundled_dataset("hook").unwrap();
    let (a, ra) = fit(small(vec![vec![0.0, 0.0]], LyapunovMode::Single), &demos, &quick(4)).unwrap();
    let (b, rb) = fit(small(vec![vec![0.0, 0.0]], LyapunovMode::Single), &demos, &quick(4)).unwrap();
    assert_eq!(ra.losses, rb.losses);
    assert_eq!(a.params.flatten(), b.params.flatten());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&a, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.params.flatten(), a.params.flatten());
    let solver = SolverConfig::default();
    assert_eq!(
        rollout(&back, &[0.3, 0.4], &[0.5, 1.0], &solver).unwrap(),
        rollout(&a, &[0.3, 0.4], &[0.5, 1.0], &solver).unwrap()
    );
}

#[test]
fn periodic_checkpoints_are_written() {
    let demos = bundled_dataset("sweep").unwrap();
    let mut cfg = quick(4);
    cfg.checkpoint_every = 2;
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    let (_, report) = fit_with(small(vec![vec![0.0, 0.0]], LyapunovMode::Single), &demos, &cfg, Some(dir.path()), |p| {
        seen.push(p.iteration)
    })
    .unwrap();
    assert_eq!(seen, vec![0, 1, 2, 3]);
    assert_eq!(report.checkpoints.len(), 2);
    for p in &report.checkpoints {
        load_model(p).unwrap();
    }
}

#[test]
fn adjoint_training_tracks_tape_training() {
    let demos = bundled_dataset("hook").unwrap();
    let mut cfg = quick(3);
    cfg.gradient = GradientMode::Adjoint;
    let (_, adj) = fit(small(vec![vec![0.0, 0.0]], LyapunovMode::Single), &demos, &cfg).unwrap();
    cfg.gradient = GradientMode::Tape;
    let (_, tape) = fit(small(vec![vec![0.0, 0.0]], LyapunovMode::Single), &demos, &cfg).unwrap();
    assert_eq!(adj.losses[0], tape.losses[0]);
    for (a, t) in adj.losses.iter().zip(&tape.losses) {
        assert!((a - t).abs() < 1e-2 * t.abs().max(1e-3), "{a} vs {t}");
    }
}

#[test]
fn multi_attractor_evaluation_uses_each_demos_own_attractor() {
    let demos = bundled_dataset("multi").unwrap();
    let model = small(demos.attractors.clone(), LyapunovMode::SigmoidBlend);
    let report = evaluate(&model, &demos, &SolverConfig::dopri5(1e-4, 1e-5)).unwrap();
    assert_eq!(report.demos.len(), 14);
    assert_eq!(report.failures, 0);
    for (d, e) in demos.demos.iter().zip(&report.demos) {
        assert_eq!(d.name, e.name);
        assert!(e.convergence_distance.unwrap().is_finite());
    }
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let demos = bundled_dataset("hook").unwrap();
    let spec = ModelSpec::new(3, &[4], &[4], LyapunovMode::Single, vec![vec![0.0; 3]]).unwrap();
    let model = StableNodeModel::new(spec, 0).unwrap();
    assert!(fit(model, &demos, &quick(1)).is_err());
}
