mod config;
mod portrait;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use stablenode::checks::{gradcheck_suite, selftest_suite, SuiteReport};
use stablenode::dataset::{bundled_dataset, load_demos, trajectory_csv, write_demos, DemoSet, Trajectory, DATASET_NAMES};
use stablenode::odeint::{Method, SolverConfig};
use stablenode::trainer::{evaluate, fit_with, load_model, rollout, save_model, write_atomic};
use stablenode::StableNodeModel;

use config::RunConfig;
use portrait::{Bounds, DEFAULT_GRID};

/// Learn Lyapunov-stable dynamical systems from demonstrations.
#[derive(Parser)]
#[command(name = "stablenode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to demonstrations.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Demonstration directory, overriding the config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model path, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a trained model from one initial point and write a CSV.
    Rollout {
        #[arg(long)]
        model: PathBuf,
        /// Output-space initial point, comma separated.
        #[arg(long)]
        x0: String,
        #[arg(long)]
        horizon: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Fixed-step size; switches to a fixed-step method.
        #[arg(long, conflicts_with_all = ["rtol", "atol"])]
        dt: Option<f64>,
        /// Fixed-step method used with --dt.
        #[arg(long, value_enum, default_value = "rk4", requires = "dt")]
        method: FixedMethod,
        /// Output samples for the adaptive solver, including t = 0.
        #[arg(long, default_value_t = 201, conflicts_with = "dt")]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model against demonstrations.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Render the latent phase portrait of a 2-D model as SVG.
    Portrait {
        #[arg(long)]
        model: PathBuf,
        /// xmin,xmax,ymin,ymax in latent coordinates.
        #[arg(long, allow_hyphen_values = true)]
        bounds: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Demonstration directory to overlay.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Finite-difference and adjoint gradient checks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Invariant checks on a small random instance.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a bundled synthetic dataset as CSVs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "hook")]
        shape: String,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
}

impl SolverArgs {
    fn adaptive(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig::dopri5(self.rtol.unwrap_or(d.rtol), self.atol.unwrap_or(d.atol))
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FixedMethod {
    Euler,
    Rk4,
}

/// Exit 1 for anything caught before work starts, 2 after.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

type Outcome = Result<serde_json::Value, Failure>;

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(runtime)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("`{p}` is not a finite number")))
        })
        .collect()
}

/// The output's parent directory must exist so failures surface before work.
fn check_out(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(invalid(format!("{}: directory does not exist", p.display()))),
        _ => Ok(()),
    }
}

fn load(path: &Path) -> Result<StableNodeModel, Failure> {
    load_model(path).map_err(invalid)
}

fn train(config: &Path, data: Option<PathBuf>, out: Option<PathBuf>) -> Outcome {
    let text = fs::read_to_string(config).map_err(|e| invalid(format!("{}: {e}", config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| invalid(format!("{}: {e}", config.display())))?;
    cfg.resolve(config.parent().unwrap_or(Path::new(".")));
    cfg.data = data.or(cfg.data);
    cfg.out = out.or(cfg.out);
    cfg.train.validate().map_err(invalid)?;

    let demos = match (&cfg.data, &cfg.bundled) {
        (Some(dir), _) => load_demos(dir).map_err(invalid)?,
        (None, Some(name)) => bundled_dataset(name).map_err(invalid)?,
        (None, None) => return Err(invalid("config needs `data` or `bundled`")),
    };
    let attractors = match (&cfg.model.attractors, demos.attractors.is_empty()) {
        (Some(a), _) => a.clone(),
        (None, false) => demos.attractors.clone(),
        (None, true) => vec![demos.mean_endpoint()],
    };
    let spec = cfg.model.build(demos.dim, attractors).map_err(invalid)?;
    let model_path = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    let report_path = cfg.report.clone().unwrap_or_else(|| {
        let stem = model_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
        model_path.with_file_name(format!("{stem}.report.json"))
    });
    let mut dirs: Vec<&Path> = [&model_path, &report_path].iter().filter_map(|p| p.parent()).collect();
    dirs.extend(cfg.checkpoint_dir.as_deref());
    for dir in dirs.into_iter().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    }

    let model = StableNodeModel::new(spec, cfg.train.seed).map_err(invalid)?;
    let initial = if cfg.train.evaluate {
        Some(evaluate(&model, &demos, &cfg.train.solver).map_err(runtime)?)
    } else {
        None
    };
    eprintln!("training on {} demos for {} iterations", demos.len(), cfg.train.iterations);
    let every = (cfg.train.iterations / 20).max(1);
    let (model, report) = fit_with(model, &demos, &cfg.train, cfg.checkpoint_dir.as_deref(), |p| {
        if p.iteration % every == 0 || p.iteration + 1 == cfg.train.iterations {
            match p.loss {
                Some(l) => eprintln!("  iter {:>5}  loss {l:.6}", p.iteration),
                None => eprintln!("  iter {:>5}  skipped", p.iteration),
            }
        }
    })
    .map_err(runtime)?;
    save_model(&model, &model_path).map_err(runtime)?;
    let full = json!({
        "model": model_path,
        "demos": demos.len(),
        "initial_evaluation": initial,
        "train": report,
    });
    write_atomic(&report_path, to_json(&full)?.as_bytes()).map_err(runtime)?;
    if let Some(e) = &report.evaluation {
        eprintln!("mean DTW {:.4}  mean AHD {:.4}  failures {}", e.mean_dtw, e.mean_ahd, e.failures);
    }
    Ok(json!({
        "model": model_path,
        "report": report_path,
        "iterations": report.losses.len(),
        "final_loss": report.losses.last(),
        "wall_time_s": report.wall_time_s,
        "initial_mean_ahd": initial.as_ref().map(|e| e.mean_ahd),
        "final_mean_ahd": report.evaluation.as_ref().map(|e| e.mean_ahd),
    }))
}

fn times_grid(horizon: f64, dt: Option<f64>, samples: usize) -> Result<Vec<f64>, Failure> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be positive and finite"));
    }
    match dt {
        Some(dt) => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt must be positive and finite"));
            }
            let n = (horizon / dt).round().max(1.0) as usize;
            Ok((0..=n).map(|k| horizon * k as f64 / n as f64).collect())
        }
        None => {
            if samples < 2 {
                return Err(invalid("samples must be at least 2"));
            }
            Ok((0..samples).map(|k| horizon * k as f64 / (samples - 1) as f64).collect())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn do_rollout(model: &Path, x0: &str, horizon: f64, solver: &SolverArgs, dt: Option<f64>, method: FixedMethod, samples: usize, out: &Path) -> Outcome {
    let y0 = parse_floats(x0)?;
    let times = times_grid(horizon, dt, samples)?;
    let cfg = match dt {
        Some(dt) => SolverConfig::fixed(
            match method {
                FixedMethod::Euler => Method::Euler,
                FixedMethod::Rk4 => Method::Rk4,
            },
            dt,
        ),
        None => solver.adaptive(),
    };
    cfg.validate().map_err(invalid)?;
    check_out(out)?;
    let m = load(model)?;
    if y0.len() != m.spec.n_z {
        return Err(invalid(format!("x0 has {} values but the model is {}-dimensional", y0.len(), m.spec.n_z)));
    }
    let pts = rollout(&m, &y0, &times[1..], &cfg).map_err(runtime)?;
    let points: Vec<Vec<f64>> = std::iter::once(y0).chain(pts).collect();
    let end = points.last().cloned().unwrap_or_default();
    let traj = Trajectory::new(times, points).map_err(runtime)?;
    write_atomic(out, trajectory_csv(&traj).map_err(runtime)?.as_bytes()).map_err(runtime)?;
    eprintln!("wrote {} samples to {}", traj.len(), out.display());
    let attractors = m.spec.attractors();
    let nearest = attractors
        .iter()
        .map(|a| a.iter().zip(&end).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(json!({ "out": out, "samples": traj.len(), "final_point": end, "distance_to_nearest_attractor": nearest }))
}

fn do_eval(model: &Path, data: &Path, out: &Path, solver: &SolverArgs) -> Outcome {
    let cfg = solver.adaptive();
    cfg.validate().map_err(invalid)?;
    check_out(out)?;
    let m = load(model)?;
    let demos = load_demos(data).map_err(invalid)?;
    if demos.dim != m.spec.n_z {
        return Err(invalid(format!("demos are {}-dimensional but the model is {}-dimensional", demos.dim, m.spec.n_z)));
    }
    let report = evaluate(&m, &demos, &cfg).map_err(runtime)?;
    write_atomic(out, to_json(&report)?.as_bytes()).map_err(runtime)?;
    for d in &report.demos {
        match &d.error {
            Some(e) => eprintln!("{:<16} failed: {e}", d.name),
            None => eprintln!(
                "{:<16} dtw {:.4}  frechet {:.4}  ahd {:.4}  conv {:.2e}",
                d.name,
                d.dtw.map_or(f64::NAN, |x| x.raw),
                d.frechet.unwrap_or(f64::NAN),
                d.ahd.unwrap_or(f64::NAN),
                d.convergence_distance.unwrap_or(f64::NAN)
            ),
        }
    }
    Ok(json!({
        "out": out,
        "demos": report.demos.len(),
        "mean_dtw": report.mean_dtw,
        "mean_frechet": report.mean_frechet,
        "mean_ahd": report.mean_ahd,
        "failures": report.failures,
    }))
}

fn latent_paths(m: &StableNodeModel, demos: &DemoSet) -> Result<Vec<Vec<Vec<f64>>>, Failure> {
    let bm = m.frozen().map_err(runtime)?;
    demos
        .demos
        .iter()
        .map(|d| {
            let x = bm.detached(|b| Ok(b.encode(&d.trajectory.to_tensor())?.detach())).map_err(runtime)?;
            Ok(x.to_vec().chunks(m.spec.n_x).map(<[f64]>::to_vec).collect())
        })
        .collect()
}

fn do_portrait(model: &Path, bounds: &str, out: &Path, grid: usize, data: Option<&Path>) -> Outcome {
    let bounds = Bounds::parse(bounds).map_err(invalid)?;
    if !(2..=400).contains(&grid) {
        return Err(invalid("grid must be between 2 and 400"));
    }
    check_out(out)?;
    let m = load(model)?;
    if m.spec.n_x != 2 {
        return Err(invalid(format!("portraits need a 2-D latent space, model has {}", m.spec.n_x)));
    }
    let paths = match data {
        Some(dir) => {
            let demos = load_demos(dir).map_err(invalid)?;
            if demos.dim != m.spec.n_z {
                return Err(invalid("demo dimension does not match the model"));
            }
            latent_paths(&m, &demos)?
        }
        None => Vec::new(),
    };
    let (svg, summary) = portrait::render(&m, bounds, grid, &paths).map_err(runtime)?;
    write_atomic(out, svg.as_bytes()).map_err(runtime)?;
    eprintln!("wrote {}", out.display());
    let mut v = serde_json::to_value(&summary).map_err(runtime)?;
    v["out"] = json!(out);
    Ok(v)
}

fn suite_outcome(report: SuiteReport) -> Outcome {
    for c in &report.checks {
        eprintln!(
            "{} {:<32} {:>12.4e}  ({}){}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.condition,
            c.detail.as_deref().map(|d| format!("  {d}")).unwrap_or_default()
        );
    }
    let v = serde_json::to_value(&report).map_err(runtime)?;
    if report.passed {
        Ok(v)
    } else {
        // the report still goes to stdout
        println!("{}", serde_json::to_string_pretty(&v).map_err(runtime)?);
        Err(Failure::Runtime(format!("{} suite had failing checks", report.suite)))
    }
}

fn synth(out: &Path, shape: &str) -> Outcome {
    if !DATASET_NAMES.contains(&shape) {
        return Err(invalid(format!("unknown dataset `{shape}`, expected one of {DATASET_NAMES:?}")));
    }
    let set = bundled_dataset(shape).map_err(runtime)?;
    write_demos(out, &set).map_err(runtime)?;
    eprintln!("wrote {} demos to {}", set.len(), out.display());
    Ok(json!({ "out": out, "demos": set.len(), "attractors": set.attractors }))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Train { config, data, out } => train(&config, data, out),
        Command::Rollout {
            model,
            x0,
            horizon,
            solver,
            dt,
            method,
            samples,
            out,
        } => do_rollout(&model, &x0, horizon, &solver, dt, method, samples, &out),
        Command::Eval { model, data, out, solver } => do_eval(&model, &data, &out, &solver),
        Command::Portrait {
            model,
            bounds,
            out,
            grid,
            data,
        } => do_portrait(&model, &bounds, &out, grid, data.as_deref()),
        Command::Gradcheck { seed } => suite_outcome(gradcheck_suite(seed)),
        Command::Selftest { seed } => suite_outcome(selftest_suite(seed)),
        Command::Synth { out, shape } => synth(&out, &shape),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable summary"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let msg = match &f {
                Failure::Validation(m) | Failure::Runtime(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_starts_at_zero_and_ends_at_horizon() {
        let t = times_grid(1.0, Some(0.3), 0).unwrap();
        assert_eq!(t[0], 0.0);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(times_grid(2.0, None, 5).unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(times_grid(-1.0, None, 5).is_err());
    }

    #[test]
    fn float_lists_reject_garbage() {
        assert_eq!(parse_floats("0.1, -2").unwrap(), vec![0.1, -2.0]);
        assert!(parse_floats("1,nan").is_err());
        assert!(parse_floats("1,,2").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
