//! Demonstration trajectories: CSV ingestion, windowed batches and the
//! synthetic multi-attractor construction.

mod shapes;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::Tensor;
use crate::error::{Error, Result};
use crate::trainer::write_atomic;

pub use shapes::{bundled_dataset, bundled_shape, DATASET_NAMES, MULTI_ATTRACTORS, SHAPE_NAMES};

pub const DEFAULT_BATCH: usize = 120;
pub const DEFAULT_WINDOW: usize = 25;

/// Name of the optional attractor annotation file in a demo directory.
pub const ATTRACTORS_FILE: &str = "attractors.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        let t = Trajectory { times, points };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.points.len() {
            return Err(Error::config(format!(
                "{} times for {} points",
                self.times.len(),
                self.points.len()
            )));
        }
        if self.times.len() < 2 {
            return Err(Error::config("a trajectory needs at least two samples"));
        }
        if let Some(i) = self.times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::config(format!("time not strictly increasing at sample {}", i + 1)));
        }
        let d = self.dim();
        if d == 0 || self.points.iter().any(|p| p.len() != d) {
            return Err(Error::config("points must share one nonzero dimension"));
        }
        if self.times.iter().chain(self.points.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite value in trajectory"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Points as a `[N, d]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let data: Vec<f64> = self.points.iter().flatten().copied().collect();
        Tensor::new(vec![self.len(), self.dim()], data).expect("validated trajectory")
    }

    pub fn translated(&self, by: &[f64]) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            points: self
                .points
                .iter()
                .map(|p| p.iter().zip(by).map(|(a, b)| a + b).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub name: String,
    pub trajectory: Trajectory,
    /// Index into [`DemoSet::attractors`] when annotated.
    pub attractor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub dim: usize,
    pub demos: Vec<Demo>,
    pub attractors: Vec<Vec<f64>>,
}

/// Contents of `attractors.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorFile {
    pub attractors: Vec<Vec<f64>>,
    /// Demo name → attractor index.
    #[serde(default)]
    pub assignment: BTreeMap<String, usize>,
}

impl DemoSet {
    pub fn new(demos: Vec<Demo>, attractors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = demos.first().map(|d| d.trajectory.dim()).ok_or_else(|| Error::config("no demonstrations"))?;
        let set = DemoSet { dim, demos, attractors };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.demos {
            d.trajectory.validate()?;
            if d.trajectory.dim() != self.dim {
                return Err(Error::config(format!(
                    "demo `{}` has dimension {}, expected {}",
                    d.name,
                    d.trajectory.dim(),
                    self.dim
                )));
            }
            if let Some(i) = d.attractor {
                if i >= self.attractors.len() {
                    return Err(Error::config(format!("demo `{}` names missing attractor {i}", d.name)));
                }
            }
        }
        if self.attractors.iter().any(|a| a.len() != self.dim) {
            return Err(Error::config("attractor dimension differs from demo dimension"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    /// Final points averaged over all demos: the attractor of an unannotated set.
    pub fn mean_endpoint(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for d in &self.demos {
            for (a, v) in acc.iter_mut().zip(d.trajectory.points.last().expect("validated")) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.demos.len() as f64).collect()
    }

    fn attractor_file(&self) -> AttractorFile {
        AttractorFile {
            attractors: self.attractors.clone(),
            assignment: self
                .demos
                .iter()
                .filter_map(|d| d.attractor.map(|i| (d.name.clone(), i)))
                .collect(),
        }
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads one `t,z1,...,zn` CSV file.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let n = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("z{i}"))).collect();
    if n == 0 || header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(path, 1, format!("header must be `t,z1,...,zn`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(n + 1);
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, "non-finite value"));
            }
            values.push(v);
        }
        if let Some(&prev) = times.last() {
            if values[0] <= prev {
                return Err(parse_err(path, line, format!("time {} does not increase past {prev}", values[0])));
            }
        }
        times.push(values[0]);
        points.push(values[1..].to_vec());
    }
    if times.len() < 2 {
        return Err(parse_err(path, 1, "fewer than two samples"));
    }
    Trajectory::new(times, points)
}

/// CSV text for one trajectory; floats use the shortest round-trip form.
pub fn trajectory_csv(t: &Trajectory) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=t.dim()).map(|i| format!("z{i}")));
    w.write_record(&header).map_err(|e| Error::config(e.to_string()))?;
    for (time, p) in t.times.iter().zip(&t.points) {
        let row: Vec<String> = std::iter::once(time).chain(p).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| Error::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

/// Loads every `*.csv` in `dir` (sorted by file name) plus the optional
/// `attractors.json` annotation.
pub fn load_demos(dir: &Path) -> Result<DemoSet> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::config(format!("no CSV demonstrations in {}", dir.display())));
    }
    let annotation = dir.join(ATTRACTORS_FILE);
    let ann: AttractorFile = if annotation.exists() {
        let text = fs::read_to_string(&annotation).map_err(|e| Error::io(&annotation, e))?;
        serde_json::from_str(&text)?
    } else {
        AttractorFile::default()
    };
    let mut demos = Vec::with_capacity(files.len());
    for f in &files {
        let name = f.file_stem().expect("csv file").to_string_lossy().into_owned();
        let trajectory = read_trajectory(f)?;
        let attractor = ann.assignment.get(&name).copied();
        demos.push(Demo {
            name,
            trajectory,
            attractor,
        });
    }
    DemoSet::new(demos, ann.attractors)
}

/// Writes `{name}.csv` per demo and `attractors.json` when annotated.
pub fn write_demos(dir: &Path, set: &DemoSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for d in &set.demos {
        let path = dir.join(format!("{}.csv", d.name));
        write_atomic(&path, trajectory_csv(&d.trajectory)?.as_bytes())?;
    }
    if !set.attractors.is_empty() {
        let path = dir.join(ATTRACTORS_FILE);
        let text = serde_json::to_string_pretty(&set.attractor_file())?;
        write_atomic(&path, (text + "\n").as_bytes())?;
    }
    Ok(())
}

/// One training batch of demo windows sharing a common time grid.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    /// (demo index, start sample) per window.
    pub windows: Vec<(usize, usize)>,
    /// First sample of every window, `[B, d]`.
    pub y0: Tensor,
    /// Union of all windows' times relative to their start, ascending, `grid[0] = 0`.
    pub grid: Vec<f64>,
    /// For each window, the grid index of each of its samples.
    pub grid_index: Vec<Vec<usize>>,
    /// Demo points of each window, `[N_S, d]`.
    pub targets: Vec<Tensor>,
}

impl WindowBatch {
    /// Rows of `states` (one `[B, d]` tensor per grid time) belonging to window `b`, as `[N_S, d]`.
    pub fn gather(&self, states: &[Tensor], b: usize) -> Result<Tensor> {
        let rows = self.grid_index[b]
            .iter()
            .map(|&k| states[k].slice(0, b, 1))
            .collect::<Result<Vec<_>>>()?;
        Tensor::concat(&rows, 0)
    }
}

/// Relative times closer than this are merged onto one grid point.
const GRID_MERGE: f64 = 1e-9;

/// Samples `n_b` windows of `n_s` consecutive samples; the demo and the start
/// index are drawn uniformly from a ChaCha8 stream seeded with `seed`.
pub fn make_windows(set: &DemoSet, n_s: usize, n_b: usize, seed: u64) -> Result<WindowBatch> {
    if n_s < 2 || n_b == 0 {
        return Err(Error::config(format!("window length must be ≥ 2 and batch ≥ 1, got {n_s} and {n_b}")));
    }
    if let Some(d) = set.demos.iter().find(|d| d.trajectory.len() < n_s) {
        return Err(Error::config(format!(
            "demo `{}` has {} samples, shorter than the window length {n_s}",
            d.name,
            d.trajectory.len()
        )));
    }
    if set.is_empty() {
        return Err(Error::config("no demonstrations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows: Vec<(usize, usize)> = (0..n_b)
        .map(|_| {
            let d = rng.random_range(0..set.len());
            let s = rng.random_range(0..=set.demos[d].trajectory.len() - n_s);
            (d, s)
        })
        .collect();

    let mut rel: Vec<f64> = Vec::with_capacity(n_b * n_s);
    for &(d, s) in &windows {
        let t = &set.demos[d].trajectory.times;
        rel.extend((s..s + n_s).map(|i| t[i] - t[s]));
    }
    rel.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = Vec::new();
    for r in rel {
        if grid.last().is_none_or(|&g| r - g > GRID_MERGE * g.abs().max(1.0)) {
            grid.push(r);
        }
    }
    let locate = |r: f64| -> usize {
        let i = grid.partition_point(|&g| g < r - GRID_MERGE * r.abs().max(1.0));
        // nearest of the two neighbours
        if i + 1 < grid.len() && (grid[i + 1] - r).abs() < (grid[i] - r).abs() {
            i + 1
        } else {
            i
        }
    };

    let mut y0 = Vec::with_capacity(n_b * set.dim);
    let mut grid_index = Vec::with_capacity(n_b);
    let mut targets = Vec::with_capacity(n_b);
    for &(d, s) in &windows {
        let traj = &set.demos[d].trajectory;
        y0.extend_from_slice(&traj.points[s]);
        grid_index.push((s..s + n_s).map(|i| locate(traj.times[i] - traj.times[s])).collect());
        let data: Vec<f64> = traj.points[s..s + n_s].iter().flatten().copied().collect();
        targets.push(Tensor::new(vec![n_s, set.dim], data)?);
    }
    Ok(WindowBatch {
        windows,
        y0: Tensor::new(vec![n_b, set.dim], y0)?,
        grid,
        grid_index,
        targets,
    })
}

/// Translates each group so that every demo ends exactly on its group's
/// attractor and returns the union, annotated with the attractors.
pub fn synth_multimodal(groups: &[DemoSet], attractors: &[Vec<f64>]) -> Result<DemoSet> {
    if groups.len() != attractors.len() {
        return Err(Error::config(format!(
            "{} groups but {} attractors",
            groups.len(),
            attractors.len()
        )));
    }
    let mut demos = Vec::new();
    for (g, (set, target)) in groups.iter().zip(attractors).enumerate() {
        if target.len() != set.dim {
            return Err(Error::config(format!(
                "attractor {g} has dimension {}, group has {}",
                target.len(),
                set.dim
            )));
        }
        for d in &set.demos {
            let last = d.trajectory.points.last().expect("validated");
            let shift: Vec<f64> = target.iter().zip(last).map(|(a, b)| a - b).collect();
            let mut trajectory = d.trajectory.translated(&shift);
            // pin the endpoint exactly even if the subtraction rounded
            *trajectory.points.last_mut().expect("validated") = target.clone();
            demos.push(Demo {
                name: format!("g{g}_{}", d.name),
                trajectory,
                attractor: Some(g),
            });
        }
    }
    DemoSet::new(demos, attractors.to_vec())
}
