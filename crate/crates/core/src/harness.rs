//! Run and sweep drivers that write CSV results and a re-runnable manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::engine::{Algorithm, EngineError, ExperimentResult, Simulation};

pub const WORKERS_ENV: &str = "EONSIM_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("sweep grid line {line}: {message}")]
    Grid { line: usize, message: String },
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Worker count from the environment, else the available parallelism.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// `episode,<alg>...`, one row per episode of seed-averaged blocking probability.
pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("episode");
    for a in &result.algorithms {
        let _ = write!(out, ",{}", a.algorithm);
    }
    out.push('\n');
    let curves: Vec<Vec<f64>> = result.algorithms.iter().map(|a| a.mean_bp()).collect();
    for e in 0..result.episodes {
        let _ = write!(out, "{}", e + 1);
        for c in &curves {
            let _ = write!(out, ",{}", c[e]);
        }
        out.push('\n');
    }
    out
}

/// Raw per-seed episode counts.
pub fn episodes_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "algorithm,seed,episode,requests,blocked,no_reach,no_spectrum,blocking_probability\n",
    );
    for a in &result.algorithms {
        for (seed, stats) in result.seeds.iter().zip(&a.per_seed) {
            for s in stats {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    a.algorithm,
                    seed,
                    s.episode + 1,
                    s.total,
                    s.blocked,
                    s.no_reach,
                    s.no_spectrum,
                    s.blocking_probability()
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub out_dir: PathBuf,
    pub config_text: String,
    pub seeds: Vec<u64>,
    pub duration: Duration,
    /// (algorithm, mean blocking probability over the final window)
    pub final_bp: Vec<(Algorithm, f64)>,
    pub result: ExperimentResult,
}

impl RunManifest {
    /// Metadata as `#` comments followed by the resolved config, so the
    /// manifest itself can be passed back as `--config`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# eonsim {}", env!("CARGO_PKG_VERSION"));
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# seeds: {}", seeds.join(","));
        let _ = writeln!(
            out,
            "# wall_clock_seconds: {:.3}",
            self.duration.as_secs_f64()
        );
        let _ = writeln!(out, "# outputs: results.csv episodes.csv");
        for (a, bp) in &self.final_bp {
            let _ = writeln!(out, "# final_bp {a}: {bp}");
        }
        out.push_str(&self.config_text);
        out
    }
}

pub fn run(
    config: &RunConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<RunManifest, HarnessError> {
    let experiment = config.to_experiment()?;
    let started = Instant::now();
    let result = Simulation::new(experiment)?.run(workers)?;
    let duration = started.elapsed();
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    write_atomic(&out_dir.join("results.csv"), &results_csv(&result))?;
    write_atomic(&out_dir.join("episodes.csv"), &episodes_csv(&result))?;
    let manifest = RunManifest {
        out_dir: out_dir.to_path_buf(),
        config_text: config.to_text(),
        seeds: config.seeds.clone(),
        duration,
        final_bp: result
            .algorithms
            .iter()
            .map(|a| (a.algorithm, a.final_window_bp(config.final_window)))
            .collect(),
        result,
    };
    write_atomic(&out_dir.join("manifest.txt"), &manifest.to_text())?;
    Ok(manifest)
}

/// Cartesian grid of overrides, one `key = v1 | v2 | ...` line per axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl SweepGrid {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| HarnessError::Grid {
                line: n + 1,
                message: message.to_string(),
            };
            let (key, values) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = v1 | v2`"))?;
            let key = key.trim().to_string();
            let values: Vec<String> = values.split('|').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(err("empty value"));
            }
            if axes.iter().any(|(k, _)| *k == key) {
                return Err(err("key repeated"));
            }
            axes.push((key, values));
        }
        Ok(SweepGrid { axes })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| io_err(path, e))?)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination, last axis varying fastest.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut points = vec![Vec::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut p = p.clone();
                        p.push((key.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub run: usize,
    pub algorithm: Algorithm,
    pub final_bp: f64,
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub run: usize,
    pub overrides: Vec<(String, String)>,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    /// Sorted by ascending final-window blocking probability.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
    /// Successful runs in grid order.
    pub manifests: Vec<RunManifest>,
}

fn overrides_text(o: &[(String, String)]) -> String {
    o.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Runs every grid point under `out_dir/run-NNNN`. A failing point is
/// recorded and does not stop the others.
pub fn sweep(
    base: &RunConfig,
    grid: &SweepGrid,
    out_dir: &Path,
    workers: usize,
) -> Result<SweepReport, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let points = grid.points();
    let outcomes: Mutex<Vec<Option<Result<RunManifest, String>>>> =
        Mutex::new(vec![None; points.len()]);
    let next = AtomicUsize::new(0);
    let run_dir = |i: usize| out_dir.join(format!("run-{i:04}"));

    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, points.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(i) else { break };
                let mut config = base.clone();
                let outcome = point
                    .iter()
                    .try_for_each(|(k, v)| config.set(k, v))
                    .map_err(HarnessError::from)
                    .and_then(|_| run(&config, &run_dir(i), 1))
                    .map_err(|e| e.to_string());
                outcomes.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let mut report = SweepReport::default();
    for (i, outcome) in outcomes.into_inner().unwrap().into_iter().enumerate() {
        let overrides = points[i].clone();
        match outcome.expect("every point ran") {
            Ok(m) => {
                report
                    .rows
                    .extend(m.final_bp.iter().map(|&(algorithm, final_bp)| SweepRow {
                        run: i,
                        algorithm,
                        final_bp,
                        overrides: overrides.clone(),
                    }));
                report.manifests.push(m);
            }
            Err(error) => report.failures.push(SweepFailure {
                run: i,
                overrides,
                error,
            }),
        }
    }
    report
        .rows
        .sort_by(|a, b| a.final_bp.total_cmp(&b.final_bp).then(a.run.cmp(&b.run)));

    let mut summary = String::from("rank,run,algorithm,final_bp,overrides\n");
    for (rank, r) in report.rows.iter().enumerate() {
        let _ = writeln!(
            summary,
            "{},run-{:04},{},{},{}",
            rank + 1,
            r.run,
            r.algorithm,
            r.final_bp,
            overrides_text(&r.overrides)
        );
    }
    write_atomic(&out_dir.join("summary.csv"), &summary)?;
    if !report.failures.is_empty() {
        let mut text = String::new();
        for f in &report.failures {
            let _ = writeln!(
                text,
                "run-{:04} [{}]: {}",
                f.run,
                overrides_text(&f.overrides),
                f.error
            );
        }
        write_atomic(&out_dir.join("failures.txt"), &text)?;
    }
    Ok(report)
}
