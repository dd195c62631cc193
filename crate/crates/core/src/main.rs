use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eonsim::config::RunConfig;
use eonsim::harness::{self, SweepGrid};
use eonsim::presets;
use eonsim::Topology;

#[derive(Parser)]
#[command(
    name = "eonsim",
    version,
    about = "Learning-based routing on multi-core elastic optical networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write results.csv, episodes.csv and manifest.txt.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Applied before the config file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        erlang: Option<f64>,
        /// Comma-separated algorithm names.
        #[arg(long)]
        algorithm: Option<String>,
        /// Candidate paths per pair, or `inf`.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Extra `key=value` overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run every point of a sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Topology file utilities.
    Topology {
        #[command(subcommand)]
        command: TopologyCommand,
    },
    /// List bundled presets.
    Presets,
}

#[derive(Subcommand)]
enum TopologyCommand {
    Validate { file: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn dispatch(cli: Cli) -> Result<(), BoxError> {
    match cli.command {
        Command::Run {
            config,
            preset,
            erlang,
            algorithm,
            k,
            episodes,
            seeds,
            out,
            set,
            workers,
        } => {
            let mut cfg = RunConfig::default();
            if let Some(p) = preset {
                cfg.set("preset", &p)?;
            }
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                cfg.apply(&text)?;
            }
            let mut overrides: Vec<(String, String)> = Vec::new();
            let mut push = |key: &str, value: Option<String>| {
                if let Some(v) = value {
                    overrides.push((key.into(), v));
                }
            };
            push("erlang", erlang.map(|v| v.to_string()));
            push("algorithm", algorithm);
            push("k", k);
            push("episodes", episodes.map(|v| v.to_string()));
            push("seeds", seeds);
            for kv in set {
                let (key, value) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
                overrides.push((key.trim().into(), value.trim().into()));
            }
            for (key, value) in overrides {
                cfg.set(&key, &value)?;
            }
            let workers = workers.unwrap_or_else(harness::workers_from_env);
            let manifest = harness::run(&cfg, &out, workers)?;
            for (alg, bp) in &manifest.final_bp {
                println!("{alg:<10} final blocking probability {bp:.5}");
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            config,
            grid,
            out,
            workers,
        } => {
            let base = RunConfig::from_file(&config)?;
            let grid = SweepGrid::load(&grid)?;
            let workers = workers.unwrap_or_else(harness::workers_from_env);
            let report = harness::sweep(&base, &grid, &out, workers)?;
            println!(
                "{} points, {} failed; summary in {}",
                grid.len(),
                report.failures.len(),
                out.join("summary.csv").display()
            );
            if let Some(best) = report.rows.first() {
                println!(
                    "best: run-{:04} {} {:.5}",
                    best.run, best.algorithm, best.final_bp
                );
            }
        }
        Command::Topology {
            command: TopologyCommand::Validate { file },
        } => {
            let t = Topology::load(&file)?;
            println!(
                "{}: {} nodes, {} links, connected",
                file.display(),
                t.node_count(),
                t.link_count()
            );
        }
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}
