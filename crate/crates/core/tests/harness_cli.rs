use std::path::{Path, PathBuf};
use std::process::Command;

use eonsim::config::{ConfigError, RunConfig};
use eonsim::harness::{self, SweepGrid};
use eonsim::presets;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("harness_cli")
        .join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn eonsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eonsim"))
        .args(args)
        .env("EONSIM_WORKERS", "2")
        .output()
        .unwrap()
}

fn quick_qlearning() -> RunConfig {
    RunConfig::parse(
        "preset = erlang750-qlearning\nepisodes = 2\nrequests_per_episode = 300\nseeds = 0\nfinal_window = 1\n",
    )
    .unwrap()
}

#[test]
fn every_preset_builds_an_experiment() {
    for name in presets::names() {
        let exp = RunConfig::from_preset(&name)
            .unwrap()
            .to_experiment()
            .unwrap();
        assert_eq!(exp.k, eonsim::topology::PathLimit::Limited(3));
        assert_eq!(exp.topology.node_count(), 14);
        let expected_runs = if name.contains('-') { 1 } else { 6 };
        assert_eq!(exp.runs.len(), expected_runs, "{name}");
    }
}

#[test]
fn run_writes_one_row_per_episode() {
    let out = scratch("hundred");
    let mut config = RunConfig::from_preset("erlang500-spf_ff").unwrap();
    config.seeds = vec![3];
    let manifest = harness::run(&config, &out, 1).unwrap();
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "episode,spf_ff");
    assert_eq!(lines.len(), 101);
    assert!(lines[100].starts_with("100,"));
    let text = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(text.contains("# seeds: 3\n"));
    assert!(text.contains(&format!("# eonsim {}", env!("CARGO_PKG_VERSION"))));
    assert_eq!(RunConfig::parse(&text).unwrap(), config);
    assert_eq!(manifest.final_bp.len(), 1);
    let episodes = std::fs::read_to_string(out.join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 101);
}

#[test]
fn manifest_reruns_to_identical_bytes() {
    let out = scratch("rerun");
    let (a, b, c) = (out.join("a"), out.join("b"), out.join("c"));
    let first = eonsim(&[
        "run",
        "--preset",
        "erlang1000",
        "--episodes",
        "3",
        "--seeds",
        "1,2",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let manifest = a.join("manifest.txt");
    let again = eonsim(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(again.status.success());
    let serial = eonsim(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--workers",
        "1",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert!(serial.status.success());
    let bytes = |d: &Path| std::fs::read(d.join("results.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(bytes(&a), bytes(&c));
    assert_eq!(String::from_utf8(bytes(&a)).unwrap().lines().count(), 4);
}

#[test]
fn cli_reports_config_errors() {
    let out = scratch("errors");
    let missing = eonsim(&[
        "run",
        "--algorithm",
        "ksp_ff",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("erlang"));

    let empty_seeds = eonsim(&[
        "run",
        "--preset",
        "erlang500-ksp_ff",
        "--seeds",
        "",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!empty_seeds.status.success());
    assert!(String::from_utf8_lossy(&empty_seeds.stderr).contains("seed"));

    let bad_k = eonsim(&["run", "--preset", "erlang500-ksp_ff", "--k", "0"]);
    assert!(!bad_k.status.success());
    assert!(!out.join("results.csv").exists());
}

#[test]
fn topology_validate_accepts_and_rejects() {
    let dir = scratch("topology");
    let good = dir.join("good.topo");
    std::fs::write(&good, NSFNET_TEXT).unwrap();
    let ok = eonsim(&["topology", "validate", good.to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("14 nodes, 22 links"));

    let split = dir.join("split.topo");
    std::fs::write(&split, "a b 10\nc d 10\n").unwrap();
    let bad = eonsim(&["topology", "validate", split.to_str().unwrap()]);
    assert!(!bad.status.success());

    let looped = dir.join("loop.topo");
    std::fs::write(&looped, "a a 10\n").unwrap();
    assert!(!eonsim(&["topology", "validate", looped.to_str().unwrap()])
        .status
        .success());
}

const NSFNET_TEXT: &str = include_str!("../data/nsfnet.topo");

#[test]
fn two_by_two_sweep_gives_four_runs() {
    let out = scratch("sweep4");
    let base = quick_qlearning();
    let grid = SweepGrid::parse("epsilon = 0.05 | 0.2\nrouted_reward = 1 | 10\n").unwrap();
    let report = harness::sweep(&base, &grid, &out, 2).unwrap();
    assert_eq!(report.manifests.len(), 4);
    assert!(report.failures.is_empty());
    for i in 0..4 {
        assert!(out.join(format!("run-{i:04}/manifest.txt")).exists());
    }
    let best = report
        .rows
        .iter()
        .map(|r| r.final_bp)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(report.rows[0].final_bp, best);
    assert!(report
        .rows
        .windows(2)
        .all(|w| w[0].final_bp <= w[1].final_bp));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().nth(1).unwrap().starts_with("1,run-"));
}

#[test]
fn sweep_isolates_failing_points() {
    let out = scratch("sweep_fail");
    let grid = SweepGrid::parse("alpha = 0.1 | 7 | 0.5\n").unwrap();
    let report = harness::sweep(&quick_qlearning(), &grid, &out, 1).unwrap();
    assert_eq!(report.manifests.len(), 2);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].run, 1);
    assert!(out.join("failures.txt").exists());
}

#[test]
fn hundred_fifty_point_sweep() {
    let out = scratch("sweep150");
    let mut base = quick_qlearning();
    base.episodes = 1;
    base.requests_per_episode = 100;
    let grid = SweepGrid::parse(
        "epsilon = 0.01 | 0.05 | 0.1 | 0.2->0.05 | 0.3\nalpha = 0.01 | 0.05 | 0.1 | 0.5 | 1\ngamma = 0 | 0.01 | 0.5 | 0.9 | 0.95 | 1\n",
    )
    .unwrap();
    assert_eq!(grid.len(), 150);
    let report = harness::sweep(&base, &grid, &out, harness::workers_from_env()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.manifests.len(), 150);
    let manifests = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().join("manifest.txt").exists())
        .count();
    assert_eq!(manifests, 150);
}

#[test]
fn cli_sweep_writes_summary() {
    let dir = scratch("cli_sweep");
    let config = dir.join("base.conf");
    std::fs::write(&config, quick_qlearning().to_text()).unwrap();
    let grid = dir.join("grid.txt");
    std::fs::write(&grid, "gamma = 0.1 | 0.9\n").unwrap();
    let out = dir.join("out");
    let r = eonsim(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn preset_line_can_be_overridden() {
    let c = RunConfig::parse("preset = erlang500\nerlang = 600\nucb.c = 1.5\n").unwrap();
    let exp = c.to_experiment().unwrap();
    assert_eq!(exp.traffic.erlang, 600.0);
    let ucb = exp
        .runs
        .iter()
        .find(|r| r.algorithm == eonsim::Algorithm::Ucb)
        .unwrap();
    assert_eq!(ucb.params.unwrap().c, 1.5);
    assert!(matches!(
        RunConfig::parse("preset = erlang500\nalgorithm = spf_ff,spf_ff\n")
            .unwrap()
            .to_experiment(),
        Err(ConfigError::Invalid { .. })
    ));
}
