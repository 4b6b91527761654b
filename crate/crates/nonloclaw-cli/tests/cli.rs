//! End-to-end tests of the command-line contract: exit codes, artifact
//! layout, environment handling, and CSV re-ingestion.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nonloclaw::grid::{Grid, GridField};
use sha2::{Digest, Sha256};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nonloclaw")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nonloclaw-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    cmd.env_remove("NONLOCLAW_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

const BASE: &str = "\
[grid]
cells = 64
spacing = 0.03125

[kernel]
symmetry = even
horizon = 0.125
profile = triangle

[flux]
name = engquist_osher_burgers
range = -0.2, 1.2

[scheme]
kind = implicit
t_final = 0.25
steps = 16
";

fn read_field(path: &Path) -> GridField {
    let data = std::fs::read(path).unwrap();
    GridField::read_csv(&data[..]).unwrap()
}

#[test]
fn constant_initial_data_keeps_snapshots_identical() {
    let dir = workdir("const");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, format!("{BASE}\n[initial]\nprofile = constant\nvalue = 0.7\n")).unwrap();
    let out = dir.join("out");
    let r = run(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let first = std::fs::read(out.join("snapshot_0000.csv")).unwrap();
    for m in 1..=16 {
        let other = std::fs::read(out.join(format!("snapshot_{m:04}.csv"))).unwrap();
        assert_eq!(first, other, "snapshot {m} differs");
    }
}

#[test]
fn bundled_shock_config_produces_monotone_front() {
    let dir = workdir("shock");
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../examples/shock.cfg");
    let out = dir.join("out");
    let r = run(
        &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let u = read_field(&out.join("snapshot_0064.csv"));
    // At T = 0.5 the front sits near x = 0.75; values on [0.5, 1.5] step
    // monotonically from 1 down to 0.
    let grid = u.grid().clone();
    let dx = grid.spacing()[0];
    let vals = u.values();
    let (i0, i1) = ((0.5 / dx) as usize, (1.5 / dx) as usize);
    for i in i0..i1 {
        assert!(vals[i + 1] <= vals[i] + 1e-9, "front not monotone at cell {i}");
    }
    assert!(u.max() <= 1.0 + 1e-6 && u.min() >= -1e-6);
    assert!(out.join("plot.gp").exists() && out.join("manifest.json").exists());
}

#[test]
fn unresolved_horizon_exits_2_naming_the_constraint() {
    let dir = workdir("horizon");
    let cfg = dir.join("bad.cfg");
    std::fs::write(
        &cfg,
        format!("{}\n[initial]\nprofile = constant\nvalue = 0.0\n", BASE.replace("horizon = 0.125", "horizon = 0.001")),
    )
    .unwrap();
    let r = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("horizon"), "stderr: {err}");
}

#[test]
fn unknown_oracle_exits_2() {
    let dir = workdir("oracle");
    let cfg = dir.join("s.cfg");
    std::fs::write(
        &cfg,
        format!(
            "{BASE}\n[initial]\nprofile = constant\nvalue = 0.0\n\n[study]\ndeltas = 0.125\noracle = nosuch\nt_final = 0.2\neps = 0.0125\n"
        ),
    )
    .unwrap();
    let r = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()], &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("oracle"));
}

#[test]
fn env_var_sets_output_root() {
    let dir = workdir("envout");
    let cfg = dir.join("c.cfg");
    std::fs::write(
        &cfg,
        format!("{BASE}\n[initial]\nprofile = constant\nvalue = 0.5\n\n[output]\ndirectory = artifacts\ncadence = 16\n"),
    )
    .unwrap();
    let r = run(
        &["run", "--config", cfg.to_str().unwrap()],
        &[("NONLOCLAW_OUT", dir.to_str().unwrap())],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(dir.join("artifacts/manifest.json").exists());
}

#[test]
fn verify_subcommand_passes_on_entropic_run() {
    let dir = workdir("verify");
    let cfg = dir.join("v.cfg");
    std::fs::write(
        &cfg,
        format!("{BASE}\n[initial]\nprofile = riemann\nleft = 1.0\nright = 0.0\njump = 0.5\n"),
    )
    .unwrap();
    let r = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let out = String::from_utf8_lossy(&r.stdout);
    assert!(out.contains("entropy audit") && out.contains("pass"));
    assert!(dir.join("o/entropy_report.csv").exists());
}

#[test]
fn run_then_ingest_trajectory_round_trip() {
    let dir = workdir("ingest");
    let cfg = dir.join("r.cfg");
    std::fs::write(
        &cfg,
        format!("{BASE}\n[initial]\nprofile = riemann\nleft = 1.0\nright = 0.0\njump = 0.5\n\n[output]\ncadence = 1\n"),
    )
    .unwrap();
    let runout = dir.join("runout");
    let r = run(&["run", "--config", cfg.to_str().unwrap(), "--out", runout.to_str().unwrap()], &[]);
    assert!(r.status.success());
    let vcfg = dir.join("v.cfg");
    std::fs::write(
        &vcfg,
        format!(
            "{BASE}\n[initial]\nprofile = riemann\nleft = 1.0\nright = 0.0\njump = 0.5\n\n[verify]\ntrajectory = {}\n",
            runout.join("manifest.json").display()
        ),
    )
    .unwrap();
    let r = run(&["verify", "--config", vcfg.to_str().unwrap(), "--out", dir.join("vo").to_str().unwrap()], &[]);
    assert!(
        r.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&r.stdout),
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn ingested_expansion_shock_fails_with_exit_1() {
    // Hand-built trajectory holding a frozen entropy-violating profile.
    let dir = workdir("exit1");
    let grid = Grid::line(64, 0.03125).unwrap();
    let bad = GridField::sample(grid, |x| if x[0] < 1.0 { 1.0 } else { -1.0 }).unwrap();
    let traj_dir = dir.join("traj");
    std::fs::create_dir_all(&traj_dir).unwrap();
    let times = [0.0, 0.125, 0.25];
    let mut artifacts = Vec::new();
    for m in 0..times.len() {
        let mut buf = Vec::new();
        bad.write_csv(&mut buf).unwrap();
        let name = format!("snapshot_{m:04}.csv");
        std::fs::write(traj_dir.join(&name), &buf).unwrap();
        let hash: String = Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect();
        artifacts.push(format!("{{\"path\":\"{name}\",\"sha256\":\"{hash}\"}}"));
    }
    let manifest = format!(
        "{{\"version\":\"0.1.0\",\"command\":\"run\",\"config\":[],\"seed\":null,\
         \"grid_cells\":[64],\"grid_spacing\":[0.03125],\"times\":[0.0,0.125,0.25],\
         \"solver_residuals\":[],\"residual_budget\":0.0,\"artifacts\":[{}]}}",
        artifacts.join(",")
    );
    std::fs::write(traj_dir.join("manifest.json"), manifest).unwrap();

    let cfg = dir.join("v.cfg");
    std::fs::write(
        &cfg,
        format!(
            "{}\n[initial]\nprofile = riemann\nleft = 1.0\nright = -1.0\njump = 1.0\n\n[verify]\ntrajectory = {}\n",
            BASE.replace("range = -0.2, 1.2", "range = -1.2, 1.2"),
            traj_dir.join("manifest.json").display()
        ),
    )
    .unwrap();
    let r = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()], &[]);
    assert_eq!(
        r.status.code(),
        Some(1),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&r.stdout),
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(String::from_utf8_lossy(&r.stderr).contains("entropy"));
}

#[test]
fn resolvent_subcommand_writes_solution() {
    let dir = workdir("resolvent");
    let cfg = dir.join("r.cfg");
    std::fs::write(
        &cfg,
        format!("{BASE}\n[initial]\nprofile = gaussian\ncenter = 1.0\nwidth = 0.3\namplitude = 1.0\n\n[resolvent]\nlambda = 0.5\n"),
    )
    .unwrap();
    let out = dir.join("o");
    let r = run(&["resolvent", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let u = read_field(&out.join("solution.csv"));
    // Contraction of the resolvent: the solution cannot exceed the data.
    assert!(u.max() <= 1.0 + 1e-9 && u.min() >= -1e-9);
}
