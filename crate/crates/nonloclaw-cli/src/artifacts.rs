//! Artifact plumbing: atomic file writes, content hashing, the run
//! manifest, plot-script emission, and trajectory dump/ingest.

use std::fs;
use std::path::{Path, PathBuf};

use nonloclaw::grid::GridField;
use nonloclaw::semigroup::{Scheme, Trajectory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ConfigError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

/// The JSON manifest written once per invocation. Deterministic for a
/// fixed config and seed; wall-clock timing goes to a separate sidecar so
/// the manifest bytes stay reproducible.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: Vec<String>,
    pub seed: Option<u64>,
    pub grid_cells: Vec<usize>,
    pub grid_spacing: Vec<f64>,
    pub times: Vec<f64>,
    pub solver_residuals: Vec<f64>,
    pub residual_budget: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Collects artifacts, writing each atomically and recording its hash.
pub struct ArtifactSink {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> Self {
        ArtifactSink {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_field(&mut self, name: &str, field: &GridField) -> Result<(), ConfigError> {
        let mut buf = Vec::new();
        field.write_csv(&mut buf).map_err(|e| ConfigError {
            line: 0,
            message: e.to_string(),
        })?;
        self.write(name, &buf).map_err(io_err)
    }

    /// Finish the run: write the manifest itself (not listed in its own
    /// inventory) and the timing sidecar.
    pub fn finish(self, mut manifest: RunManifest, wall_clock: std::time::Duration) -> std::io::Result<()> {
        manifest.artifacts = self.entries;
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        write_atomic(&self.dir.join("manifest.json"), &json)?;
        write_atomic(
            &self.dir.join("timing.txt"),
            format!("wall_clock_seconds = {:.6}\n", wall_clock.as_secs_f64()).as_bytes(),
        )
    }
}

pub fn io_err(e: std::io::Error) -> ConfigError {
    ConfigError {
        line: 0,
        message: format!("io error: {e}"),
    }
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:04}.csv")
}

/// gnuplot script plotting every snapshot against physical coordinates.
pub fn trajectory_plot_script(
    spacing: &[f64],
    dim: usize,
    snapshots: &[(String, f64)],
) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    if dim == 1 {
        s.push_str("set xlabel 'x'\nset ylabel 'u'\n");
        s.push_str("plot \\\n");
        let dx = spacing[0];
        let lines: Vec<String> = snapshots
            .iter()
            .map(|(name, t)| {
                format!("  '{name}' using ((($1)+0.5)*{dx}):2 with lines title 't={t}'")
            })
            .collect();
        s.push_str(&lines.join(", \\\n"));
        s.push('\n');
    } else {
        s.push_str("set xlabel 'x'\nset ylabel 'y'\nset view map\n");
        let (dx, dy) = (spacing[0], spacing[1]);
        for (name, t) in snapshots {
            s.push_str(&format!(
                "splot '{name}' using ((($1)+0.5)*{dx}):((($2)+0.5)*{dy}):3 with points palette title 't={t}'\npause -1\n"
            ));
        }
    }
    s
}

pub fn study_plot_script(csv: &str) -> String {
    format!(
        "set datafile separator ','\nset logscale xy\nset xlabel 'horizon'\nset ylabel 'L1 error'\nplot '{csv}' using 1:2 with linespoints title 'error'\n"
    )
}

/// Dump a trajectory as snapshot CSVs at the given cadence (the final
/// state always included) and return the (name, time) pairs.
pub fn dump_trajectory(
    sink: &mut ArtifactSink,
    traj: &Trajectory,
    cadence: usize,
) -> Result<Vec<(String, f64)>, ConfigError> {
    let last = traj.states.len() - 1;
    let mut out = Vec::new();
    for (m, state) in traj.states.iter().enumerate() {
        if m % cadence != 0 && m != last {
            continue;
        }
        let name = snapshot_name(m);
        sink.write_field(&name, state)?;
        out.push((name, traj.times[m]));
    }
    Ok(out)
}

/// Rebuild a trajectory from a previously written manifest: every
/// `snapshot_*.csv` in its inventory, in index order, with the recorded
/// times. Usable by the verify path on externally produced runs.
pub fn load_trajectory(manifest_path: &Path) -> Result<Trajectory, ConfigError> {
    let bytes = fs::read(manifest_path).map_err(io_err)?;
    let manifest: RunManifest = serde_json::from_slice(&bytes).map_err(|e| ConfigError {
        line: 0,
        message: format!("{}: {e}", manifest_path.display()),
    })?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut states = Vec::new();
    let mut times = Vec::new();
    let mut snaps: Vec<&ArtifactEntry> = manifest
        .artifacts
        .iter()
        .filter(|a| a.path.starts_with("snapshot_") && a.path.ends_with(".csv"))
        .collect();
    snaps.sort_by(|a, b| a.path.cmp(&b.path));
    if snaps.len() != manifest.times.len() {
        return Err(ConfigError {
            line: 0,
            message: format!(
                "manifest lists {} snapshots but {} times; a full-cadence run is required",
                snaps.len(),
                manifest.times.len()
            ),
        });
    }
    for (a, &t) in snaps.iter().zip(&manifest.times) {
        let data = fs::read(dir.join(&a.path)).map_err(io_err)?;
        if sha256_hex(&data) != a.sha256 {
            return Err(ConfigError {
                line: 0,
                message: format!("{}: content hash mismatch", a.path),
            });
        }
        let field = GridField::read_csv(&data[..]).map_err(|e| ConfigError {
            line: 0,
            message: format!("{}: {e}", a.path),
        })?;
        states.push(field);
        times.push(t);
    }
    if states.len() < 2 {
        return Err(ConfigError {
            line: 0,
            message: "trajectory needs at least two snapshots".into(),
        });
    }
    let step = times[1] - times[0];
    Ok(Trajectory {
        times,
        states,
        scheme: Scheme::Implicit,
        step,
        reports: Vec::new(),
    })
}
