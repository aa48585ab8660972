//! File artifacts. Numbers are written with 17 significant digits so every
//! value read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use klausmeier::basis::synthesize;
use klausmeier::monitor::NormEvaluator;
use klausmeier::simulate::{GalerkinSystem, Trajectory};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Row-major matrix with a `# rows=R cols=C` header line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut s = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| num(x)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('=').and_then(|(_, v)| v.parse().ok()))
        .collect();
    let [rows, cols] = dims[..] else {
        bail!("{}: missing `# rows=R cols=C` header", path.display());
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), i + 1))?;
        if row.len() != cols {
            bail!("{}: row {} has {} entries, expected {cols}", path.display(), i + 1, row.len());
        }
        data.extend(row);
    }
    if data.len() != rows * cols {
        bail!("{}: expected {rows} rows, found {}", path.display(), data.len() / cols.max(1));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// `t, u_0.., w_0.., v_0.., z_0..` per recorded state.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let s0 = traj.initial();
    let mut s = String::from("t");
    for (name, n) in [("u", s0.dim_u()), ("w", s0.m()), ("v", s0.dim_u()), ("z", s0.m())] {
        for i in 0..n {
            write!(s, ",{name}_{i}")?;
        }
    }
    s.push('\n');
    for st in &traj.states {
        s.push_str(&num(st.t));
        for x in st.flatten() {
            s.push(',');
            s.push_str(&num(x));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn uniform_grid(half_length: f64, points: usize) -> Vec<f64> {
    let h = 2.0 * half_length / (points - 1) as f64;
    (0..points).map(|i| -half_length + i as f64 * h).collect()
}

/// Long format `t, x, u, w` on a uniform grid over `[-L, L]`.
pub fn write_fields_csv(path: &Path, traj: &Trajectory, sys: &GalerkinSystem, points: usize) -> Result<()> {
    let xs = uniform_grid(sys.params.half_length, points);
    let mut s = String::from("t,x,u,w\n");
    for st in &traj.states {
        let u = synthesize(&st.coef_u, sys.plant_basis(), &xs)?;
        let w = synthesize(&st.coef_w, sys.water_basis(), &xs)?;
        for i in 0..xs.len() {
            writeln!(s, "{},{},{},{}", num(st.t), num(xs[i]), num(u[i]), num(w[i]))?;
        }
    }
    write_text(path, &s)
}

pub fn write_norms_csv(path: &Path, traj: &Trajectory, sys: &GalerkinSystem) -> Result<()> {
    let eval = NormEvaluator::new(sys);
    let mut s = String::from("t,l2_u,l2_w,l2_v,l2_z,h1_u,h1_w,linf_u,linf_w\n");
    for st in &traj.states {
        let n = eval.norms(st);
        let row = [st.t, n.l2_u, n.l2_w, n.l2_v, n.l2_z, n.h1_u, n.h1_w, n.linf_u, n.linf_w];
        s.push_str(&row.map(num).join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Provenance of one output directory. Together with the `config.toml` next
/// to it, this is enough to reproduce every other file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    /// SHA-256 of `config.toml` in the same directory.
    pub config_hash: String,
    pub config_file: String,
    /// Values the config leaves to be derived (time step, horizon, scale, ...).
    pub resolved: serde_json::Value,
    pub files: Vec<String>,
    pub passed: Option<bool>,
    pub started_unix_seconds: u64,
    pub wall_time_seconds: f64,
}

/// Collects files written into an output directory and finishes with the
/// manifest.
pub struct RunDir {
    pub dir: PathBuf,
    command: String,
    config_text: String,
    files: Vec<String>,
    started: Instant,
    started_unix: u64,
}

impl RunDir {
    /// Create `dir` and write the resolved `config.toml` into it.
    pub fn create(dir: &Path, command: &str, config_toml: String) -> Result<Self> {
        create_dir(dir)?;
        let mut run = Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_text: config_toml,
            files: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        let text = run.config_text.clone();
        write_text(&run.path("config.toml"), &text)?;
        Ok(run)
    }

    /// Path of a new artifact, recorded in the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn finish(mut self, resolved: serde_json::Value, passed: Option<bool>) -> Result<Manifest> {
        let manifest_path = self.path("manifest.json");
        let manifest = Manifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: klausmeier::VERSION,
            config_hash: sha256_hex(&self.config_text),
            config_file: "config.toml".into(),
            resolved,
            files: self.files,
            passed,
            started_unix_seconds: self.started_unix,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(&manifest_path, &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = DMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        write_matrix_csv(&p, &m).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("# rows=3 cols=2\n"));
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
