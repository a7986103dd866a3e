//! Plain-text artifact writers and readers.
//!
//! Floats are written in shortest round-trip form, so reading an artifact back
//! recovers every value bit for bit. CSV artifacts produced by a run start with
//! one `#` comment line carrying [`ArtifactMeta`]; readers skip such lines.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridState, Trajectory};

pub const TOOL_NAME: &str = "fdi-grid";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every artifact a run emits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub episode_seed: u64,
    pub ppo_seed: u64,
}

impl ArtifactMeta {
    pub fn new(config_hash: impl Into<String>, episode_seed: u64, ppo_seed: u64) -> Self {
        ArtifactMeta {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config_hash: config_hash.into(),
            episode_seed,
            ppo_seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# tool={} version={} config_hash={} episode_seed={} ppo_seed={}",
            self.tool, self.version, self.config_hash, self.episode_seed, self.ppo_seed
        )
    }
}

pub fn fmt_f64(x: f64) -> String {
    ryu::Buffer::new().format(x).to_owned()
}

pub fn write_csv<I>(path: &Path, meta: Option<&ArtifactMeta>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = String::new();
    if let Some(m) = meta {
        out.push_str(&m.comment_line());
        out.push('\n');
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// A CSV file split into header and rows, comment lines removed.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub path: std::path::PathBuf,
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(self.error(format!("unexpected header {:?}, wanted {expected:?}", self.header)));
        }
        Ok(())
    }

    pub fn parse<T: FromStr>(&self, row: &[String], col: usize) -> Result<T> {
        let cell = row
            .get(col)
            .ok_or_else(|| self.error(format!("row too short: {row:?}")))?;
        cell.parse()
            .map_err(|_| self.error(format!("cannot parse `{cell}` in column {}", self.header[col])))
    }

    fn error(&self, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            message,
        }
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut comments = Vec::new();
    let mut lines = text.lines().filter(|l| {
        if l.starts_with('#') {
            comments.push(l.to_string());
            false
        } else {
            !l.is_empty()
        }
    });
    let split = |l: &str| l.split(',').map(str::to_owned).collect::<Vec<_>>();
    let header = lines.next().map(split).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "missing header".into(),
    })?;
    let rows = lines.map(split).collect();
    Ok(CsvTable { path: path.to_path_buf(), comments, header, rows })
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("theta_{i}")))
        .chain((0..n).map(|i| format!("omega_{i}")))
        .collect()
}

/// CSV with header `t,theta_0..theta_{n-1},omega_0..omega_{n-1}`, one row per
/// state, `t = index·dt`.
pub fn export_trajectory(traj: &Trajectory, path: &Path, meta: Option<&ArtifactMeta>) -> Result<()> {
    let Some(first) = traj.states.first() else {
        return Err(Error::Usage("cannot export an empty trajectory".into()));
    };
    let header = trajectory_header(first.n());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = traj.states.iter().enumerate().map(|(i, s)| {
        std::iter::once(fmt_f64(i as f64 * traj.dt))
            .chain(s.theta.iter().chain(&s.omega).map(|&x| fmt_f64(x)))
            .collect()
    });
    write_csv(path, meta, &header, rows)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let table = read_csv(path)?;
    let cols = table.header.len();
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(table.error(format!("bad trajectory header with {cols} columns")));
    }
    let n = (cols - 1) / 2;
    let expected = trajectory_header(n);
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    table.expect_header(&expected)?;

    let mut times = Vec::with_capacity(table.rows.len());
    let mut states = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        if row.len() != cols {
            return Err(table.error(format!("row has {} columns, expected {cols}", row.len())));
        }
        let values: Vec<f64> = (0..cols).map(|c| table.parse(row, c)).collect::<Result<_>>()?;
        times.push(values[0]);
        states.push(GridState {
            theta: values[1..=n].to_vec(),
            omega: values[n + 1..].to_vec(),
        });
    }
    // dt is recovered from the second timestamp (exact, t_1 = 1·dt); NaN for a single state
    let dt = times.get(1).copied().unwrap_or(f64::NAN);
    Ok(Trajectory { dt, states })
}
