//! CSV and JSON files written by runs, and the manifest that lists them.
//!
//! Numbers are written with 17 significant digits, which reproduces every
//! `f64` exactly on read-back. Missing values are written as `nan`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{config_err, Error, Result};
use crate::grid::{Grid, Interval};
use crate::scenarios::{ScenarioConfig, SweepRow};
use crate::solver::{Problem, SolverParams, State};

pub const SERIES_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "mass_outside",
    "l2_error_omega",
    "free_energy",
    "dissipation",
    "weighted_l2",
    "weighted_Q",
    "max_tail",
    "carleman_slack",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}").to_lowercase()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), fmt_f64)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `# key = value` lines describing the grid and scheme of a problem.
pub fn problem_header(problem: &Problem) -> Vec<(String, String)> {
    let mut h = grid_header(&problem.grid);
    h.extend(params_header(&problem.params));
    h.push(("setting".into(), format!("{:?}", problem.potential.setting()).to_lowercase()));
    if let Some(k) = problem.potential.k() {
        h.push(("k".into(), fmt_f64(k)));
    }
    h.push(("degenerate".into(), problem.degenerate.to_string()));
    h.push(("norm".into(), "dx-weighted discrete L2".into()));
    h
}

fn grid_header(grid: &Grid) -> Vec<(String, String)> {
    let bounds: Vec<String> = grid
        .bounds()
        .iter()
        .map(|b| format!("{} {}", fmt_f64(b.lo), fmt_f64(b.hi)))
        .collect();
    vec![
        ("dim".into(), grid.dim().to_string()),
        ("dx".into(), fmt_f64(grid.dx())),
        ("cells".into(), (0..grid.dim()).map(|a| grid.cells(a).to_string()).collect::<Vec<_>>().join(" ")),
        ("bounds".into(), bounds.join("; ")),
    ]
}

fn params_header(p: &SolverParams) -> Vec<(String, String)> {
    vec![
        ("cfl".into(), fmt_f64(p.cfl)),
        ("theta_minmod".into(), fmt_f64(p.theta)),
        ("density_floor".into(), fmt_f64(p.floor)),
        ("dt_init".into(), fmt_f64(p.dt_init)),
    ]
}

fn push_header(out: &mut String, header: &[(String, String)]) {
    for (k, v) in header {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

pub fn write_series(records: &[DiagnosticsRecord], header: &[(String, String)], path: &Path) -> Result<()> {
    let mut s = String::new();
    push_header(&mut s, header);
    s.push_str(&SERIES_COLUMNS.join(","));
    s.push('\n');
    for r in records {
        let row = [
            fmt_f64(r.t),
            fmt_f64(r.mass),
            fmt_f64(r.mass_outside),
            fmt_opt(r.l2_error_omega),
            fmt_f64(r.free_energy),
            fmt_f64(r.dissipation),
            fmt_f64(r.weighted_l2),
            fmt_opt(r.weighted_q),
            fmt_f64(r.max_tail),
            fmt_f64(r.carleman_slack),
        ];
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write_file(path, &s)
}

/// Writes cell centers and one value per cell.
pub fn write_field(
    grid: &Grid,
    values: &[f64],
    name: &str,
    header: &[(String, String)],
    path: &Path,
) -> Result<()> {
    if values.len() != grid.len() {
        return config_err(format!("{} values for a grid of {} cells", values.len(), grid.len()));
    }
    let mut s = String::with_capacity(values.len() * 50);
    push_header(&mut s, &grid_header(grid));
    let rest: Vec<_> = header
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "dim" | "dx" | "cells" | "bounds"))
        .cloned()
        .collect();
    push_header(&mut s, &rest);
    s.push_str(if grid.dim() == 1 { "x," } else { "x,y," });
    s.push_str(name);
    s.push('\n');
    for (idx, &v) in values.iter().enumerate() {
        let p = grid.point(idx);
        if grid.dim() == 1 {
            let _ = writeln!(s, "{},{}", fmt_f64(p[0]), fmt_f64(v));
        } else {
            let _ = writeln!(s, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(v));
        }
    }
    write_file(path, &s)
}

/// Density snapshot; the header carries the time, the grid and the scheme.
pub fn write_snapshot(state: &State, header: &[(String, String)], path: &Path) -> Result<()> {
    let mut h = vec![("t".to_string(), fmt_f64(state.t()))];
    h.extend_from_slice(header);
    write_field(state.grid(), state.values(), "u", &h, path)
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<State> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: String| -> Error { crate::error::ConfigError::new(format!("{}: {m}", path.display())).into() };
    let mut meta = std::collections::HashMap::new();
    let mut values = Vec::new();
    let mut lines = text.lines();
    let mut cols = 0;
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            cols = line.split(',').count();
            break;
        }
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| bad(format!("missing header `{k}`")));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("bad number '{s}': {e}")));
    let dx = num(&get("dx")?)?;
    let t = num(&get("t")?)?;
    let bounds = get("bounds")?
        .split(';')
        .map(|b| {
            let mut it = b.split_whitespace();
            match (it.next(), it.next()) {
                (Some(lo), Some(hi)) => Ok(Interval::new(num(lo)?, num(hi)?)),
                _ => Err(bad(format!("bad bounds '{b}'"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if cols != bounds.len() + 1 {
        return Err(bad(format!("expected {} columns, found {cols}", bounds.len() + 1)));
    }
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or_default();
        values.push(num(last).map_err(|_| bad(format!("row {}: '{line}'", n + 1)))?);
    }
    let grid = Grid::new(&bounds, dx)?;
    State::new(grid, values, t)
}

pub fn write_trace(trace: &[(f64, f64)], header: &[(String, String)], path: &Path) -> Result<()> {
    let mut s = String::new();
    push_header(&mut s, header);
    s.push_str("s,u\n");
    for (a, u) in trace {
        let _ = writeln!(s, "{},{}", fmt_f64(*a), fmt_f64(*u));
    }
    write_file(path, &s)
}

pub fn write_summary(rows: &[SweepRow], header: &[(String, String)], path: &Path) -> Result<()> {
    let mut s = String::new();
    push_header(&mut s, header);
    s.push_str("k,l2_error_omega,l2_norm_outside,mass_outside,status\n");
    for r in rows {
        let status = r.status.replace([',', '\n'], ";");
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.k),
            fmt_opt(r.l2_error_omega),
            fmt_opt(r.l2_norm_outside),
            fmt_opt(r.mass_outside),
            status
        );
    }
    write_file(path, &s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Metadata describing one invocation and every file it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub command: String,
    pub config: ScenarioConfig,
    pub solver: SolverParams,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Tracks files written under one output directory.
#[derive(Debug, Default)]
pub struct FileLog {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl FileLog {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FileLog {
            root: root.into(),
            files: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, remembered for the manifest.
    pub fn path(&mut self, rel: impl AsRef<Path>) -> PathBuf {
        self.files.push(rel.as_ref().to_path_buf());
        self.root.join(rel)
    }

    pub fn entries(&self) -> Result<Vec<FileEntry>> {
        self.files
            .iter()
            .map(|rel| {
                let (sha256, bytes) = sha256_file(&self.root.join(rel))?;
                Ok(FileEntry {
                    path: rel.clone(),
                    sha256,
                    bytes,
                })
            })
            .collect()
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Unsupported(e.to_string()))?;
    write_file(path, &text)
}
