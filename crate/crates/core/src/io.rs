//! File formats: trajectory CSV with a JSON sidecar, generic JSON documents,
//! and atomic writes.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly.

use crate::error::{Result, SudsError};
use crate::geometry::{BodyVelocity, GroupElement};
use crate::simulate::{Sample, Trajectory, TrajectoryMeta};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Formats one float so that parsing it back yields the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| SudsError::Parse(format!("line {line}: `{field}` is not a number")))
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| SudsError::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Path of the metadata sidecar belonging to a trajectory CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Column names for a trajectory with `n` shape and `n_a` actuated coordinates.
pub fn trajectory_header(n: usize, n_a: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "t",
        "g.x",
        "g.y",
        "g.theta",
        "ghat.x",
        "ghat.y",
        "ghat.theta",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..n).map(|i| format!("r.{i}")));
    cols.extend((0..n).map(|i| format!("rdot.{i}")));
    cols.extend((0..n_a).map(|i| format!("rref.{i}")));
    cols.extend((0..n_a).map(|i| format!("rdotref.{i}")));
    cols
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let n = traj.meta.dims.n;
    let n_a = traj.meta.dims.n_a;
    let mut out = trajectory_header(n, n_a).join(",");
    out.push('\n');
    for s in &traj.samples {
        let mut fields = vec![
            s.t,
            s.g.x,
            s.g.y,
            s.g.heading,
            s.ghat.vx,
            s.ghat.vy,
            s.ghat.omega_z,
        ];
        fields.extend(s.r.iter());
        fields.extend(s.rdot.iter());
        fields.extend(s.r_ref.iter());
        fields.extend(s.rdot_ref.iter());
        let line: Vec<String> = fields.into_iter().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn trajectory_from_csv(text: &str, meta: TrajectoryMeta) -> Result<Trajectory> {
    let n = meta.dims.n;
    let n_a = meta.dims.n_a;
    let expected = trajectory_header(n, n_a);
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SudsError::Parse("empty trajectory file".into()))?;
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got != expected {
        return Err(SudsError::DimensionMismatch(format!(
            "trajectory header does not match metadata (n = {n}, n_a = {n_a})"
        )));
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| parse_f64(f, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != expected.len() {
            return Err(SudsError::Parse(format!(
                "line {lineno}: expected {} fields, found {}",
                expected.len(),
                vals.len()
            )));
        }
        let seg = |start: usize, len: usize| DVector::from_column_slice(&vals[start..start + len]);
        samples.push(Sample {
            t: vals[0],
            g: GroupElement {
                x: vals[1],
                y: vals[2],
                heading: vals[3],
            },
            ghat: BodyVelocity::new(vals[4], vals[5], vals[6]),
            r: seg(7, n),
            rdot: seg(7 + n, n),
            r_ref: seg(7 + 2 * n, n_a),
            rdot_ref: seg(7 + 2 * n + n_a, n_a),
        });
    }
    Ok(Trajectory { meta, samples })
}

/// Writes `path` (CSV) and its JSON sidecar.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, trajectory_to_csv(traj).as_bytes())?;
    write_json(&sidecar_path(path), &traj.meta)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(SudsError::Parse(format!(
            "missing metadata sidecar {}",
            side.display()
        )));
    }
    let meta: TrajectoryMeta = read_json(&side)?;
    let text = fs::read_to_string(path)?;
    trajectory_from_csv(&text, meta)
}
