//! CSV formats for coefficient fields and trajectory datasets.
//!
//! Coefficients: a first row `dy,m,dx,L`, then `dy` rows of `m`
//! coefficients each, written with 17 significant digits.
//!
//! Datasets: a header `t,x_1,..,x_dx,y_1,..,y_dy` and one row per sample.
//! The time index restarts at 0 at the beginning of each trajectory.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::data_process::{Trajectory, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::fourier_space::{Cube, FourierBasis, FourierCoeffs};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path.display().to_string(), source),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{}: '{field}' is not a number", path.display())))
}

fn parse_usize(path: &Path, field: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{}: '{field}' is not a non-negative integer", path.display())))
}

/// 17 significant digits in scientific notation.
fn sci17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_coeffs(f: &FourierCoeffs, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let z = f.coeffs();
    let header = [
        z.nrows().to_string(),
        z.ncols().to_string(),
        f.cube().dim().to_string(),
        sci17(f.cube().half_width()),
    ];
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in z.row_iter() {
        w.write_record(row.iter().map(|v| sci17(*v))).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_coeffs(path: &Path) -> Result<FourierCoeffs> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut records = r.records();
    let head = records
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty coefficient file", path.display())))?
        .map_err(|e| csv_err(path, e))?;
    if head.len() != 4 {
        return Err(Error::Config(format!("{}: first row must be dy,m,dx,L", path.display())));
    }
    let dy = parse_usize(path, &head[0])?;
    let m = parse_usize(path, &head[1])?;
    let dx = parse_usize(path, &head[2])?;
    let half_width = parse_f64(path, &head[3])?;
    let mut values = Vec::with_capacity(dy * m);
    for rec in records {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != m {
            return Err(Error::Config(format!(
                "{}: coefficient row has {} entries, expected {m}",
                path.display(),
                rec.len()
            )));
        }
        for field in rec.iter() {
            values.push(parse_f64(path, field)?);
        }
    }
    if values.len() != dy * m {
        return Err(Error::Config(format!(
            "{}: expected {dy} coefficient rows, found {}",
            path.display(),
            values.len() / m.max(1)
        )));
    }
    let basis = Arc::new(FourierBasis::new(Cube::new(dx, half_width)?, m)?);
    FourierCoeffs::new(basis, DMatrix::from_row_slice(dy, m, &values))
}

pub fn write_dataset(data: &TrajectoryDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let (dx, dy) = (data.input_dim(), data.output_dim());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dx).map(|i| format!("x_{i}")))
        .chain((1..=dy).map(|i| format!("y_{i}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for tr in data.trajectories() {
        for (t, (x, y)) in tr.inputs().zip(tr.targets()).enumerate() {
            let row = std::iter::once(t.to_string()).chain(x.iter().chain(y).map(|v| sci17(*v)));
            w.write_record(row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_dataset(path: &Path) -> Result<TrajectoryDataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let dx = header.iter().filter(|h| h.trim().starts_with("x_")).count();
    let dy = header.iter().filter(|h| h.trim().starts_with("y_")).count();
    if header.get(0).map(str::trim) != Some("t") || dx == 0 || dy == 0 || header.len() != 1 + dx + dy {
        return Err(Error::Config(format!(
            "{}: header must be t,x_1..x_dx,y_1..y_dy",
            path.display()
        )));
    }
    let mut trajectories = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut expected_t = 0usize;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let t = parse_usize(path, &rec[0])?;
        if t == 0 && expected_t > 0 {
            trajectories.push(Trajectory::new(dx, dy, std::mem::take(&mut xs), std::mem::take(&mut ys), None)?);
        } else if t != expected_t {
            return Err(Error::Config(format!(
                "{}: time index {t} where {expected_t} or 0 was expected",
                path.display()
            )));
        }
        for (i, field) in rec.iter().enumerate().skip(1) {
            let v = parse_f64(path, field)?;
            if i <= dx {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
        expected_t = t + 1;
    }
    if !xs.is_empty() {
        trajectories.push(Trajectory::new(dx, dy, xs, ys, None)?);
    }
    TrajectoryDataset::new(trajectories)
}
