//! Binary field and trajectory files, JSON metadata, CSV tables.
//!
//! Field record, all little-endian: `d: u64`, `L: f64`, `n: u64`, then `n^d`
//! pairs `(re: f64, im: f64)` in row-major order (last axis fastest).
//! Trajectory file: `count: u64`, then per sample `t: f64` and a field record.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, SpectralField, Trajectory};

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_field_to(w: &mut impl Write, f: &SpectralField) -> Result<()> {
    let g = f.grid();
    w.write_all(&(g.dim() as u64).to_le_bytes())?;
    w.write_all(&g.half_period().to_le_bytes())?;
    w.write_all(&(g.points() as u64).to_le_bytes())?;
    for z in f.values() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_from(r: &mut impl Read) -> Result<SpectralField> {
    let d = read_u64(r)?;
    let l = read_f64(r)?;
    let n = read_u64(r)?;
    if d == 0 || d > 3 || n == 0 || n > (1 << 20) {
        return Err(Error::Format(format!("implausible header d = {d}, n = {n}")));
    }
    let grid = GridSpec::new(d as usize, l, n as usize)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        values.push(C64::new(re, im));
    }
    SpectralField::from_values(grid, values)
}

pub fn write_field(path: &Path, f: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    read_field_from(&mut BufReader::new(File::open(path)?))
}

pub fn write_trajectory(path: &Path, u: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(u.len() as u64).to_le_bytes())?;
    for (t, f) in u.times().iter().zip(u.fields()) {
        w.write_all(&t.to_le_bytes())?;
        write_field_to(&mut w, f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut r = BufReader::new(File::open(path)?);
    let count = read_u64(&mut r)?;
    if count == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for _ in 0..count {
        times.push(read_f64(&mut r)?);
        fields.push(read_field_from(&mut r)?);
    }
    Trajectory::new(times, fields)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldMetadata {
    pub dim: usize,
    pub half_period: f64,
    pub periods: u32,
    pub points: usize,
    pub l2_norm: f64,
    pub sup_norm: f64,
}

pub fn field_metadata(f: &SpectralField) -> Result<FieldMetadata> {
    let g = f.grid();
    Ok(FieldMetadata {
        dim: g.dim(),
        half_period: g.half_period(),
        periods: g.periods(),
        points: g.points(),
        l2_norm: f.lp_norm(crate::spectral::Exponent::Finite(2.0))?,
        sup_norm: f.lp_norm(crate::spectral::Exponent::Infinity)?,
    })
}

/// `|f|` per grid point with coordinates, one row per point.
pub fn write_abs_csv(path: &Path, f: &SpectralField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = f.grid();
    let header: Vec<String> = (0..g.dim()).map(|a| format!("x{}", a + 1)).chain(["abs".to_string()]).collect();
    writeln!(w, "{}", header.join(","))?;
    let values = f.values();
    let mut err = None;
    g.for_each_point(|i, x| {
        let coords: Vec<String> = x.iter().map(|c| format!("{c:.17e}")).collect();
        if let Err(e) = writeln!(w, "{},{:.17e}", coords.join(","), values[i].norm()) {
            err.get_or_insert(e);
        }
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

/// Plain CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
