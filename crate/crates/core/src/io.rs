//! Plain-text nodal tables and CSV outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a table
//! read back reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::helmholtz::ComplexField;
use crate::mesh::Mesh;
use crate::optimizer::OptRecord;
use crate::uq::{location_histogram, peak_histogram, UqSummary};

/// Complex nodal field: `index x y re im abs2`.
pub fn write_complex_field<W: Write>(mut out: W, mesh: &Mesh, field: &ComplexField) -> Result<()> {
    check_len(mesh, field.len())?;
    writeln!(out, "# index x y re im abs2")?;
    for (v, z) in field.values().iter().enumerate() {
        let [x, y] = mesh.to_physical(mesh.vertex(v));
        writeln!(out, "{v} {x:e} {y:e} {:e} {:e} {:e}", z.re, z.im, z.norm_sqr())?;
    }
    Ok(())
}

/// Real nodal field: `index x y <name>`.
pub fn write_real_field<W: Write>(mut out: W, mesh: &Mesh, name: &str, values: &[f64]) -> Result<()> {
    check_len(mesh, values.len())?;
    writeln!(out, "# index x y {name}")?;
    for (v, val) in values.iter().enumerate() {
        let [x, y] = mesh.to_physical(mesh.vertex(v));
        writeln!(out, "{v} {x:e} {y:e} {val:e}")?;
    }
    Ok(())
}

/// Reads the value column of a real nodal table; rows must be numbered `0..n`.
pub fn read_real_field<R: BufRead>(input: R, num_vertices: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(num_vertices);
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { path: format!("line {}", lineno + 1), message };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let index: usize = cols[0].parse().map_err(|e| bad(format!("index: {e}")))?;
        if index != values.len() {
            return Err(bad(format!("expected vertex {}, found {index}", values.len())));
        }
        let value: f64 = cols[3].parse().map_err(|e| bad(format!("value: {e}")))?;
        values.push(value);
    }
    if values.len() != num_vertices {
        return Err(Error::LengthMismatch { expected: num_vertices, got: values.len() });
    }
    Ok(values)
}

pub fn read_real_field_file(path: &Path, num_vertices: usize) -> Result<Vec<f64>> {
    let file = File::open(path)?;
    read_real_field(std::io::BufReader::new(file), num_vertices).map_err(|e| match e {
        Error::Parse { path: at, message } => {
            Error::Parse { path: format!("{}: {at}", path.display()), message }
        }
        other => other,
    })
}

fn check_len(mesh: &Mesh, len: usize) -> Result<()> {
    if len != mesh.num_vertices() {
        return Err(Error::LengthMismatch { expected: mesh.num_vertices(), got: len });
    }
    Ok(())
}

/// Writes `f` to a buffered file at `path`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut out = BufWriter::new(File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Optimization trace CSV, flushed after every row.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub const HEADER: &'static str = "iteration,J,mean,variance,penalty,grad_norm,step,backtracks";

    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn record(&mut self, r: &OptRecord) -> Result<()> {
        let [mean, var, pen] = r.terms.unwrap_or([f64::NAN; 3]);
        writeln!(
            self.out,
            "{},{:e},{mean:e},{var:e},{pen:e},{:e},{:e},{}",
            r.iteration, r.value, r.grad_norm, r.step, r.backtracks
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// Per-realization UQ report; an undefined FWHM is left empty.
pub fn write_uq_report<W: Write>(mut out: W, summary: &UqSummary) -> Result<()> {
    writeln!(out, "realization,seed,peak_x,peak_y,peak_value,fwhm")?;
    for r in &summary.realizations {
        let f = r.features;
        let fwhm = f.fwhm.map(|w| format!("{w:e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{fwhm}",
            r.index, r.seed, f.location[0], f.location[1], f.peak
        )?;
    }
    Ok(())
}

/// Mean and plug-in variance of peak location and value.
pub fn write_uq_summary<W: Write>(mut out: W, summary: &UqSummary) -> Result<()> {
    writeln!(out, "statistic,peak_x,peak_y,peak_value")?;
    let [mx, my, mv] = summary.mean;
    let [vx, vy, vv] = summary.variance;
    writeln!(out, "mean,{mx:e},{my:e},{mv:e}")?;
    writeln!(out, "variance,{vx:e},{vy:e},{vv:e}")?;
    Ok(())
}

pub fn write_location_histogram<W: Write>(mut out: W, summary: &UqSummary) -> Result<()> {
    writeln!(out, "vertex,x,y,count")?;
    for (v, [x, y], count) in location_histogram(summary) {
        writeln!(out, "{v},{x:e},{y:e},{count}")?;
    }
    Ok(())
}

pub fn write_peak_histogram<W: Write>(mut out: W, summary: &UqSummary, bins: usize) -> Result<()> {
    writeln!(out, "lo,hi,count")?;
    for b in peak_histogram(summary, bins) {
        writeln!(out, "{:e},{:e},{}", b.lo, b.hi, b.count)?;
    }
    Ok(())
}
