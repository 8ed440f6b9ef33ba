//! Mesh export (OBJ, CSV), CSV import and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, GridSpec, ImmersionGrid};
use crate::loopalgebra::{Vec3, IMAG_TOL};
use crate::report::VerificationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Csv,
}

impl FromStr for MeshFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "csv" => Ok(MeshFormat::Csv),
            other => Err(Error::BadArgument(format!("unknown mesh format {other:?}"))),
        }
    }
}

impl MeshFormat {
    /// From a file extension, defaulting to OBJ.
    pub fn from_path(p: &Path) -> MeshFormat {
        match p.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MeshFormat::Csv,
            _ => MeshFormat::Obj,
        }
    }
}

/// Real coordinates; imaginary parts must be below `IMAG_TOL` relative to
/// the surface scale.
fn real_points(x: &ImmersionGrid) -> Result<Grid<Option<[f64; 3]>>> {
    let scale = x
        .x
        .data
        .iter()
        .filter(|p| p.is_finite())
        .map(|p| p.max_abs())
        .fold(1.0, f64::max);
    let mi = x.max_imag();
    if mi > IMAG_TOL * scale {
        return Err(Error::NonRealOutput { max_imag: mi });
    }
    Ok(x.x.map(|p| if p.is_finite() { Some(p.re_parts()) } else { None }))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn obj_string(x: &ImmersionGrid) -> Result<String> {
    let sp = x.spec();
    let pts = real_points(x)?;
    let valid = pts.data.iter().filter(|p| p.is_some()).count();
    if valid < 4 {
        return Err(Error::EmptyGrid);
    }
    let mut out = String::new();
    let mut index = vec![0usize; sp.len()];
    let mut next = 1;
    for (k, p) in pts.data.iter().enumerate() {
        if let Some([a, b, c]) = p {
            writeln!(out, "v {} {} {}", num(*a), num(*b), num(*c)).unwrap();
            index[k] = next;
            next += 1;
        }
    }
    for i in 0..sp.nu - 1 {
        for j in 0..sp.nv - 1 {
            let a = index[sp.index(i, j)];
            let b = index[sp.index(i + 1, j)];
            let c = index[sp.index(i + 1, j + 1)];
            let d = index[sp.index(i, j + 1)];
            if a == 0 || b == 0 || c == 0 || d == 0 {
                continue;
            }
            writeln!(out, "f {a} {b} {c}").unwrap();
            writeln!(out, "f {a} {c} {d}").unwrap();
        }
    }
    Ok(out)
}

pub fn csv_string(x: &ImmersionGrid) -> Result<String> {
    let sp = x.spec();
    let pts = real_points(x)?;
    if pts.data.iter().filter(|p| p.is_some()).count() < 4 {
        return Err(Error::EmptyGrid);
    }
    let mut out = String::from("u,v,x,y,z,h\n");
    for i in 0..sp.nu {
        for j in 0..sp.nv {
            let h = x.h.get(i, j).re;
            let h = if h.is_finite() { num(h) } else { String::new() };
            let xyz = match pts.get(i, j) {
                Some([a, b, c]) => format!("{},{},{}", num(*a), num(*b), num(*c)),
                None => ",,".to_string(),
            };
            writeln!(out, "{},{},{xyz},{h}", num(sp.u(i)), num(sp.v(j))).unwrap();
        }
    }
    Ok(out)
}

pub fn export_mesh(x: &ImmersionGrid, path: &Path, format: MeshFormat) -> Result<()> {
    let s = match format {
        MeshFormat::Obj => obj_string(x)?,
        MeshFormat::Csv => csv_string(x)?,
    };
    fs::write(path, s)?;
    Ok(())
}

fn parse_field(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Io(format!("line {line}: {e}")))
}

/// Reads a CSV written by [`export_mesh`]; returns `X` (NaN where masked)
/// and `h`.
pub fn parse_csv(text: &str) -> Result<(Grid<Vec3>, Grid<f64>)> {
    let mut lines = text.lines();
    if lines.next() != Some("u,v,x,y,z,h") {
        return Err(Error::Io("missing CSV header".into()));
    }
    let mut rows = Vec::new();
    for (n, l) in lines.enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Io(format!("line {}: expected 6 fields", n + 2)));
        }
        let mut vals = [None; 6];
        for (k, s) in f.iter().enumerate() {
            vals[k] = parse_field(s, n + 2)?;
        }
        rows.push(vals);
    }
    let u0 = rows.first().and_then(|r| r[0]).ok_or(Error::EmptyGrid)?;
    let nv = rows.iter().take_while(|r| r[0] == Some(u0)).count();
    if nv < 2 || rows.len() % nv != 0 || rows.len() / nv < 2 {
        return Err(Error::Io("rows do not form a rectangular grid".into()));
    }
    let nu = rows.len() / nv;
    let last = rows[rows.len() - 1];
    let (u1, v0, v1) = (
        last[0].ok_or(Error::EmptyGrid)?,
        rows[0][1].ok_or(Error::EmptyGrid)?,
        last[1].ok_or(Error::EmptyGrid)?,
    );
    let sp = GridSpec::new(Domain::new(u0, u1, v0, v1)?, nu, nv)?;
    let x = Grid::from_fn(sp, |i, j, _, _| {
        let r = rows[sp.index(i, j)];
        match (r[2], r[3], r[4]) {
            (Some(a), Some(b), Some(c)) => Vec3::real(a, b, c),
            _ => Vec3::nan(),
        }
    });
    let h = Grid::from_fn(sp, |i, j, _, _| rows[sp.index(i, j)][5].unwrap_or(f64::NAN));
    Ok((x, h))
}

pub fn import_csv(path: &Path) -> Result<(Grid<Vec3>, Grid<f64>)> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn write_report(r: &VerificationReport, path: &Path) -> Result<()> {
    let mut s = r.to_json();
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
