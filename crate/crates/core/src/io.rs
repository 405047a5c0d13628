//! File formats: IV curves, junction records, headered ASCII grids, PGM.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! table read back through these readers reproduces the written values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::simmons::IvCurve;

/// One measured or simulated junction.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionIvData {
    pub junction_id: String,
    pub wafer: Option<(i64, i64)>,
    pub curve: IvCurve<f64>,
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        msg: msg.into(),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} '{raw}'")))
}

fn ordered_curve(path: &Path, id: &str, mut pts: Vec<(f64, f64)>) -> Result<IvCurve<f64>> {
    if pts.len() >= 2 && pts[1].0 < pts[0].0 {
        pts.reverse();
    }
    if let Some(w) = pts.windows(2).find(|w| !(w[1].0 > w[0].0)) {
        return Err(parse_err(
            path,
            0,
            format!(
                "junction '{id}': voltages must be strictly monotone (at {} V then {} V)",
                w[0].0, w[1].0
            ),
        ));
    }
    IvCurve::new(pts)
}

/// Reads `voltage_V,current_A` (one junction, id from the file stem) or the
/// long format with a `junction_id` column and optional `wafer_x,wafer_y`.
/// Junctions are returned in order of first appearance.
pub fn read_iv_csv(path: &Path) -> Result<Vec<JunctionIvData>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(iv_v), Some(iv_i)) = (col("voltage_V"), col("current_A")) else {
        return Err(parse_err(path, 1, "header must contain voltage_V and current_A"));
    };
    let id_col = col("junction_id");
    let (wx, wy) = (col("wafer_x"), col("wafer_y"));
    let default_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut order: Vec<String> = Vec::new();
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut wafer: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| rec.get(i).ok_or_else(|| parse_err(path, line, "missing field"));
        let v: f64 = parse_field(path, line, "voltage_V", get(iv_v)?)?;
        let i: f64 = parse_field(path, line, "current_A", get(iv_i)?)?;
        if !v.is_finite() || !i.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        let id = match id_col {
            Some(c) => get(c)?.to_string(),
            None => default_id.clone(),
        };
        if id.is_empty() {
            return Err(parse_err(path, line, "empty junction_id"));
        }
        if let (Some(cx), Some(cy)) = (wx, wy) {
            let (sx, sy) = (get(cx)?, get(cy)?);
            if !sx.is_empty() && !sy.is_empty() {
                let xy = (
                    parse_field(path, line, "wafer_x", sx)?,
                    parse_field(path, line, "wafer_y", sy)?,
                );
                if let Some(prev) = wafer.insert(id.clone(), xy) {
                    if prev != xy {
                        return Err(parse_err(
                            path,
                            line,
                            format!("junction '{id}' has inconsistent wafer coordinates"),
                        ));
                    }
                }
            }
        }
        let entry = points.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        entry.push((v, i));
    }
    if order.is_empty() {
        return Err(Error::InvalidInput(format!("{} contains no IV data", path.display())));
    }
    order
        .into_iter()
        .map(|id| {
            let pts = points.remove(&id).unwrap();
            let curve = ordered_curve(path, &id, pts)?;
            Ok(JunctionIvData {
                wafer: wafer.get(&id).copied(),
                junction_id: id,
                curve,
            })
        })
        .collect()
}

/// Writes the long format read by [`read_iv_csv`].
pub fn write_iv_csv(path: &Path, data: &[JunctionIvData]) -> Result<()> {
    let with_wafer = data.iter().any(|d| d.wafer.is_some());
    let mut w = csv::Writer::from_path(path)?;
    if with_wafer {
        w.write_record(["junction_id", "wafer_x", "wafer_y", "voltage_V", "current_A"])?;
    } else {
        w.write_record(["junction_id", "voltage_V", "current_A"])?;
    }
    for d in data {
        let (x, y) = d.wafer.map(|(x, y)| (x.to_string(), y.to_string())).unwrap_or_default();
        for &(v, i) in d.curve.points() {
            if with_wafer {
                w.write_record([d.junction_id.as_str(), &x, &y, &v.to_string(), &i.to_string()])?;
            } else {
                w.write_record([d.junction_id.as_str(), &v.to_string(), &i.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Fit summary of one junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionRecord {
    pub junction_id: String,
    pub wafer_x: Option<i64>,
    pub wafer_y: Option<i64>,
    /// Ω.
    pub resistance_ohm: Option<f64>,
    /// nm.
    pub t_fit_nm: Option<f64>,
    /// V.
    #[serde(rename = "phi_fit_V")]
    pub phi_fit_v: Option<f64>,
    /// V.
    #[serde(rename = "v_bd_V")]
    pub v_bd_v: Option<f64>,
    /// Simmons residual norm, A.
    pub residual: Option<f64>,
    pub converged: bool,
}

pub fn write_records(path: &Path, records: &[JunctionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "junction_id",
            "wafer_x",
            "wafer_y",
            "resistance_ohm",
            "t_fit_nm",
            "phi_fit_V",
            "v_bd_V",
            "residual",
            "converged",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<JunctionRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: Vec<JunctionRecord> = Vec::new();
    for rec in rdr.deserialize() {
        let rec: JunctionRecord = rec?;
        if out.iter().any(|r| r.junction_id == rec.junction_id) {
            return Err(Error::InvalidInput(format!(
                "duplicate junction_id '{}'",
                rec.junction_id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes a plain CSV table.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `pixel_size_nm`, `width` and `height` header lines followed by one
/// whitespace-separated line per row.
pub fn write_grid(path: &Path, pixel_size: f64, grid: &Grid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "pixel_size_nm {pixel_size}")?;
    writeln!(w, "width {}", grid.width())?;
    writeln!(w, "height {}", grid.height())?;
    for y in 0..grid.height() {
        let row: Vec<String> = grid.row(y).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_grid`]. Blank lines and `#` comments
/// are ignored.
pub fn read_grid(path: &Path) -> Result<(f64, Grid)> {
    let reader = BufReader::new(File::open(path)?);
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let first = parts.next().unwrap();
        if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !matches!(first, "inf" | "nan" | "NaN") {
            let value = parts
                .next()
                .ok_or_else(|| parse_err(path, line_no, format!("header '{first}' has no value")))?;
            if parts.next().is_some() {
                return Err(parse_err(path, line_no, "header lines take one value"));
            }
            header.insert(first.to_string(), (n + 1, value.to_string()));
            continue;
        }
        let w = *width.get_or_insert_with(|| header.get("width").and_then(|(_, v)| v.parse().ok()).unwrap_or(0));
        let before = data.len();
        for tok in body.split_whitespace() {
            let v: f64 = parse_field(path, line_no, "grid value", tok)?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no, "non-finite grid value"));
            }
            data.push(v);
        }
        if data.len() - before != w {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {w} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    let get = |key: &str| -> Result<(usize, String)> {
        header
            .get(key)
            .cloned()
            .ok_or_else(|| parse_err(path, 0, format!("missing '{key}' header")))
    };
    let (l, ps) = get("pixel_size_nm")?;
    let pixel_size: f64 = parse_field(path, l as u64, "pixel_size_nm", &ps)?;
    let (l, w) = get("width")?;
    let w: usize = parse_field(path, l as u64, "width", &w)?;
    let (l, h) = get("height")?;
    let h: usize = parse_field(path, l as u64, "height", &h)?;
    if rows != h {
        return Err(parse_err(path, 0, format!("expected {h} rows, found {rows}")));
    }
    if !(pixel_size > 0.0) {
        return Err(parse_err(path, 0, "pixel_size_nm must be positive"));
    }
    Ok((pixel_size, Grid::from_vec(w, h, data)?))
}

/// 16-bit binary PGM, linearly scaled from the grid's range to `[0, 65535]`.
/// Row 0 of the grid is written last so that larger row indices appear on top.
pub fn write_pgm16(path: &Path, grid: &Grid) -> Result<()> {
    let (lo, hi) = crate::stats::min_max(grid.data()).unwrap_or((0.0, 0.0));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n65535\n", grid.width(), grid.height())?;
    for y in (0..grid.height()).rev() {
        for &v in grid.row(y) {
            let q = (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
            w.write_all(&q.to_be_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
