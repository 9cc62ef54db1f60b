//! Plain-text artifacts: CSV matrices with a one-line `# {json}` header,
//! two-column index files, curve and objective tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value exactly.

use std::fmt::Write as _;
use std::path::Path;

use gdd_core::eval::{DistortionCurve, ObjectiveRow};
use gdd_core::lbo::LboBasis;
use gdd_core::{Correspondence, GeodesicBasis, GeodesicDistanceDescriptor};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::error::{GddError, Result};

pub fn format_matrix(header: &Value, m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 20 + 64);
    let _ = writeln!(out, "# {header}");
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(r, c)]);
        }
        out.push('\n');
    }
    out
}

/// Splits the optional `# {json}` first line from the CSV body.
pub fn parse_matrix(path: &Path, text: &str) -> Result<(Value, DMatrix<f64>)> {
    let (header, body, offset) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with('#') => {
            let json = first.trim_start_matches('#').trim();
            let v: Value = serde_json::from_str(json)
                .map_err(|e| GddError::parse(path, 1, format!("bad JSON header: {e}")))?;
            (v, rest, 1)
        }
        _ => (Value::Object(Map::new()), text, 0),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + offset;
            GddError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize) + offset;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(GddError::parse(
                path,
                line,
                format!("expected {} columns, found {}", cols.unwrap(), rec.len()),
            ));
        }
        for field in rec.iter() {
            values.push(
                field.parse::<f64>().map_err(|_| {
                    GddError::parse(path, line, format!("invalid number `{field}`"))
                })?,
            );
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok((header, DMatrix::from_row_slice(rows, cols, &values)))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GddError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GddError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(Value, DMatrix<f64>)> {
    parse_matrix(path, &read_text(path)?)
}

fn header_with(kind: &str, provenance: &Map<String, Value>, extra: Value) -> Value {
    let mut h = provenance.clone();
    h.insert("kind".into(), json!(kind));
    if let Value::Object(extra) = extra {
        h.extend(extra);
    }
    Value::Object(h)
}

fn float_list(path: &Path, header: &Value, key: &str) -> Result<Vec<f64>> {
    header
        .get(key)
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| GddError::parse(path, 1, format!("header lacks a numeric `{key}` list")))
}

fn expect_kind(path: &Path, header: &Value, kinds: &[&str]) -> Result<String> {
    let kind = header.get("kind").and_then(Value::as_str).unwrap_or("");
    if kinds.contains(&kind) {
        Ok(kind.to_string())
    } else {
        Err(GddError::parse(
            path,
            1,
            format!("expected a {} file, found kind `{kind}`", kinds.join("/")),
        ))
    }
}

fn invalid(path: &Path) -> impl FnOnce(gdd_core::Error) -> GddError + '_ {
    move |source| GddError::Invalid {
        path: path.into(),
        source,
    }
}

pub fn format_basis(basis: &GeodesicBasis, provenance: &Map<String, Value>) -> String {
    let h = header_with(
        "basis",
        provenance,
        json!({ "eigenvalues": basis.eigenvalues().as_slice() }),
    );
    format_matrix(&h, basis.q())
}

pub fn read_basis(path: &Path) -> Result<GeodesicBasis> {
    let (h, q) = read_matrix(path)?;
    expect_kind(path, &h, &["basis"])?;
    let eig = float_list(path, &h, "eigenvalues")?;
    GeodesicBasis::new(q, DVector::from_vec(eig)).map_err(invalid(path))
}

/// LBO files mirror basis files; frequencies go under `eigenvalues` and the
/// lumped mass under `mass`.
pub fn format_lbo(basis: &LboBasis, provenance: &Map<String, Value>) -> String {
    let h = header_with(
        "lbo",
        provenance,
        json!({ "eigenvalues": basis.frequencies(), "mass": basis.mass() }),
    );
    format_matrix(&h, basis.phi())
}

pub fn read_lbo(path: &Path) -> Result<LboBasis> {
    let (h, phi) = read_matrix(path)?;
    expect_kind(path, &h, &["lbo"])?;
    let freq = float_list(path, &h, "eigenvalues")?;
    let mass = float_list(path, &h, "mass")?;
    LboBasis::new(phi, freq, mass).map_err(invalid(path))
}

pub enum AnyBasis {
    Geodesic(GeodesicBasis),
    Lbo(LboBasis),
}

pub fn read_any_basis(path: &Path) -> Result<AnyBasis> {
    let (h, _) = read_matrix(path)?;
    match expect_kind(path, &h, &["basis", "lbo"])?.as_str() {
        "basis" => Ok(AnyBasis::Geodesic(read_basis(path)?)),
        _ => Ok(AnyBasis::Lbo(read_lbo(path)?)),
    }
}

pub fn format_gdd(gdd: &GeodesicDistanceDescriptor, provenance: &Map<String, Value>) -> String {
    let h = header_with(
        "gdd",
        provenance,
        json!({ "eigenvalues": gdd.eigenvalues(), "signature": gdd.signature() }),
    );
    format_matrix(&h, gdd.x())
}

pub fn read_gdd(path: &Path) -> Result<GeodesicDistanceDescriptor> {
    let (h, x) = read_matrix(path)?;
    expect_kind(path, &h, &["gdd"])?;
    let eig = float_list(path, &h, "eigenvalues")?;
    let sig = float_list(path, &h, "signature")?
        .into_iter()
        .map(|s| s as i8)
        .collect();
    GeodesicDistanceDescriptor::new(x, sig, eig).map_err(invalid(path))
}

/// Two-column integer CSV. A non-numeric first line is taken as a header;
/// `#` lines are comments.
pub fn parse_pairs(path: &Path, text: &str) -> Result<Vec<(usize, usize)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut pairs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| {
            GddError::parse(
                path,
                e.position().map_or(0, |p| p.line() as usize),
                e.to_string(),
            )
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parsed: Option<Vec<usize>> = rec.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => pairs.push((v[0], v[1])),
            None if i == 0 => {}
            _ => {
                return Err(GddError::parse(
                    path,
                    line,
                    "expected two non-negative integers",
                ))
            }
        }
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    parse_pairs(path, &read_text(path)?)
}

pub fn format_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> String {
    let mut out = String::from("source,target\n");
    for (a, b) in pairs {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

/// Correspondence file: every source in `0..n1` exactly once, any order.
pub fn read_correspondence(path: &Path, n1: usize, n2: usize) -> Result<Correspondence> {
    let pairs = read_pairs(path)?;
    let mut map = vec![usize::MAX; n1];
    for &(s, t) in &pairs {
        if s >= n1 {
            return Err(GddError::parse(
                path,
                0,
                format!("source {s} out of range for {n1} vertices"),
            ));
        }
        if map[s] != usize::MAX {
            return Err(GddError::parse(path, 0, format!("source {s} listed twice")));
        }
        map[s] = t;
    }
    if let Some(missing) = map.iter().position(|&t| t == usize::MAX) {
        return Err(GddError::parse(
            path,
            0,
            format!(
                "source {missing} has no target ({} of {n1} listed)",
                pairs.len()
            ),
        ));
    }
    Correspondence::new(map, n2).map_err(invalid(path))
}

pub fn format_correspondence(corr: &Correspondence) -> String {
    format_pairs(corr.map().iter().copied().enumerate())
}

pub fn format_curve(curve: &DistortionCurve) -> String {
    let mut out = String::from("threshold,fraction\n");
    for (t, f) in curve.thresholds.iter().zip(&curve.fractions) {
        let _ = writeln!(out, "{t},{f}");
    }
    out
}

pub fn format_objective(rows: &[ObjectiveRow]) -> String {
    let mut out = String::from("name,rms,raw_sq_sum\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.name, r.rms, r.raw_sq_sum);
    }
    out
}
