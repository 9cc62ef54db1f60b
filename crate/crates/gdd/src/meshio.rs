//! OFF, ASCII PLY and OBJ triangle meshes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use gdd_core::TriangleMesh;

use crate::error::{GddError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    PlyAscii,
    Obj,
}

impl MeshFormat {
    /// Guesses from the file extension.
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "ply" | "ply-ascii" => Ok(MeshFormat::PlyAscii),
            "obj" => Ok(MeshFormat::Obj),
            other => Err(format!(
                "unknown mesh format `{other}` (expected off, ply or obj)"
            )),
        }
    }
}

/// Raw parse failure with a 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

type Parsed = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn err<T>(line: usize, msg: impl Into<String>) -> std::result::Result<T, ParseError> {
    Err(ParseError {
        line,
        msg: msg.into(),
    })
}

fn number<T: FromStr>(tok: &str, line: usize, what: &str) -> std::result::Result<T, ParseError> {
    tok.parse()
        .or_else(|_| err(line, format!("invalid {what} `{tok}`")))
}

/// Non-empty lines with `#` comments stripped, paired with line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_off(text: &str) -> std::result::Result<Parsed, ParseError> {
    let mut lines = data_lines(text);
    let Some((hline, header)) = lines.next() else {
        return err(1, "empty file");
    };
    let mut toks: Vec<&str> = header.split_whitespace().collect();
    if toks[0] != "OFF" {
        return err(hline, format!("expected `OFF`, found `{}`", toks[0]));
    }
    toks.remove(0);
    let mut count_line = hline;
    if toks.is_empty() {
        let Some((l, rest)) = lines.next() else {
            return err(hline, "missing vertex/face counts");
        };
        count_line = l;
        toks = rest.split_whitespace().collect();
    }
    if toks.len() < 2 {
        return err(count_line, "expected `<vertices> <faces> <edges>`");
    }
    let n: usize = number(toks[0], count_line, "vertex count")?;
    let m: usize = number(toks[1], count_line, "face count")?;
    let body: Vec<(usize, &str)> = lines.collect();
    if body.len() < n + m {
        let last = body.last().map_or(count_line, |b| b.0);
        let (vs, fs) = (body.len().min(n), body.len().saturating_sub(n));
        return err(
            last,
            format!(
                "header declares {n} vertices and {m} faces but only {} data lines follow \
                 ({vs} vertex, {fs} face; short by {})",
                body.len(),
                n + m - body.len()
            ),
        );
    }
    let mut vertices = Vec::with_capacity(n);
    for &(l, s) in &body[..n] {
        let t: Vec<&str> = s.split_whitespace().collect();
        if t.len() < 3 {
            return err(
                l,
                format!("vertex {} has {} coordinates", vertices.len(), t.len()),
            );
        }
        vertices.push([
            number(t[0], l, "coordinate")?,
            number(t[1], l, "coordinate")?,
            number(t[2], l, "coordinate")?,
        ]);
    }
    let mut faces = Vec::with_capacity(m);
    for &(l, s) in &body[n..n + m] {
        let t: Vec<&str> = s.split_whitespace().collect();
        let k: usize = number(t[0], l, "face size")?;
        if k != 3 {
            return err(
                l,
                format!(
                    "face {} has {k} vertices; only triangles are supported",
                    faces.len()
                ),
            );
        }
        if t.len() < 4 {
            return err(
                l,
                format!("face {} lists {} indices", faces.len(), t.len() - 1),
            );
        }
        faces.push([
            number(t[1], l, "index")?,
            number(t[2], l, "index")?,
            number(t[3], l, "index")?,
        ]);
    }
    if let Some(&(l, _)) = body.get(n + m) {
        return err(l, format!("unexpected data after {m} faces"));
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    line: usize,
    props: Vec<String>,
    list_prop: Option<String>,
}

pub fn parse_ply(text: &str) -> std::result::Result<Parsed, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return err(1, "expected `ply` magic"),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ended = false;
    for (l, s) in lines.by_ref() {
        let t: Vec<&str> = s.split_whitespace().collect();
        match t.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => match t.get(1).copied() {
                Some("ascii") => {}
                Some(f) if f.starts_with("binary") => {
                    return err(
                        l,
                        format!("binary PLY ({f}) is not supported; convert to ascii"),
                    )
                }
                _ => return err(l, "unrecognised format line"),
            },
            Some("element") => {
                if t.len() != 3 {
                    return err(l, "expected `element <name> <count>`");
                }
                elements.push(PlyElement {
                    name: t[1].to_string(),
                    count: number(t[2], l, "element count")?,
                    line: l,
                    props: Vec::new(),
                    list_prop: None,
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return err(l, "property before any element");
                };
                if t.get(1) == Some(&"list") {
                    if t.len() != 5 {
                        return err(
                            l,
                            "expected `property list <count type> <index type> <name>`",
                        );
                    }
                    el.list_prop = Some(t[4].to_string());
                } else if t.len() == 3 {
                    el.props.push(t[2].to_string());
                } else {
                    return err(l, "expected `property <type> <name>`");
                }
            }
            Some("end_header") => {
                ended = true;
                break;
            }
            Some(other) => return err(l, format!("unknown header keyword `{other}`")),
        }
    }
    if !ended {
        return err(text.lines().count(), "missing `end_header`");
    }
    let mut body = lines.filter(|(_, s)| !s.is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let axes: Vec<Option<usize>> = ["x", "y", "z"]
            .iter()
            .map(|a| el.props.iter().position(|p| p == a))
            .collect();
        for i in 0..el.count {
            let Some((l, s)) = body.next() else {
                return err(
                    el.line,
                    format!(
                        "element `{}` declares {} entries but the file ends after {i}",
                        el.name, el.count
                    ),
                );
            };
            let t: Vec<&str> = s.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let mut p = [0.0; 3];
                    for (d, axis) in axes.iter().enumerate() {
                        let Some(col) = axis else {
                            return err(el.line, "vertex element lacks x, y or z");
                        };
                        let Some(tok) = t.get(*col) else {
                            return err(l, format!("vertex {i} has {} values", t.len()));
                        };
                        p[d] = number(tok, l, "coordinate")?;
                    }
                    vertices.push(p);
                }
                "face" => {
                    if el.list_prop.is_none() {
                        return err(el.line, "face element has no index list");
                    }
                    let k: usize = number(t.first().copied().unwrap_or(""), l, "face size")?;
                    if k != 3 {
                        return err(
                            l,
                            format!("face {i} has {k} vertices; only triangles are supported"),
                        );
                    }
                    if t.len() < 4 {
                        return err(l, format!("face {i} lists {} indices", t.len() - 1));
                    }
                    faces.push([
                        number(t[1], l, "index")?,
                        number(t[2], l, "index")?,
                        number(t[3], l, "index")?,
                    ]);
                }
                _ => {}
            }
        }
    }
    if let Some((l, _)) = body.next() {
        return err(l, "unexpected data after the last element");
    }
    Ok((vertices, faces))
}

pub fn parse_obj(text: &str) -> std::result::Result<Parsed, ParseError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (l, s) in data_lines(text) {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return err(
                        l,
                        format!("vertex {} has {} coordinates", vertices.len(), c.len()),
                    );
                }
                vertices.push([
                    number(c[0], l, "coordinate")?,
                    number(c[1], l, "coordinate")?,
                    number(c[2], l, "coordinate")?,
                ]);
            }
            Some("f") => {
                let refs: Vec<&str> = t.collect();
                if refs.len() != 3 {
                    return err(
                        l,
                        format!(
                            "face {} has {} vertices; only triangles are supported",
                            faces.len(),
                            refs.len()
                        ),
                    );
                }
                let mut f = [0usize; 3];
                for (slot, r) in refs.iter().enumerate() {
                    let head = r.split('/').next().unwrap_or("");
                    let idx: i64 = number(head, l, "index")?;
                    // 1-based; negative counts back from the latest vertex
                    let resolved = if idx > 0 {
                        idx - 1
                    } else {
                        vertices.len() as i64 + idx
                    };
                    if idx == 0 || resolved < 0 {
                        return err(l, format!("face index {idx} out of range"));
                    }
                    f[slot] = resolved as usize;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> std::result::Result<Parsed, ParseError> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::PlyAscii => parse_ply(text),
        MeshFormat::Obj => parse_obj(text),
    }
}

/// Reads and validates a mesh. `format = None` guesses from the extension.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriangleMesh> {
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| {
            GddError::Usage(format!(
                "cannot tell the mesh format of {}; pass it explicitly",
                path.display()
            ))
        })?;
    let bytes = std::fs::read(path).map_err(|e| GddError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        GddError::parse(
            path,
            line,
            "not valid UTF-8 text (binary files are not supported)",
        )
    })?;
    let (vertices, faces) =
        parse_mesh(text, format).map_err(|e| GddError::parse(path, e.line, e.msg))?;
    TriangleMesh::new(vertices, faces).map_err(|source| GddError::Invalid {
        path: path.into(),
        source,
    })
}

pub fn format_mesh(mesh: &TriangleMesh, format: MeshFormat) -> String {
    let mut out = String::new();
    let (n, m) = (mesh.n_vertices(), mesh.n_faces());
    match format {
        MeshFormat::Off => {
            let _ = writeln!(out, "OFF\n{n} {m} 0");
            for p in mesh.vertices() {
                let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::PlyAscii => {
            let _ = write!(
                out,
                "ply\nformat ascii 1.0\nelement vertex {n}\nproperty double x\nproperty double y\n\
                 property double z\nelement face {m}\nproperty list uchar int vertex_indices\nend_header\n"
            );
            for p in mesh.vertices() {
                let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            for p in mesh.vertices() {
                let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    out
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<()> {
    std::fs::write(path, format_mesh(mesh, format)).map_err(|e| GddError::io(path, e))
}
