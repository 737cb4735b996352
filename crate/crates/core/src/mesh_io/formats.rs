//! OFF / OBJ / ASCII PLY readers and OFF / colored PLY writers.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{FssError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> FssError {
    FssError::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("expected a number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected an index, found {tok:?}")))
}

/// Non-empty lines with `#` comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Reads an OFF file. Only triangular faces are accepted; trailing per-face
/// color values are ignored.
pub fn read_off(text: &str) -> Result<TriMesh> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("OFF") {
        return Err(parse_err(hline, "missing OFF header"));
    }
    let rest: Vec<&str> = head.collect();
    let (cline, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| parse_err(hline, "missing counts line"))?;
        (l, c.split_whitespace().collect())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(cline, "counts line needs vertex and face counts"));
    }
    let nv = parse_usize(counts[0], cline)?;
    let nf = parse_usize(counts[1], cline)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| parse_err(cline, "unexpected end of vertex list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(l, "vertex line needs 3 coordinates"));
        }
        vertices.push(Point3::new(parse_f64(toks[0], l)?, parse_f64(toks[1], l)?, parse_f64(toks[2], l)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| parse_err(cline, "unexpected end of face list"))?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        let count = parse_usize(toks[0], l)?;
        if count != 3 {
            return Err(parse_err(l, format!("only triangles are supported, found a {count}-gon")));
        }
        if toks.len() < 4 {
            return Err(parse_err(l, "face line needs 3 vertex indices"));
        }
        faces.push([parse_usize(toks[1], l)?, parse_usize(toks[2], l)?, parse_usize(toks[3], l)?]);
    }
    TriMesh::new(vertices, faces)
}

/// Reads the `v` and triangular `f` records of an OBJ file. Texture and normal
/// slots (`f 1/2/3 ...`) are ignored; negative (relative) indices are honored.
pub fn read_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (l, s) in content_lines(text) {
        let mut toks = s.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_err(l, "vertex record needs 3 coordinates"));
                }
                vertices.push(Point3::new(parse_f64(c[0], l)?, parse_f64(c[1], l)?, parse_f64(c[2], l)?));
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(parse_err(l, format!("only triangles are supported, found {} vertices", refs.len())));
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(&refs) {
                    let head = r.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| parse_err(l, format!("bad face index {r:?}")))?;
                    let resolved = match idx {
                        0 => return Err(parse_err(l, "OBJ indices are 1-based")),
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    if resolved < 0 {
                        return Err(parse_err(l, format!("relative index {idx} out of range")));
                    }
                    *slot = resolved as usize;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Reads an ASCII PLY with `vertex` (x, y, z) and `face` (vertex index list)
/// elements. Extra properties are skipped.
pub fn read_ply(text: &str) -> Result<TriMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(1, "missing ply magic")),
    }
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_end = 0;
    for (l, s) in lines.by_ref() {
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(parse_err(l, "only ASCII PLY is supported"));
                }
            }
            Some("element") if toks.len() == 3 => elements.push(Element {
                name: toks[1].to_string(),
                count: parse_usize(toks[2], l)?,
                props: Vec::new(),
            }),
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(l, "property before element"))?;
                el.props.push(toks.last().copied().unwrap_or("").to_string());
            }
            Some("end_header") => {
                header_end = l;
                break;
            }
            _ => {}
        }
    }
    if header_end == 0 {
        return Err(parse_err(1, "missing end_header"));
    }
    let mut body = lines.filter(|(_, s)| !s.is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (l, s) = body.next().ok_or_else(|| parse_err(header_end, format!("truncated {} list", el.name)))?;
            let toks: Vec<&str> = s.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let pos = |name: &str| {
                        el.props
                            .iter()
                            .position(|p| p == name)
                            .ok_or_else(|| parse_err(l, format!("vertex element lacks {name}")))
                    };
                    let (ix, iy, iz) = (pos("x")?, pos("y")?, pos("z")?);
                    let get = |i: usize| {
                        toks.get(i)
                            .ok_or_else(|| parse_err(l, "short vertex line"))
                            .and_then(|t| parse_f64(t, l))
                    };
                    vertices.push(Point3::new(get(ix)?, get(iy)?, get(iz)?));
                }
                "face" => {
                    let count = parse_usize(toks.first().copied().unwrap_or(""), l)?;
                    if count != 3 {
                        return Err(parse_err(l, format!("only triangles are supported, found a {count}-gon")));
                    }
                    if toks.len() < 4 {
                        return Err(parse_err(l, "face line needs 3 vertex indices"));
                    }
                    faces.push([parse_usize(toks[1], l)?, parse_usize(toks[2], l)?, parse_usize(toks[3], l)?]);
                }
                _ => {}
            }
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn write_off<W: Write>(out: &mut W, mesh: &TriMesh) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.n_vertices(), mesh.n_faces())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    out.flush()
}

/// ASCII PLY with per-face `uchar red green blue`. Coordinates are printed in
/// shortest round-trip form, so reloading reproduces them exactly.
pub fn write_colored_ply<W: Write>(out: &mut W, mesh: &TriMesh, face_colors: &[[u8; 3]]) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.n_vertices())?;
    for c in ["x", "y", "z"] {
        writeln!(out, "property double {c}")?;
    }
    writeln!(out, "element face {}", mesh.n_faces())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    for c in ["red", "green", "blue"] {
        writeln!(out, "property uchar {c}")?;
    }
    writeln!(out, "end_header")?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for (f, c) in mesh.faces().iter().zip(face_colors) {
        writeln!(out, "3 {} {} {} {} {} {}", f[0], f[1], f[2], c[0], c[1], c[2])?;
    }
    out.flush()
}
