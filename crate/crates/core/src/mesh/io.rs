use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{weld_points, TriangleMesh};
use crate::error::{Error, Result};
use crate::geom::{triangle_normal_raw, Point};

/// Weld tolerance applied to STL soups.
pub const STL_WELD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Stl,
    #[default]
    Auto,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" => Ok(MeshFormat::Stl),
            "auto" => Ok(MeshFormat::Auto),
            other => Err(Error::InvalidParams(format!("unknown mesh format {other:?}"))),
        }
    }
}

impl MeshFormat {
    /// Guesses the format of file contents: binary STL by its size field,
    /// ASCII STL by its `solid` keyword, OBJ otherwise.
    pub fn detect(bytes: &[u8]) -> MeshFormat {
        if is_binary_stl(bytes) {
            return MeshFormat::Stl;
        }
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(512)]);
        if head.trim_start().starts_with("solid") {
            MeshFormat::Stl
        } else {
            MeshFormat::Obj
        }
    }

    fn from_path(path: &Path) -> Option<MeshFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(MeshFormat::Stl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept non-watertight meshes (logged as a warning).
    pub force: bool,
}

/// Loads and validates a mesh file.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat, opts: LoadOptions) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = match format {
        MeshFormat::Auto => MeshFormat::from_path(path).unwrap_or(MeshFormat::Auto),
        f => f,
    };
    load_mesh_bytes(&bytes, format, opts)
}

/// Parses an in-memory mesh file. `Auto` sniffs the content.
pub fn load_mesh_bytes(bytes: &[u8], format: MeshFormat, opts: LoadOptions) -> Result<TriangleMesh> {
    let format = match format {
        MeshFormat::Auto => MeshFormat::detect(bytes),
        f => f,
    };
    let mesh = match format {
        MeshFormat::Stl => parse_stl(bytes)?,
        _ => {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| Error::Parse("OBJ file is not valid UTF-8".into()))?;
            parse_obj(text)?
        }
    };
    let report = mesh.validate();
    if report.empty {
        return Err(Error::EmptyMesh);
    }
    if !report.watertight {
        if opts.force {
            log::warn!(
                "mesh is not watertight ({} boundary, {} non-manifold edges); continuing",
                report.boundary_edges,
                report.non_manifold_edges
            );
        } else {
            return Err(Error::NotWatertight {
                boundary_edges: report.boundary_edges + report.inconsistent_edges,
                non_manifold_edges: report.non_manifold_edges,
            });
        }
    }
    Ok(mesh)
}


fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + 50 * n
}

/// Parses ASCII OBJ `v` and `f` records. Polygons are fan-triangulated;
/// texture/normal indices and other records are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    *slot = tok
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| Error::Parse(format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for t in tok {
                    let raw = t.split('/').next().unwrap_or("");
                    let i: i64 = raw
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad face index {t:?}", lineno + 1)))?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 {
                        return Err(Error::Parse(format!(
                            "line {}: face index {i} out of range",
                            lineno + 1
                        )));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(Error::Parse(format!("line {}: face with fewer than 3 vertices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Parses binary or ASCII STL and welds coincident vertices.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh> {
    let soup = if is_binary_stl(bytes) {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        let mut pts = Vec::with_capacity(3 * n);
        for t in 0..n {
            let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
            for v in 0..3 {
                let at = 12 + 12 * v;
                let f = |k: usize| f32::from_le_bytes(rec[at + 4 * k..at + 4 * k + 4].try_into().unwrap()) as f64;
                pts.push(Point::new(f(0), f(1), f(2)));
            }
        }
        pts
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse("STL is neither binary nor ASCII".into()))?;
        if !text.trim_start().starts_with("solid") {
            return Err(Error::Parse("STL size does not match its triangle count".into()));
        }
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut tok = line.split_whitespace();
            if tok.next() == Some("vertex") {
                let c: Vec<f64> = tok.filter_map(|t| t.parse().ok()).collect();
                if c.len() != 3 {
                    return Err(Error::Parse(format!("line {}: bad vertex", lineno + 1)));
                }
                pts.push(Point::new(c[0], c[1], c[2]));
            }
        }
        if pts.len() % 3 != 0 {
            return Err(Error::Parse("ASCII STL facet without three vertices".into()));
        }
        pts
    };
    let (vertices, remap) = weld_points(&soup, STL_WELD_TOLERANCE);
    let faces = remap
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    TriangleMesh::new(vertices, faces)
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices().len() * 40 + mesh.faces().len() * 20);
    for p in mesh.vertices() {
        // `{:?}` prints the shortest representation that round-trips exactly.
        let _ = writeln!(out, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Binary STL (single precision).
pub fn write_stl(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.faces().len());
    let mut header = [0u8; 80];
    header[..6].copy_from_slice(b"regacd");
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces().len() as u32).to_le_bytes());
    for [a, b, c] in mesh.triangles() {
        let n = triangle_normal_raw(&a, &b, &c).try_normalize(0.0).unwrap_or_default();
        for v in [n.x, n.y, n.z, a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let format = match format {
        MeshFormat::Auto => MeshFormat::from_path(path).unwrap_or(MeshFormat::Obj),
        f => f,
    };
    let bytes = match format {
        MeshFormat::Stl => write_stl(mesh),
        _ => write_obj(mesh).into_bytes(),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
