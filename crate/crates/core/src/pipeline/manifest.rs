use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Decomposition, DecompositionPart, DecompositionStats, ExactMesh, RegionBox};
use crate::convex::ConvexPart;
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, save_mesh, LoadOptions, MeshFormat};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "regacd-decomposition";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPart {
    pub file: String,
    pub provenance: String,
    pub volume: f64,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestExact {
    pub file: String,
    pub region: String,
}

/// Index of a decomposition written to disk. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub parts: Vec<ManifestPart>,
    pub exact_meshes: Vec<ManifestExact>,
    pub regions: Vec<RegionBox>,
    pub stats: DecompositionStats,
    pub warnings: Vec<String>,
}

/// Writes every part and exact mesh as OBJ plus `manifest.json` into
/// `dir`, creating it if needed. Returns the manifest path.
pub fn write_decomposition(decomp: &Decomposition, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut parts = Vec::with_capacity(decomp.parts.len());
    for (k, p) in decomp.parts.iter().enumerate() {
        let file = format!("part_{k:04}.obj");
        save_mesh(&p.part.to_mesh(), &dir.join(&file), MeshFormat::Obj)?;
        parts.push(ManifestPart {
            file,
            provenance: p.provenance.clone(),
            volume: p.part.volume(),
            vertices: p.part.vertices().len(),
        });
    }
    let mut exact_meshes = Vec::with_capacity(decomp.exact_meshes.len());
    for (k, e) in decomp.exact_meshes.iter().enumerate() {
        let file = format!("exact_{k:04}.obj");
        save_mesh(&e.mesh, &dir.join(&file), MeshFormat::Obj)?;
        exact_meshes.push(ManifestExact { file, region: e.region.clone() });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: 1,
        fingerprint: decomp.fingerprint(),
        parts,
        exact_meshes,
        regions: decomp.regions.clone(),
        stats: decomp.stats.clone(),
        warnings: decomp.warnings.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a decomposition from its directory or its manifest file.
pub fn read_decomposition(path: &Path) -> Result<Decomposition> {
    let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format != FORMAT {
        return Err(Error::Parse(format!("{}: not a decomposition manifest", manifest_path.display())));
    }
    let opts = LoadOptions::default();
    let mut parts = Vec::with_capacity(manifest.parts.len());
    for p in &manifest.parts {
        let mesh = load_mesh(dir.join(&p.file), MeshFormat::Obj, opts)?;
        let part = ConvexPart::from_mesh(&mesh)?;
        parts.push(DecompositionPart { provenance: p.provenance.clone(), part });
    }
    let mut exact_meshes = Vec::with_capacity(manifest.exact_meshes.len());
    for e in &manifest.exact_meshes {
        let mesh = load_mesh(dir.join(&e.file), MeshFormat::Obj, opts)?;
        exact_meshes.push(ExactMesh { region: e.region.clone(), mesh });
    }
    Ok(Decomposition {
        parts,
        exact_meshes,
        regions: manifest.regions,
        stats: manifest.stats,
        warnings: manifest.warnings,
    })
}
