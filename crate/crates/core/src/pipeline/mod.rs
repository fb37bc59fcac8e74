//! Region-aware decomposition: user boxes with their own tolerances are cut
//! out of the mesh and decomposed (or kept verbatim at tolerance 0), the
//! rest of the mesh is decomposed coarsely and trimmed so no remainder part
//! reaches into a box, and neighbouring parts are merged where that costs
//! little volume.

mod invariants;
mod manifest;
mod merge;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acd::{convex_decompose, mix_seed, AcdParams};
use crate::boolean::{bool_difference_convex_with_stats, boolean_difference_boxes, boolean_intersect_box};
use crate::convex::ConvexPart;
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::mesh::TriangleMesh;

pub use invariants::{check_invariants, InvariantReport};
pub use manifest::{read_decomposition, write_decomposition, Manifest, ManifestExact, ManifestPart, MANIFEST_FILE};
pub use merge::{merge_neighbors, merge_neighbors_with, MERGE_SLACK};
use merge::MergeGuard;

/// Provenance tag of parts decomposed from outside every region.
pub const REMAINDER: &str = "remainder";

/// Axis-aligned selection box with its own error tolerance. Tolerance 0
/// keeps the geometry inside the box exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub id: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub tolerance: f64,
}

impl RegionBox {
    pub fn new(id: impl Into<String>, min: [f64; 3], max: [f64; 3], tolerance: f64) -> Self {
        RegionBox { id: id.into(), min, max, tolerance }
    }

    pub fn from_aabb(id: impl Into<String>, aabb: &Aabb, tolerance: f64) -> Self {
        RegionBox::new(id, aabb.min.into(), aabb.max.into(), tolerance)
    }

    pub fn aabb(&self) -> Result<Aabb> {
        Aabb::from_arrays(self.min, self.max).map_err(|_| self.invalid("min must not exceed max"))
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidRegion { id: self.id.clone(), reason: reason.into() }
    }
}

/// Inputs of [`interactive_decomposition`]; also the regions file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub regions: Vec<RegionBox>,
    pub remainder_tolerance: f64,
    /// Largest merge volume error, as a fraction of the pair's volume.
    pub merge_tolerance: f64,
    pub seed: u64,
    /// Settings shared by every decomposition; the tolerance and seed are
    /// overridden per region.
    #[serde(skip_serializing_if = "is_default_acd")]
    pub acd: AcdParams,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn is_default_acd(a: &AcdParams) -> bool {
    *a == AcdParams::default()
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            regions: Vec::new(),
            remainder_tolerance: 0.05,
            merge_tolerance: 0.01,
            seed: 0,
            acd: AcdParams::default(),
            threads: None,
        }
    }
}

impl PipelineParams {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("regions file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    /// Checks the scalar settings; regions are checked against a mesh by
    /// [`validate_regions`].
    pub fn validate(&self) -> Result<()> {
        if !(self.remainder_tolerance > 0.0) || !self.remainder_tolerance.is_finite() {
            return Err(Error::InvalidParams(format!(
                "remainder tolerance must be positive, got {}",
                self.remainder_tolerance
            )));
        }
        if !(self.merge_tolerance >= 0.0) || !self.merge_tolerance.is_finite() {
            return Err(Error::InvalidParams(format!(
                "merge tolerance must be non-negative, got {}",
                self.merge_tolerance
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParams("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn region_acd(&self, index: usize, tolerance: f64) -> AcdParams {
        AcdParams { tolerance, seed: mix_seed(self.seed, index as u64, 5), ..self.acd.clone() }
    }

    fn remainder_acd(&self) -> AcdParams {
        AcdParams { tolerance: self.remainder_tolerance, seed: mix_seed(self.seed, u64::MAX, 6), ..self.acd.clone() }
    }
}

/// Outcome of [`validate_regions`] for a region set without hard errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Regions whose box misses the mesh bounding box; they are skipped.
    pub empty: Vec<String>,
    /// Regions with a flat box; they are skipped.
    pub zero_volume: Vec<String>,
}

impl RegionReport {
    pub fn skipped(&self, id: &str) -> bool {
        self.empty.iter().chain(&self.zero_volume).any(|s| s == id)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w: Vec<String> = self.empty.iter().map(|id| format!("region {id:?} misses the mesh and was skipped")).collect();
        w.extend(self.zero_volume.iter().map(|id| format!("region {id:?} has zero volume and was skipped")));
        w
    }
}

/// Checks a region set against a mesh. Boxes may touch but their interiors
/// must be disjoint.
pub fn validate_regions(mesh: &TriangleMesh, regions: &[RegionBox]) -> Result<RegionReport> {
    let mut boxes = Vec::with_capacity(regions.len());
    for (i, r) in regions.iter().enumerate() {
        if r.id.is_empty() || r.id == REMAINDER {
            return Err(r.invalid("id must be non-empty and not \"remainder\""));
        }
        if regions[..i].iter().any(|o| o.id == r.id) {
            return Err(r.invalid("duplicate id"));
        }
        if !(r.tolerance >= 0.0) || !r.tolerance.is_finite() {
            return Err(r.invalid("tolerance must be a non-negative number"));
        }
        if r.min.iter().chain(&r.max).any(|v| !v.is_finite()) {
            return Err(r.invalid("box corners must be finite"));
        }
        boxes.push(r.aabb()?);
    }
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            if boxes[i].interiors_overlap(&boxes[j], 0.0) {
                return Err(Error::OverlappingRegions(regions[i].id.clone(), regions[j].id.clone()));
            }
        }
    }
    let mut report = RegionReport::default();
    let mesh_box = mesh.aabb();
    for (r, b) in regions.iter().zip(&boxes) {
        if b.volume() <= 0.0 {
            report.zero_volume.push(r.id.clone());
        } else if !mesh_box.is_some_and(|m| m.interiors_overlap(b, 0.0)) {
            report.empty.push(r.id.clone());
        }
    }
    Ok(report)
}

/// Result of [`process_box`].
#[derive(Debug, Clone, Default)]
pub struct BoxOutput {
    pub convex: Vec<ConvexPart>,
    pub exact: Vec<TriangleMesh>,
    /// Sub-meshes each convex part was fitted to.
    pub sources: Vec<TriangleMesh>,
    /// The mesh cut out by the box.
    pub clipped: Option<TriangleMesh>,
    /// Volume of the mesh inside the box.
    pub source_volume: f64,
    pub max_concavity: f64,
    pub budget_exhausted: bool,
}

/// Cuts the region's box out of the mesh and decomposes it at the region's
/// tolerance, or returns the cut verbatim when the tolerance is 0.
pub fn process_box(region: &RegionBox, mesh: &TriangleMesh, acd: &AcdParams) -> Result<BoxOutput> {
    let aabb = region.aabb()?;
    let Some(sub) = boolean_intersect_box(mesh, &aabb)? else {
        return Ok(BoxOutput::default());
    };
    let source_volume = sub.signed_volume();
    if region.tolerance == 0.0 {
        return Ok(BoxOutput { exact: vec![sub.clone()], clipped: Some(sub), source_volume, ..Default::default() });
    }
    let params = AcdParams { tolerance: region.tolerance, ..acd.clone() };
    let out = convex_decompose(&sub, &params)?;
    Ok(BoxOutput {
        max_concavity: out.max_concavity(),
        budget_exhausted: out.budget_exhausted,
        convex: out.pieces.iter().map(|p| p.hull.clone()).collect(),
        sources: out.pieces.into_iter().map(|p| p.source).collect(),
        exact: Vec::new(),
        clipped: Some(sub),
        source_volume,
    })
}

/// Result of [`decomp_remainder_with_stats`].
#[derive(Debug, Clone, Default)]
pub struct RemainderOutput {
    pub parts: Vec<ConvexPart>,
    pub max_concavity: f64,
    pub budget_exhausted: bool,
    /// Parts that reached into a box and were cut or removed.
    pub trimmed: usize,
}

/// Decomposes the mesh left after removing the boxes, then trims every part
/// so none reaches into a box.
pub fn decomp_remainder(mesh_rem: &TriangleMesh, boxes: &[Aabb], acd: &AcdParams) -> Result<Vec<ConvexPart>> {
    decomp_remainder_with_stats(mesh_rem, boxes, acd).map(|r| r.parts)
}

pub fn decomp_remainder_with_stats(mesh_rem: &TriangleMesh, boxes: &[Aabb], acd: &AcdParams) -> Result<RemainderOutput> {
    let out = convex_decompose(mesh_rem, acd)?;
    let mut parts: Vec<ConvexPart> = out.pieces.iter().map(|p| p.hull.clone()).collect();
    let mut trimmed = 0;
    for b in boxes {
        let (next, stats) = bool_difference_convex_with_stats(&parts, b);
        trimmed += parts.len() - stats.untouched;
        parts = next;
    }
    Ok(RemainderOutput { parts, max_concavity: out.max_concavity(), budget_exhausted: out.budget_exhausted, trimmed })
}

/// A convex part tagged with the region it came from, or [`REMAINDER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionPart {
    pub provenance: String,
    pub part: ConvexPart,
}

/// Geometry of a zero-tolerance region, kept exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMesh {
    pub region: String,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub id: String,
    pub tolerance: f64,
    pub parts: usize,
    pub exact_meshes: usize,
    pub source_volume: f64,
    pub max_concavity: f64,
    pub budget_exhausted: bool,
    pub skipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub part_count: usize,
    pub remainder_parts: usize,
    pub regions: Vec<RegionStats>,
    pub input_volume: f64,
    pub remainder_source_volume: f64,
    pub remainder_max_concavity: f64,
    pub remainder_budget_exhausted: bool,
    pub merges: usize,
    pub wall_time_s: f64,
}

/// Output of [`interactive_decomposition`]. Parts are ordered by region in
/// input order, then the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub parts: Vec<DecompositionPart>,
    pub exact_meshes: Vec<ExactMesh>,
    pub regions: Vec<RegionBox>,
    pub stats: DecompositionStats,
    pub warnings: Vec<String>,
}

impl Decomposition {
    /// Wraps plain parts, e.g. a uniform decomposition, as remainder parts.
    pub fn from_parts(parts: Vec<ConvexPart>) -> Self {
        let stats = DecompositionStats { part_count: parts.len(), remainder_parts: parts.len(), ..Default::default() };
        Decomposition {
            parts: parts.into_iter().map(|part| DecompositionPart { provenance: REMAINDER.into(), part }).collect(),
            exact_meshes: Vec::new(),
            regions: Vec::new(),
            stats,
            warnings: Vec::new(),
        }
    }

    pub fn convex_parts(&self) -> Vec<ConvexPart> {
        self.parts.iter().map(|p| p.part.clone()).collect()
    }

    pub fn parts_of(&self, provenance: &str) -> impl Iterator<Item = &ConvexPart> + '_ {
        let provenance = provenance.to_owned();
        self.parts.iter().filter(move |p| p.provenance == provenance).map(|p| &p.part)
    }

    /// Every surface of the approximation as one triangle soup per part
    /// (convex parts first, then exact meshes).
    pub fn surfaces(&self) -> Vec<TriangleMesh> {
        let mut out: Vec<TriangleMesh> = self.parts.iter().map(|p| p.part.to_mesh()).collect();
        out.extend(self.exact_meshes.iter().map(|e| e.mesh.clone()));
        out
    }

    pub fn aabb(&self) -> Option<Aabb> {
        let mut it = self
            .parts
            .iter()
            .map(|p| *p.part.aabb())
            .chain(self.exact_meshes.iter().filter_map(|e| e.mesh.aabb()));
        let first = it.next()?;
        Some(it.fold(first, |a, b| a.union(&b)))
    }

    /// Digest of the geometry and provenance, independent of timings.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let put_mesh = |h: &mut Sha256, tag: &str, v: &[crate::geom::Point], f: &[[u32; 3]]| {
            h.update(tag.as_bytes());
            h.update((v.len() as u64).to_le_bytes());
            for p in v {
                for c in p.iter() {
                    h.update(c.to_bits().to_le_bytes());
                }
            }
            h.update((f.len() as u64).to_le_bytes());
            for t in f {
                for i in t {
                    h.update(i.to_le_bytes());
                }
            }
        };
        for p in &self.parts {
            put_mesh(&mut h, &p.provenance, p.part.vertices(), p.part.faces());
        }
        for e in &self.exact_meshes {
            put_mesh(&mut h, &e.region, e.mesh.vertices(), e.mesh.faces());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Full region-aware decomposition of a watertight mesh.
///
/// Boxes are cut out of the mesh and processed concurrently with the
/// decomposition of the remainder; merging runs afterwards per provenance.
pub fn interactive_decomposition(mesh: &TriangleMesh, params: &PipelineParams) -> Result<Decomposition> {
    let started = Instant::now();
    params.validate()?;
    let report = mesh.validate();
    if report.empty {
        return Err(Error::EmptyMesh);
    }
    if !report.watertight {
        return Err(Error::NotWatertight {
            boundary_edges: report.boundary_edges,
            non_manifold_edges: report.non_manifold_edges,
        });
    }
    let region_report = validate_regions(mesh, &params.regions)?;
    let mut warnings = region_report.warnings();
    let active: Vec<(usize, &RegionBox, Aabb)> = params
        .regions
        .iter()
        .enumerate()
        .filter(|(_, r)| !region_report.skipped(&r.id))
        .map(|(i, r)| Ok((i, r, r.aabb()?)))
        .collect::<Result<_>>()?;
    let boxes: Vec<Aabb> = active.iter().map(|a| a.2).collect();

    let run = || {
        rayon::join(
            || -> Result<(RemainderOutput, Option<TriangleMesh>)> {
                match boolean_difference_boxes(mesh, &boxes)? {
                    None => Ok((RemainderOutput::default(), None)),
                    Some(rem) => Ok((decomp_remainder_with_stats(&rem, &boxes, &params.remainder_acd())?, Some(rem))),
                }
            },
            || {
                active
                    .par_iter()
                    .map(|&(i, r, _)| process_box(r, mesh, &params.region_acd(i, r.tolerance)))
                    .collect::<Result<Vec<BoxOutput>>>()
            },
        )
    };
    let (remainder, boxes_out) = match params.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let (remainder, remainder_mesh) = remainder?;
    let remainder_volume = remainder_mesh.as_ref().map_or(0.0, |m| m.signed_volume());
    let boxes_out = boxes_out?;

    let mut parts = Vec::new();
    let mut exact_meshes = Vec::new();
    let mut merges = 0;
    let mut region_stats = Vec::with_capacity(params.regions.len());
    let mut outputs = active.iter().zip(boxes_out);
    let mut next = outputs.next();
    for r in &params.regions {
        let mut stats = RegionStats { id: r.id.clone(), tolerance: r.tolerance, ..Default::default() };
        match next.take() {
            Some((&(i, ar, aabb), out)) if ar.id == r.id => {
                next = outputs.next();
                if out.budget_exhausted {
                    warnings.push(format!("region {:?} ran out of part budget above its tolerance", r.id));
                }
                if out.convex.is_empty() && out.exact.is_empty() {
                    warnings.push(format!("region {:?} contains no material", r.id));
                }
                let (merged, n) = match &out.clipped {
                    Some(clipped) if out.convex.len() > 1 => {
                        let guard = MergeGuard::new(clipped, r.tolerance, mix_seed(params.seed, i as u64, 8))?;
                        merge_neighbors_with(out.convex, params.merge_tolerance, &|a, b, m| {
                            m.fully_inside_box(&aabb, 0.0) && guard.accept(a, b, m)
                        })
                    }
                    _ => (out.convex, 0),
                };
                merges += n;
                stats.parts = merged.len();
                stats.exact_meshes = out.exact.len();
                stats.source_volume = out.source_volume;
                stats.max_concavity = out.max_concavity;
                stats.budget_exhausted = out.budget_exhausted;
                parts.extend(merged.into_iter().map(|part| DecompositionPart { provenance: r.id.clone(), part }));
                exact_meshes.extend(out.exact.into_iter().map(|mesh| ExactMesh { region: r.id.clone(), mesh }));
            }
            other => {
                next = other;
                stats.skipped = true;
            }
        }
        region_stats.push(stats);
    }

    if remainder.budget_exhausted {
        warnings.push("remainder ran out of part budget above its tolerance".into());
    }
    let (merged, n) = match &remainder_mesh {
        Some(rem) if remainder.parts.len() > 1 => {
            let guard = MergeGuard::new(rem, params.remainder_tolerance, mix_seed(params.seed, u64::MAX, 8))?;
            merge_neighbors_with(remainder.parts, params.merge_tolerance, &|a, b, m| {
                !boxes.iter().any(|bx| crate::boolean::intrudes(m, bx)) && guard.accept(a, b, m)
            })
        }
        _ => (remainder.parts, 0),
    };
    merges += n;
    let remainder_parts = merged.len();
    parts.extend(merged.into_iter().map(|part| DecompositionPart { provenance: REMAINDER.into(), part }));

    let stats = DecompositionStats {
        part_count: parts.len(),
        remainder_parts,
        regions: region_stats,
        input_volume: mesh.signed_volume(),
        remainder_source_volume: remainder_volume,
        remainder_max_concavity: remainder.max_concavity,
        remainder_budget_exhausted: remainder.budget_exhausted,
        merges,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Decomposition { parts, exact_meshes, regions: params.regions.clone(), stats, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn face_touching_boxes_are_valid() {
        let cube = fixtures::unit_cube();
        let r = [
            RegionBox::new("a", [0.0; 3], [0.5, 1.0, 1.0], 0.1),
            RegionBox::new("b", [0.5, 0.0, 0.0], [1.0; 3], 0.1),
        ];
        assert_eq!(validate_regions(&cube, &r).unwrap(), RegionReport::default());
    }

    #[test]
    fn overlapping_boxes_are_rejected() {
        let cube = fixtures::unit_cube();
        let r = [
            RegionBox::new("a", [0.0; 3], [1.0; 3], 0.1),
            RegionBox::new("b", [0.5; 3], [1.5; 3], 0.1),
        ];
        assert!(matches!(validate_regions(&cube, &r), Err(Error::OverlappingRegions(a, b)) if a == "a" && b == "b"));
    }

    #[test]
    fn far_box_is_skipped_with_warning() {
        let cube = fixtures::unit_cube();
        let r = [RegionBox::new("far", [5.0; 3], [6.0; 3], 0.1)];
        let report = validate_regions(&cube, &r).unwrap();
        assert_eq!(report.empty, vec!["far".to_string()]);
        let params = PipelineParams { regions: r.to_vec(), ..Default::default() };
        let d = interactive_decomposition(&cube, &params).unwrap();
        assert_eq!(d.parts.len(), 1);
        assert_eq!(d.warnings.len(), 1);
        assert!(d.stats.regions[0].skipped);
    }

    #[test]
    fn bad_regions() {
        let cube = fixtures::unit_cube();
        for r in [
            RegionBox::new("x", [1.0; 3], [0.0; 3], 0.1),
            RegionBox::new("x", [0.0; 3], [1.0; 3], -1.0),
            RegionBox::new(REMAINDER, [0.0; 3], [1.0; 3], 0.1),
        ] {
            assert!(matches!(validate_regions(&cube, &[r]), Err(Error::InvalidRegion { .. })));
        }
    }

    #[test]
    fn process_box_modes() {
        let l = fixtures::l_prism();
        let notch = RegionBox::new("notch", [0.5, 0.5, -0.1], [1.5, 1.5, 1.1], 0.0);
        let out = process_box(&notch, &l, &AcdParams::default()).unwrap();
        assert!(out.convex.is_empty());
        assert_eq!(out.exact.len(), 1);
        let far = RegionBox::new("far", [5.0; 3], [6.0; 3], 0.1);
        let out = process_box(&far, &l, &AcdParams::default()).unwrap();
        assert!(out.convex.is_empty() && out.exact.is_empty());
        let corner = RegionBox::new("corner", [1.2, -0.1, -0.1], [2.1, 0.8, 1.1], 0.01);
        let out = process_box(&corner, &l, &AcdParams::default()).unwrap();
        assert_eq!(out.convex.len(), 1);
    }

    #[test]
    fn params_json_round_trip() {
        let text = r#"{"regions":[{"id":"a","min":[0,0,0],"max":[1,1,1],"tolerance":0.01}],
            "remainder_tolerance":0.1,"merge_tolerance":0.0,"seed":7}"#;
        let p = PipelineParams::from_json(text).unwrap();
        assert_eq!(p.regions[0].id, "a");
        assert_eq!(p.seed, 7);
        assert_eq!(PipelineParams::from_json(&p.to_json()).unwrap(), p);
        assert!(matches!(PipelineParams::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn non_positive_remainder_tolerance() {
        let p = PipelineParams { remainder_tolerance: 0.0, ..Default::default() };
        assert!(matches!(interactive_decomposition(&fixtures::unit_cube(), &p), Err(Error::InvalidParams(_))));
    }
}
