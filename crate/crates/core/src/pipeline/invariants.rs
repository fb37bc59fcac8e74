use serde::{Deserialize, Serialize};

use super::{Decomposition, REMAINDER};
use crate::boolean::{boolean_difference_boxes, boolean_intersect_box};
use crate::error::Result;
use crate::geom::Aabb;
use crate::mesh::TriangleMesh;

/// Findings of [`check_invariants`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `|Σ source volumes − input volume| / input volume`.
    pub coverage_error: f64,
    /// Overlap volume between parts of different provenance, over the
    /// input volume.
    pub cross_overlap: f64,
    /// Parts that are not convex and watertight.
    pub invalid_parts: Vec<usize>,
    /// Parts that straddle a region boundary, with a description.
    pub exclusion_violations: Vec<String>,
}

impl InvariantReport {
    pub fn partition_ok(&self) -> bool {
        self.coverage_error <= 1e-6 && self.cross_overlap < 1e-6 && self.invalid_parts.is_empty()
    }

    pub fn exclusion_ok(&self) -> bool {
        self.exclusion_violations.is_empty()
    }

    pub fn ok(&self) -> bool {
        self.partition_ok() && self.exclusion_ok()
    }
}

/// Checks the partition and region-exclusion constraints of a
/// decomposition of `mesh`.
///
/// Partition: the pieces the parts were fitted to (one per region box and
/// the remainder) add up to the input volume, and parts from different
/// provenances do not overlap. Region exclusion: every region part lies in
/// its box and every remainder part stays out of all boxes, with a vertex
/// slack of `1e-6` of the mesh diagonal.
pub fn check_invariants(decomp: &Decomposition, mesh: &TriangleMesh) -> Result<InvariantReport> {
    let input = mesh.volume()?;
    let slack = 1e-6 * mesh.diagonal();
    let mut boxes: Vec<(String, Aabb)> = Vec::new();
    for r in &decomp.regions {
        let skipped = decomp.stats.regions.iter().any(|s| s.id == r.id && s.skipped);
        if !skipped {
            boxes.push((r.id.clone(), r.aabb()?));
        }
    }
    let plain: Vec<Aabb> = boxes.iter().map(|b| b.1).collect();
    let mut sources = boolean_difference_boxes(mesh, &plain)?.map_or(0.0, |m| m.signed_volume());
    for b in &plain {
        sources += boolean_intersect_box(mesh, b)?.map_or(0.0, |m| m.signed_volume());
    }
    let mut report = InvariantReport { coverage_error: (sources - input).abs() / input, ..Default::default() };

    for (k, p) in decomp.parts.iter().enumerate() {
        if !p.part.is_valid() {
            report.invalid_parts.push(k);
        }
    }

    let mut overlap = 0.0;
    for (i, a) in decomp.parts.iter().enumerate() {
        for b in &decomp.parts[i + 1..] {
            if a.provenance != b.provenance && a.part.aabb().intersects(b.part.aabb(), 0.0) {
                overlap += a.part.overlap_volume(&b.part);
            }
        }
        // Exact meshes lie inside their box, so any volume of another
        // provenance inside that box bounds the overlap.
        for e in &decomp.exact_meshes {
            if e.region == a.provenance {
                continue;
            }
            if let Some((_, bx)) = boxes.iter().find(|(id, _)| *id == e.region) {
                overlap += a.part.clip_to_box(bx).map_or(0.0, |c| c.volume());
            }
        }
    }
    report.cross_overlap = overlap / input;

    for (k, p) in decomp.parts.iter().enumerate() {
        if p.provenance == REMAINDER {
            for (id, bx) in &boxes {
                let inner = shrink(bx, slack);
                if let Some(inner) = inner {
                    if p.part.clip_to_box(&inner).is_some() {
                        report.exclusion_violations.push(format!("remainder part {k} reaches into region {id:?}"));
                    }
                }
            }
        } else {
            match boxes.iter().find(|(id, _)| *id == p.provenance) {
                Some((id, bx)) if !p.part.fully_inside_box(bx, slack) => {
                    report.exclusion_violations.push(format!("part {k} of region {id:?} leaves its box"));
                }
                None => report
                    .exclusion_violations
                    .push(format!("part {k} has unknown provenance {:?}", p.provenance)),
                _ => {}
            }
        }
    }
    for e in &decomp.exact_meshes {
        let inside = boxes
            .iter()
            .find(|(id, _)| *id == e.region)
            .is_some_and(|(_, bx)| e.mesh.vertices().iter().all(|v| bx.contains_point(v, slack)));
        if !inside {
            report.exclusion_violations.push(format!("exact mesh of region {:?} leaves its box", e.region));
        }
    }
    Ok(report)
}

fn shrink(b: &Aabb, by: f64) -> Option<Aabb> {
    let e = b.extents();
    (e.min() > 2.0 * by).then(|| b.expanded(-by))
}
