//! Tolerance-driven approximate convex decomposition by recursive
//! axis-aligned plane cuts.
//!
//! The concavity of a solid is the largest distance from a point of its
//! surface to the surface of its convex hull. Pieces are judged by their
//! fit error, the larger of the concavity and the reverse distance from
//! the hull's surface back to the piece. A piece whose fit error is above
//! the tolerance is cut by the candidate plane that minimises the summed
//! fit error of the resulting pieces; the worst piece is always cut first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolean::{clip_mesh_by_plane, simplify_coplanar, Keep};
use crate::convex::{convex_hull, ConvexPart};
use crate::error::{Error, Result};
use crate::geom::{closest_point_on_triangle, triangle_unit_normal, Plane, Point};
use crate::mesh::{sample_surface, TriangleMesh};
use crate::metrics::TriangleBvh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcdParams {
    /// Concavity tolerance ε in mesh units; must be positive.
    pub tolerance: f64,
    /// Upper bound on the number of parts; doubles as a part budget.
    pub max_parts: usize,
    pub candidate_planes_per_axis: usize,
    /// Pieces smaller than this fraction of the input volume are not cut.
    pub min_part_volume_fraction: f64,
    /// Samples per piece when scoring candidate planes.
    pub scoring_samples: usize,
    /// Samples per piece when checking the tolerance.
    pub acceptance_samples: usize,
    pub seed: u64,
}

impl Default for AcdParams {
    fn default() -> Self {
        AcdParams {
            tolerance: 0.05,
            max_parts: 4096,
            candidate_planes_per_axis: 8,
            min_part_volume_fraction: 1e-6,
            scoring_samples: 512,
            acceptance_samples: 8192,
            seed: 0,
        }
    }
}

impl AcdParams {
    pub fn with_tolerance(tolerance: f64) -> Self {
        AcdParams { tolerance, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParams(format!(
                "decomposition tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_parts == 0 {
            return Err(Error::InvalidParams("max_parts must be at least 1".into()));
        }
        if self.candidate_planes_per_axis == 0 || self.scoring_samples == 0 || self.acceptance_samples == 0 {
            return Err(Error::InvalidParams("candidate and sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// Concavity value and the surface point where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcavityMeasure {
    pub value: f64,
    pub witness: Point,
}

/// Distance from `p` to the boundary of a convex part, 0 for points outside.
#[inline]
pub fn depth_inside(hull: &ConvexPart, p: &Point) -> f64 {
    hull.planes()
        .iter()
        .map(|pl| -pl.signed_distance(p))
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Concavity of a watertight mesh: the maximum over `n_samples` random
/// surface points, plus every vertex and edge midpoint, of the distance
/// to the boundary of the mesh's convex hull.
pub fn concavity(mesh: &TriangleMesh, n_samples: usize, seed: u64) -> Result<ConcavityMeasure> {
    let hull = convex_hull(mesh.vertices())?;
    concavity_against(mesh, &hull, n_samples, seed)
}

pub(crate) fn concavity_against(mesh: &TriangleMesh, hull: &ConvexPart, n_samples: usize, seed: u64) -> Result<ConcavityMeasure> {
    let cloud = sample_surface(mesh, n_samples.max(1), seed)?;
    let mut best = ConcavityMeasure { value: 0.0, witness: mesh.vertices()[0] };
    let mut consider = |p: Point| {
        let d = depth_inside(hull, &p);
        if d > best.value {
            best = ConcavityMeasure { value: d, witness: p };
        }
    };
    for p in cloud.points {
        consider(p);
    }
    for p in mesh.vertices() {
        consider(*p);
    }
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if a < b {
                let (pa, pb) = (mesh.vertices()[a as usize], mesh.vertices()[b as usize]);
                consider(Point::from((pa.coords + pb.coords) * 0.5));
            }
        }
    }
    Ok(best)
}

/// Largest distance from the surface of `hull` to the surface of `mesh`,
/// over `n_samples` random hull points plus face centroids and edge
/// midpoints. Large where the hull bridges a hole or gap that the
/// one-sided concavity cannot see, such as the hole of a thin washer.
pub fn hull_gap(mesh: &TriangleMesh, hull: &ConvexPart, n_samples: usize, seed: u64) -> Result<ConcavityMeasure> {
    let surface = TriangleBvh::from_mesh(mesh);
    let hull_mesh = hull.to_mesh();
    let cloud = sample_surface(&hull_mesh, n_samples.max(1), seed)?;
    let tris: Vec<[Point; 3]> = hull_mesh.triangles().collect();
    let mut points: Vec<(Point, usize)> = cloud.points.into_iter().zip(cloud.source_face).collect();
    for (k, &[a, b, c]) in tris.iter().enumerate() {
        points.push((Point::from((a.coords + b.coords + c.coords) / 3.0), k));
        for (p, q) in [(a, b), (b, c), (c, a)] {
            points.push((Point::from((p.coords + q.coords) * 0.5), k));
        }
    }
    let mut best: Option<(f64, Point, usize)> = None;
    for &(p, k) in &points {
        if let Some((d, _, _)) = best {
            if surface.any_within(&p, d) {
                continue;
            }
        }
        let d = surface.distance(&p);
        if best.is_none_or(|(b, _, _)| d > b) {
            best = Some((d, p, k));
        }
    }
    let Some((value, witness, face)) = best else {
        return Ok(ConcavityMeasure { value: 0.0, witness: hull.vertices()[0] });
    };
    let (value, witness) = climb(&surface, &tris[face], value, witness);
    Ok(ConcavityMeasure { value, witness })
}

/// Moves `p` across the triangle `t` away from the nearest surface point
/// while the distance grows. Sparse samples rarely land on the point
/// farthest from the surface, which sits over the middle of a hole or
/// groove; this walks there from the best sample.
fn climb(surface: &TriangleBvh, t: &[Point; 3], mut d: f64, mut p: Point) -> (f64, Point) {
    let Some(n) = triangle_unit_normal(&t[0], &t[1], &t[2]) else { return (d, p) };
    let mut step = d;
    for _ in 0..40 {
        let Some(c) = surface.closest(&p) else { break };
        let mut g = p - c.point;
        g -= n * n.dot(&g);
        let len = g.norm();
        if len <= 1e-12 * (1.0 + d) || step <= 1e-9 * (1.0 + d) {
            break;
        }
        let q = closest_point_on_triangle(&(p + g * (step / len)), &t[0], &t[1], &t[2]);
        let dq = surface.distance(&q);
        if dq > d {
            (d, p) = (dq, q);
        } else {
            step *= 0.5;
        }
    }
    (d, p)
}

/// Fit error of a hull to the solid it covers: the larger of the
/// concavity and the hull gap, so both surfaces lie within the returned
/// distance of each other.
pub fn fit_error(mesh: &TriangleMesh, hull: &ConvexPart, n_samples: usize, seed: u64) -> Result<ConcavityMeasure> {
    let c = concavity_against(mesh, hull, n_samples, seed)?;
    let g = hull_gap(mesh, hull, n_samples, mix_seed(seed, 0, 9))?;
    Ok(if g.value > c.value { g } else { c })
}

/// One output part with the solid it was fitted to.
#[derive(Debug, Clone)]
pub struct AcdPiece {
    pub hull: ConvexPart,
    /// The piece of the input this hull covers.
    pub source: TriangleMesh,
    /// [`fit_error`] of the hull against `source`.
    pub concavity: ConcavityMeasure,
}

#[derive(Debug, Clone)]
pub struct AcdOutput {
    pub pieces: Vec<AcdPiece>,
    /// The part budget ran out before every piece met the tolerance.
    pub budget_exhausted: bool,
    /// Pieces above tolerance that could not be cut further.
    pub unsplittable: usize,
}

impl AcdOutput {
    pub fn parts(&self) -> Vec<ConvexPart> {
        self.pieces.iter().map(|p| p.hull.clone()).collect()
    }

    pub fn max_concavity(&self) -> f64 {
        self.pieces.iter().map(|p| p.concavity.value).fold(0.0, f64::max)
    }
}

/// Mixes a seed with small integers; splitmix64 finaliser.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Queued {
    concavity: f64,
    order: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // Worst first; older pieces first among equals.
        self.concavity
            .total_cmp(&other.concavity)
            .then(other.order.cmp(&self.order))
    }
}

/// Decomposes a watertight mesh into convex parts whose source pieces have
/// fit error at most `params.tolerance`, within `params.max_parts` parts.
pub fn convex_decompose(mesh: &TriangleMesh, params: &AcdParams) -> Result<AcdOutput> {
    params.validate()?;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let total_volume = mesh.signed_volume().abs();
    let min_volume = params.min_part_volume_fraction * total_volume;

    let mut slots: Vec<Option<AcdPiece>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut created = 0u64;
    let make = |source: TriangleMesh, created: u64| -> Result<AcdPiece> {
        let source = simplify_coplanar(&source);
        let hull = convex_hull(source.vertices())?;
        let c = fit_error(&source, &hull, params.acceptance_samples, mix_seed(params.seed, created, 1))?;
        Ok(AcdPiece { hull, source, concavity: c })
    };
    for solid in mesh.solids() {
        let piece = make(solid, created)?;
        created += 1;
        heap.push(Queued { concavity: piece.concavity.value, order: slots.len() });
        slots.push(Some(piece));
    }
    let mut budget_exhausted = false;
    let mut unsplittable = 0;
    let mut live = slots.len();
    let mut frozen = Vec::new();
    while let Some(top) = heap.pop() {
        if top.concavity <= params.tolerance {
            heap.push(top);
            break;
        }
        if live >= params.max_parts {
            heap.push(top);
            budget_exhausted = true;
            break;
        }
        let piece = slots[top.order].as_ref().unwrap();
        if piece.source.signed_volume() < min_volume {
            frozen.push(top);
            unsplittable += 1;
            continue;
        }
        let split_seed = mix_seed(params.seed, created, 2);
        log::debug!(
            "cutting piece {} (concavity {:.4}, {} faces), {live} live",
            top.order,
            top.concavity,
            piece.source.faces().len()
        );
        let children = match split_best(&piece.source, &piece.concavity, params, min_volume, split_seed) {
            Ok(c) => c,
            Err(Error::NoValidPlane) => {
                frozen.push(top);
                unsplittable += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        slots[top.order] = None;
        live -= 1;
        for child in children {
            let piece = make(child, created)?;
            created += 1;
            heap.push(Queued { concavity: piece.concavity.value, order: slots.len() });
            slots.push(Some(piece));
            live += 1;
        }
    }
    let pieces = slots.into_iter().flatten().collect();
    Ok(AcdOutput { pieces, budget_exhausted, unsplittable })
}

/// Candidate cutting planes for a piece: evenly spaced per axis, plus the
/// planes returned by [`witness_planes`].
pub fn candidate_planes(mesh: &TriangleMesh, witness: Option<&Point>, per_axis: usize) -> Vec<(usize, f64)> {
    let Some(bb) = mesh.aabb() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for axis in 0..3 {
        let (lo, hi) = (bb.min[axis], bb.max[axis]);
        if hi <= lo {
            continue;
        }
        for i in 1..=per_axis {
            out.push((axis, lo + (hi - lo) * i as f64 / (per_axis + 1) as f64));
        }
    }
    if let Some(w) = witness {
        out.extend(witness_planes(mesh, w));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    out
}

/// Per axis, the plane through the witness and the planes through the
/// nearest vertex coordinate on either side of it. The latter follow edges
/// of the feature the witness sits on, such as the rim of a groove, which
/// evenly spaced planes only hit by chance.
pub fn witness_planes(mesh: &TriangleMesh, witness: &Point) -> Vec<(usize, f64)> {
    let Some(bb) = mesh.aabb() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for axis in 0..3 {
        let (lo, hi) = (bb.min[axis], bb.max[axis]);
        let margin = 1e-6 * (hi - lo);
        let inner = |c: f64| c > lo + margin && c < hi - margin;
        let c = witness[axis];
        let below = mesh.vertices().iter().map(|v| v[axis]).filter(|&x| x < c - margin).fold(f64::NEG_INFINITY, f64::max);
        let above = mesh.vertices().iter().map(|v| v[axis]).filter(|&x| x > c + margin).fold(f64::INFINITY, f64::min);
        for x in [below, c, above] {
            if inner(x) {
                out.push((axis, x));
            }
        }
    }
    out
}

/// A scored cut and the children it produces.
struct Cut {
    score: f64,
    /// Largest child fit error.
    worst: f64,
    finished: f64,
    /// Summed volume between each child and its hull.
    void: f64,
    children: Vec<TriangleMesh>,
}

fn evaluate_cut(mesh: &TriangleMesh, axis: usize, offset: f64, params: &AcdParams, min_volume: f64, seed: u64) -> Option<Cut> {
    let plane = Plane::axis(axis, 1.0, offset);
    let a = clip_mesh_by_plane(mesh, &plane, Keep::Inside).ok()??;
    let b = clip_mesh_by_plane(mesh, &plane, Keep::Outside).ok()??;
    let mut children = a.solids();
    children.extend(b.solids());
    // Slivers below the volume floor could never be cut again.
    if children.iter().any(|c| c.signed_volume() < min_volume) {
        return None;
    }
    let mut score = 0.0;
    let mut worst = 0.0f64;
    let mut finished = 0.0;
    let mut void = 0.0;
    for (k, c) in children.iter().enumerate() {
        let hull = convex_hull(c.vertices()).ok()?;
        let phi = fit_error(c, &hull, params.scoring_samples, mix_seed(seed, k as u64, 3)).ok()?.value;
        score += phi;
        worst = worst.max(phi);
        void += hull.volume() - c.signed_volume();
        if phi <= params.tolerance {
            finished += c.signed_volume();
        }
    }
    Some(Cut { score, worst, finished, void, children })
}

/// The best cutting plane for `mesh` (see [`convex_decompose`]).
pub fn pick_split_plane(mesh: &TriangleMesh, params: &AcdParams) -> Result<Plane> {
    let hull = convex_hull(mesh.vertices())?;
    let c = fit_error(mesh, &hull, params.acceptance_samples, params.seed)?;
    let min_volume = params.min_part_volume_fraction * mesh.signed_volume().abs();
    let (axis, offset, _) = best_cut(mesh, &c, params, min_volume, params.seed)?;
    Ok(Plane::axis(axis, 1.0, offset))
}

/// Every candidate with its score, in candidate order. `None` marks a
/// candidate that produced an empty or degenerate side.
pub fn score_candidates(mesh: &TriangleMesh, params: &AcdParams) -> Result<Vec<((usize, f64), Option<f64>)>> {
    let hull = convex_hull(mesh.vertices())?;
    let c = fit_error(mesh, &hull, params.acceptance_samples, params.seed)?;
    let cands = candidate_planes(mesh, Some(&c.witness), params.candidate_planes_per_axis);
    let min_volume = params.min_part_volume_fraction * mesh.signed_volume().abs();
    Ok(cands
        .par_iter()
        .enumerate()
        .map(|(k, &(axis, off))| {
            ((axis, off), evaluate_cut(mesh, axis, off, params, min_volume, mix_seed(params.seed, k as u64, 4)).map(|c| c.score))
        })
        .collect())
}

fn best_cut(
    mesh: &TriangleMesh,
    c: &ConcavityMeasure,
    params: &AcdParams,
    min_volume: f64,
    seed: u64,
) -> Result<(usize, f64, Cut)> {
    let cands = candidate_planes(mesh, Some(&c.witness), params.candidate_planes_per_axis);
    let scored: Vec<Option<Cut>> = cands
        .par_iter()
        .enumerate()
        .map(|(k, &(axis, off))| evaluate_cut(mesh, axis, off, params, min_volume, mix_seed(seed, k as u64, 4)))
        .collect();
    // Sequential reduction in candidate order keeps the result independent
    // of scheduling; candidates are sorted by (axis, offset).
    //
    // Features such as a hole through a plate need several cuts before the
    // worst error drops, so no single cut shows progress and the summed
    // scores are flat up to sampling noise. When no candidate lowers the
    // worst error by a clear margin, only the witness planes
    // are considered; repeated cuts there take the offending feature apart.
    let progress = c.value - (0.5 * params.tolerance).max(0.05 * c.value);
    let on_witness = witness_planes(mesh, &c.witness);
    let through_witness = |axis: usize, off: f64| on_witness.contains(&(axis, off));
    let any_progress = scored.iter().flatten().any(|cut| cut.worst <= progress);
    let witness_only = !any_progress
        && cands.iter().zip(&scored).any(|(&(axis, off), s)| s.is_some() && through_witness(axis, off));
    let eligible = |axis: usize, off: f64| !witness_only || through_witness(axis, off);
    // Scores within a small fraction of the tolerance count as tied, and a
    // tie goes to the cut that leaves the most volume already within
    // tolerance, then to the one whose children's hulls enclose the least
    // empty space.
    let min = cands
        .iter()
        .zip(&scored)
        .filter(|(&(axis, off), _)| eligible(axis, off))
        .filter_map(|(_, s)| s.as_ref().map(|c| c.score))
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoValidPlane);
    }
    let tie = 1e-3 * params.tolerance;
    let vol_tol = 1e-9 * mesh.signed_volume().abs();
    let mut best: Option<(usize, f64, Cut)> = None;
    for (&(axis, off), s) in cands.iter().zip(scored) {
        let Some(cut) = s else { continue };
        if !eligible(axis, off) || cut.score > min + tie {
            continue;
        }
        let better = best.as_ref().is_none_or(|b| {
            cut.finished > b.2.finished + vol_tol
                || (cut.finished >= b.2.finished - vol_tol && cut.void < b.2.void - vol_tol)
        });
        if better {
            best = Some((axis, off, cut));
        }
    }
    best.ok_or(Error::NoValidPlane)
}

fn split_best(
    mesh: &TriangleMesh,
    c: &ConcavityMeasure,
    params: &AcdParams,
    min_volume: f64,
    seed: u64,
) -> Result<Vec<TriangleMesh>> {
    best_cut(mesh, c, params, min_volume, seed).map(|b| b.2.children)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cube_is_convex() {
        let c = concavity(&fixtures::unit_cube(), 1000, 1).unwrap();
        assert!(c.value <= 1e-9);
        let out = convex_decompose(&fixtures::unit_cube(), &AcdParams::with_tolerance(0.01)).unwrap();
        assert_eq!(out.pieces.len(), 1);
        assert!((out.pieces[0].hull.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_prism_concavity_is_half() {
        // Hull cross-section is the pentagon (0,0),(2,0),(2,1),(1,2),(0,2);
        // the notch edge (1,1,z) is 1/sqrt(2) from the slanted face and
        // min(z, 1 - z) from the caps, so the maximum is 0.5 at z = 0.5.
        let c = concavity(&fixtures::l_prism(), 4096, 3).unwrap();
        assert!((c.value - 0.5).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn loose_tolerance_gives_single_hull() {
        let out = convex_decompose(&fixtures::l_prism(), &AcdParams::with_tolerance(1.0)).unwrap();
        assert_eq!(out.pieces.len(), 1);
        assert!((out.pieces[0].hull.volume() - 3.5).abs() < 1e-6);
    }

    #[test]
    fn l_prism_tight_tolerance() {
        let out = convex_decompose(&fixtures::l_prism(), &AcdParams::with_tolerance(0.05)).unwrap();
        assert!(out.pieces.len() >= 2);
        let vol: f64 = out.pieces.iter().map(|p| p.source.volume().unwrap()).sum();
        assert!((vol - 3.0).abs() < 1e-6);
        let hull_vol: f64 = out.pieces.iter().map(|p| p.hull.volume()).sum();
        assert!((hull_vol - 3.0).abs() < 0.03);
        assert!(out.max_concavity() <= 0.05);
    }

    #[test]
    fn zero_tolerance_is_rejected() {
        assert!(matches!(
            convex_decompose(&fixtures::l_prism(), &AcdParams::with_tolerance(0.0)),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn budget_is_respected() {
        let p = AcdParams { tolerance: 1e-6, max_parts: 3, ..Default::default() };
        let out = convex_decompose(&fixtures::dimpled_cube(), &p).unwrap();
        assert!(out.pieces.len() <= 3);
        assert!(out.budget_exhausted);
    }
}
