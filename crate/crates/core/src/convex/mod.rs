//! Convex polytopes: hulls, plane splits, pairwise merge and GJK distance.

mod gjk;
mod hull;
mod split;

use serde::{Deserialize, Serialize};

pub use gjk::{gjk_distance, gjk_intersects, GJK_MAX_ITERATIONS};
pub use split::split_by_plane;

use crate::error::{Error, Result};
use crate::geom::{closest_point_on_triangle, triangle_area, triangle_unit_normal, Aabb, Plane, Point, Vector};
use crate::mesh::TriangleMesh;

/// Closed convex polytope with a triangulated, outward-oriented surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPart {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
    volume: f64,
    planes: Vec<Plane>,
    aabb: Aabb,
}

/// Serialized form: just the surface.
#[derive(Serialize, Deserialize)]
struct PartRepr {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
}

impl Serialize for ConvexPart {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartRepr { vertices: self.vertices.clone(), faces: self.faces.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexPart {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PartRepr::deserialize(d)?;
        if r.faces.iter().flatten().any(|&i| i as usize >= r.vertices.len()) || r.vertices.is_empty() {
            return Err(serde::de::Error::custom("face index out of range"));
        }
        Ok(ConvexPart::from_surface(r.vertices, r.faces))
    }
}

/// Convex hull of a point set.
pub fn convex_hull(points: &[Point]) -> Result<ConvexPart> {
    let (v, f) = hull::quickhull(points)?;
    Ok(ConvexPart::from_surface(v, f))
}

impl ConvexPart {
    /// Wraps a closed convex surface. The caller guarantees convexity and
    /// orientation.
    pub(crate) fn from_surface(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> ConvexPart {
        let aabb = Aabb::from_points(vertices.iter()).expect("convex part has vertices");
        let mesh = TriangleMesh::from_parts_unchecked(vertices, faces);
        let volume = mesh.signed_volume();
        let planes = face_planes(&mesh, aabb.diagonal());
        let (vertices, faces) = mesh.into_parts();
        ConvexPart { vertices, faces, volume, planes, aabb }
    }

    /// Wraps a watertight mesh that is already convex, keeping its faces.
    pub fn from_mesh(mesh: &TriangleMesh) -> Result<ConvexPart> {
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
        let part = ConvexPart::from_surface(mesh.vertices().to_vec(), mesh.faces().to_vec());
        if !part.is_valid() {
            return Err(Error::DegenerateInput("mesh is not convex".into()));
        }
        Ok(part)
    }

    /// Hull of this part's vertices.
    pub fn rehull(&self) -> Result<ConvexPart> {
        convex_hull(&self.vertices)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    pub fn diagonal(&self) -> f64 {
        self.aabb.diagonal()
    }

    /// Distinct supporting planes of the faces, outward normals.
    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    /// Tolerance used for convexity checks, `1e-7 · diagonal`.
    pub fn convexity_tolerance(&self) -> f64 {
        1e-7 * self.aabb.diagonal()
    }

    pub fn to_mesh(&self) -> TriangleMesh {
        TriangleMesh::from_parts_unchecked(self.vertices.clone(), self.faces.clone())
    }

    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| triangle_area(&self.vertices[f[0] as usize], &self.vertices[f[1] as usize], &self.vertices[f[2] as usize]))
            .sum()
    }

    /// Volume centroid.
    pub fn centroid(&self) -> Point {
        self.to_mesh()
            .volume_centroid()
            .unwrap_or_else(|| self.aabb.center())
    }

    /// Whether `p` is inside every face halfspace with `slack`.
    pub fn contains_point(&self, p: &Point, slack: f64) -> bool {
        self.aabb.contains_point(p, slack) && self.planes.iter().all(|pl| pl.signed_distance(p) <= slack)
    }

    /// Largest signed distance of `p` to a face plane (negative inside).
    pub fn max_plane_distance(&self, p: &Point) -> f64 {
        self.planes
            .iter()
            .map(|pl| pl.signed_distance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True iff every vertex lies in `aabb` expanded by `slack`.
    pub fn fully_inside_box(&self, aabb: &Aabb, slack: f64) -> bool {
        self.vertices.iter().all(|v| aabb.contains_point(v, slack))
    }

    /// Checks that every vertex is behind every face plane within
    /// `convexity_tolerance`, the surface is closed and the volume positive.
    pub fn is_valid(&self) -> bool {
        let tol = self.convexity_tolerance();
        self.volume > 0.0
            && self.to_mesh().validate().watertight
            && self
                .planes
                .iter()
                .all(|pl| self.vertices.iter().all(|v| pl.signed_distance(v) <= tol))
    }

    /// Support point in direction `d` (local frame).
    #[inline]
    pub fn support(&self, d: &Vector) -> Point {
        let mut best = self.vertices[0];
        let mut best_dot = best.coords.dot(d);
        for v in &self.vertices[1..] {
            let dot = v.coords.dot(d);
            if dot > best_dot {
                best_dot = dot;
                best = *v;
            }
        }
        best
    }

    /// Euclidean distance from `p` to the solid part; 0 inside.
    pub fn distance_to_point(&self, p: &Point) -> f64 {
        if self.max_plane_distance(p) <= 0.0 {
            return 0.0;
        }
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i as usize]);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of the intersection with another convex part.
    pub fn overlap_volume(&self, other: &ConvexPart) -> f64 {
        if !self.aabb.intersects(&other.aabb, 0.0) {
            return 0.0;
        }
        let mut piece = self.clone();
        for pl in &other.planes {
            match split_by_plane(&piece, pl) {
                (Some(inside), _) => piece = inside,
                (None, _) => return 0.0,
            }
        }
        piece.volume.max(0.0)
    }

    /// Portion of this part inside `aabb`, if any.
    pub fn clip_to_box(&self, aabb: &Aabb) -> Option<ConvexPart> {
        let mut piece = self.clone();
        for pl in aabb.planes() {
            piece = split_by_plane(&piece, &pl).0?;
        }
        Some(piece)
    }
}

/// Merges two parts into the hull of their vertices.
///
/// `volume_error = vol(hull) - vol(a) - vol(b) + vol(a ∩ b)`: the volume the
/// merged part adds beyond the union of the inputs.
pub fn merge_pair(a: &ConvexPart, b: &ConvexPart) -> Result<(ConvexPart, f64)> {
    let mut pts = a.vertices.clone();
    pts.extend_from_slice(&b.vertices);
    let merged = convex_hull(&pts)?;
    let overlap = a.overlap_volume(b);
    let err = merged.volume - a.volume - b.volume + overlap;
    Ok((merged, err))
}

fn face_planes(mesh: &TriangleMesh, diag: f64) -> Vec<Plane> {
    let mut planes: Vec<(Plane, f64)> = Vec::new();
    let min_area = 1e-14 * diag * diag;
    let offset_tol = 1e-9 * diag;
    for [a, b, c] in mesh.triangles() {
        let area = triangle_area(&a, &b, &c);
        if area <= min_area {
            continue;
        }
        let Some(n) = triangle_unit_normal(&a, &b, &c) else {
            continue;
        };
        let d = n.dot(&((a.coords + b.coords + c.coords) / 3.0));
        if let Some((pl, w)) = planes
            .iter_mut()
            .find(|(pl, _)| (pl.normal() - n).norm() < 1e-9 && (pl.offset() - d).abs() < offset_tol)
        {
            // Area-weighted running average keeps the plane of the bigger face.
            let total = *w + area;
            let nn = (pl.normal() * *w + n * area) / total;
            let dd = (pl.offset() * *w + d * area) / total;
            if let Ok(p) = Plane::new(nn, dd) {
                *pl = p;
            }
            *w = total;
            continue;
        }
        if let Ok(p) = Plane::new(n, d) {
            planes.push((p, area));
        }
    }
    planes.into_iter().map(|(p, _)| p).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn cube_part(min: [f64; 3], max: [f64; 3]) -> ConvexPart {
        convex_hull(fixtures::box_mesh(min, max).vertices()).unwrap()
    }

    #[test]
    fn cube_corners() {
        let cube = cube_part([0.0; 3], [1.0; 3]);
        assert_eq!(cube.vertices().len(), 8);
        assert!((cube.volume() - 1.0).abs() < 1e-12);
        assert_eq!(cube.planes().len(), 6);
        assert!(cube.is_valid());
    }

    #[test]
    fn interior_point_is_discarded() {
        let mut pts = fixtures::unit_cube().vertices().to_vec();
        pts.push(Point::new(0.5, 0.5, 0.5));
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices().len(), 8);
    }

    #[test]
    fn random_ball_points_are_contained() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        while pts.len() < 200 {
            let p = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if p.norm() <= 1.0 {
                pts.push(Point::from(p));
            }
        }
        let h = convex_hull(&pts).unwrap();
        assert!(h.is_valid());
        let tol = h.convexity_tolerance();
        // Brute-force halfspace check against every face.
        for f in h.faces() {
            let [a, b, c] = f.map(|i| h.vertices()[i as usize]);
            let n = (b - a).cross(&(c - a)).normalize();
            for p in &pts {
                assert!(n.dot(&(p - a)) <= tol);
            }
        }
        assert!(h.volume() <= 4.0 / 3.0 * std::f64::consts::PI);
    }

    #[test]
    fn degenerate_inputs() {
        let flat: Vec<Point> = (0..10).map(|i| Point::new(i as f64, (i * i) as f64, 0.0)).collect();
        assert!(matches!(convex_hull(&flat), Err(crate::Error::DegenerateInput(_))));
        let line: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(convex_hull(&line), Err(crate::Error::DegenerateInput(_))));
        let same = vec![Point::new(1.0, 1.0, 1.0); 5];
        assert!(matches!(convex_hull(&same), Err(crate::Error::DegenerateInput(_))));
    }

    #[test]
    fn hull_is_idempotent() {
        let s = fixtures::icosphere(2, 1.0);
        let h = convex_hull(s.vertices()).unwrap();
        let h2 = h.rehull().unwrap();
        let mut a: Vec<_> = h.vertices().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        let mut b: Vec<_> = h2.vertices().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn merge_complementary_halves() {
        let a = cube_part([0.0; 3], [0.5, 1.0, 1.0]);
        let b = cube_part([0.5, 0.0, 0.0], [1.0; 3]);
        let (m, err) = merge_pair(&a, &b).unwrap();
        assert!((m.volume() - 1.0).abs() < 1e-12);
        assert!(err.abs() < 1e-9);
    }

    #[test]
    fn merge_disjoint_cubes() {
        let a = cube_part([0.0; 3], [1.0; 3]);
        let b = cube_part([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]);
        let (m, err) = merge_pair(&a, &b).unwrap();
        assert!((m.volume() - 3.0).abs() < 1e-9);
        assert!((err - 1.0).abs() < 1e-9);
    }

    #[test]
    fn merge_with_itself() {
        let a = convex_hull(fixtures::icosphere(1, 1.0).vertices()).unwrap();
        let (m, err) = merge_pair(&a, &a).unwrap();
        assert!((m.volume() - a.volume()).abs() < 1e-9);
        assert!(err.abs() < 1e-9);
    }

    #[test]
    fn box_containment() {
        let cube = cube_part([0.0; 3], [1.0; 3]);
        let unit = Aabb::from_arrays([0.0; 3], [1.0; 3]).unwrap();
        assert!(cube.fully_inside_box(&unit, 1e-9));
        let shifted = cube_part([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
        assert!(!shifted.fully_inside_box(&unit, 1e-9));
    }

    #[test]
    fn centroid_inside_random_hulls() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<Point> = (0..12)
                .map(|_| Point::new(rng.random(), rng.random(), rng.random()))
                .collect();
            let h = convex_hull(&pts).unwrap();
            assert!(h.contains_point(&h.centroid(), 0.0));
        }
    }

    #[test]
    fn serde_round_trip() {
        let cube = cube_part([0.0; 3], [1.0; 3]);
        let json = serde_json::to_string(&cube).unwrap();
        let back: ConvexPart = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cube);
    }
}
