//! Indexed triangle meshes: construction, validation, volume, surface
//! sampling and file I/O.

mod io;
mod sample;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use io::{
    load_mesh, load_mesh_bytes, parse_obj, parse_stl, save_mesh, write_obj, write_stl, LoadOptions,
    MeshFormat,
};
pub use sample::{sample_surface, sample_triangles, SurfaceSampleCloud};

use crate::error::{Error, Result};
use crate::geom::{triangle_area, Aabb, Point, Vector};

/// Indexed triangle surface. Faces are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[u32; 3]>,
}

/// Findings of [`TriangleMesh::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub empty: bool,
    pub vertex_count: usize,
    pub face_count: usize,
    pub watertight: bool,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    /// Edges shared by two faces that traverse it in the same direction.
    pub inconsistent_edges: usize,
    pub degenerate_faces: Vec<usize>,
}

impl TriangleMesh {
    /// Builds a mesh, checking that every index is in range.
    pub fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, f)) = faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&v| v as usize >= n))
        {
            return Err(Error::Parse(format!(
                "face {i} references vertex {} but the mesh has {n} vertices",
                f.iter().max().unwrap()
            )));
        }
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Parse("non-finite vertex coordinate".into()));
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub(crate) fn from_parts_unchecked(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> Self {
        debug_assert!(faces
            .iter()
            .all(|f| f.iter().all(|&v| (v as usize) < vertices.len())));
        TriangleMesh { vertices, faces }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Point>, Vec<[u32; 3]>) {
        (self.vertices, self.faces)
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Point; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Point; 3]> + '_ {
        (0..self.faces.len()).map(|i| self.triangle(i))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// Bounding box of the vertices; `None` for a mesh without vertices.
    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// Length of the bounding-box diagonal, 0 when empty.
    pub fn diagonal(&self) -> f64 {
        self.aabb().map_or(0.0, |b| b.diagonal())
    }

    /// Divergence-theorem volume without a watertightness check.
    pub fn signed_volume(&self) -> f64 {
        // Accumulate relative to the first vertex to limit cancellation.
        let origin = self.vertices.first().copied().unwrap_or_else(Point::origin);
        self.triangles()
            .map(|[a, b, c]| {
                let (a, b, c) = (a - origin, b - origin, c - origin);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Enclosed volume; positive for outward orientation.
    pub fn volume(&self) -> Result<f64> {
        let report = self.validate();
        if !report.watertight {
            return Err(Error::NotWatertight {
                boundary_edges: report.boundary_edges,
                non_manifold_edges: report.non_manifold_edges,
            });
        }
        Ok(self.signed_volume())
    }

    /// Area-weighted centroid of the enclosed volume.
    pub fn volume_centroid(&self) -> Option<Point> {
        let origin = self.vertices.first().copied()?;
        let mut acc = Vector::zeros();
        let mut vol = 0.0;
        for [a, b, c] in self.triangles() {
            let (a, b, c) = (a - origin, b - origin, c - origin);
            let v = a.dot(&b.cross(&c));
            vol += v;
            acc += (a + b + c) * v;
        }
        (vol.abs() > 0.0).then(|| origin + acc / (4.0 * vol))
    }

    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.validate().watertight
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            empty: self.faces.is_empty(),
            vertex_count: self.vertices.len(),
            face_count: self.faces.len(),
            ..Default::default()
        };
        if report.empty {
            return report;
        }
        // Undirected edge -> (uses as (lo, hi), uses as (hi, lo)).
        let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(self.faces.len() * 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a == b {
                    continue;
                }
                let e = edges.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        for &(fwd, bwd) in edges.values() {
            match fwd + bwd {
                1 => report.boundary_edges += 1,
                2 if fwd != 1 => report.inconsistent_edges += 1,
                2 => {}
                _ => report.non_manifold_edges += 1,
            }
        }
        let diag = self.diagonal();
        let min_area = 1e-12 * diag * diag;
        report.degenerate_faces = (0..self.faces.len())
            .filter(|&i| {
                let f = self.faces[i];
                f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || self.face_area(i) <= min_area
            })
            .collect();
        report.watertight = report.boundary_edges == 0
            && report.non_manifold_edges == 0
            && report.inconsistent_edges == 0;
        report
    }

    /// Drops vertices not referenced by any face.
    pub fn compacted(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                f.map(|v| {
                    let slot = &mut remap[v as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[v as usize]);
                    }
                    *slot
                })
            })
            .collect();
        TriangleMesh { vertices, faces }
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, by: &Vector) -> TriangleMesh {
        self.map_vertices(|p| p + by)
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        self.map_vertices(|p| Point::from(p.coords * s))
    }

    /// Reverses the orientation of every face.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }

    /// Concatenates meshes without welding.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| f.map(|v| v + base)));
        }
        out
    }

    /// Merges vertices closer than `tol` and drops faces that collapse.
    pub fn welded(&self, tol: f64) -> TriangleMesh {
        let (vertices, remap) = weld_points(&self.vertices, tol);
        let faces = self
            .faces
            .iter()
            .map(|f| f.map(|v| remap[v as usize]))
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        TriangleMesh { vertices, faces }
    }

    /// Splits the surface into edge-connected shells.
    pub fn shells(&self) -> Vec<TriangleMesh> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for f in &self.faces {
            let r0 = find(&mut parent, f[0] as usize);
            for &v in &f[1..] {
                let r = find(&mut parent, v as usize);
                if r != r0 {
                    parent[r] = r0;
                }
            }
            let r0 = find(&mut parent, f[0] as usize);
            for &v in &f[1..] {
                let r = find(&mut parent, v as usize);
                parent[r] = r0;
            }
        }
        let mut groups: Vec<(usize, Vec<[u32; 3]>)> = Vec::new();
        let mut index: HashMap<usize, usize> = HashMap::new();
        for f in &self.faces {
            let root = find(&mut parent, f[0] as usize);
            let slot = *index.entry(root).or_insert_with(|| {
                groups.push((root, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(*f);
        }
        groups
            .into_iter()
            .map(|(_, faces)| {
                TriangleMesh {
                    vertices: self.vertices.clone(),
                    faces,
                }
                .compacted()
            })
            .collect()
    }

    /// Groups shells into solids: inward-facing shells (cavities) are
    /// attached to the smallest outer shell that contains them.
    pub fn solids(&self) -> Vec<TriangleMesh> {
        let shells = self.shells();
        if shells.len() <= 1 {
            return shells;
        }
        let vols: Vec<f64> = shells.iter().map(|s| s.signed_volume()).collect();
        let mut outer: Vec<usize> = (0..shells.len()).filter(|&i| vols[i] > 0.0).collect();
        outer.sort_by(|&a, &b| vols[a].total_cmp(&vols[b]));
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); shells.len()];
        for i in 0..shells.len() {
            if vols[i] > 0.0 {
                members[i].push(i);
                continue;
            }
            let probe = shells[i].vertices[0];
            let host = outer
                .iter()
                .copied()
                .find(|&o| shells[o].winding_number(&probe) > 0.5);
            match host {
                Some(o) => members[o].push(i),
                None => members[i].push(i),
            }
        }
        members
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|m| TriangleMesh::concat(m.iter().map(|&i| &shells[i])))
            .collect()
    }

    /// Generalized winding number of a closed surface around `p`
    /// (≈1 inside, ≈0 outside).
    pub fn winding_number(&self, p: &Point) -> f64 {
        let mut total = 0.0;
        for [a, b, c] in self.triangles() {
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }
}

/// Welds points closer than `tol` (grid hashing). Returns the unique points
/// and, for every input point, its index among them. First occurrence wins.
pub fn weld_points(points: &[Point], tol: f64) -> (Vec<Point>, Vec<u32>) {
    let mut unique: Vec<Point> = Vec::with_capacity(points.len());
    let mut remap = Vec::with_capacity(points.len());
    if tol <= 0.0 {
        let mut exact: HashMap<[u64; 3], u32> = HashMap::new();
        for p in points {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let id = *exact.entry(key).or_insert_with(|| {
                unique.push(*p);
                (unique.len() - 1) as u32
            });
            remap.push(id);
        }
        return (unique, remap);
    }
    let cell = |v: f64| (v / tol).floor() as i64;
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let tol2 = tol * tol;
    for p in points {
        let key = [cell(p.x), cell(p.y), cell(p.z)];
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[key[0] + dx, key[1] + dy, key[2] + dz]) {
                        for &id in ids {
                            if (unique[id as usize] - p).norm_squared() <= tol2 {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let id = found.unwrap_or_else(|| {
            unique.push(*p);
            let id = (unique.len() - 1) as u32;
            grid.entry(key).or_default().push(id);
            id
        });
        remap.push(id);
    }
    (unique, remap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cube_volume_and_box() {
        let cube = fixtures::unit_cube();
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.faces().len(), 12);
        assert!((cube.volume().unwrap() - 1.0).abs() < 1e-12);
        let b = cube.aabb().unwrap();
        assert_eq!(b.min, Point::new(0.0, 0.0, 0.0));
        assert_eq!(b.max, Point::new(1.0, 1.0, 1.0));
        assert!((cube.scaled(2.0).volume().unwrap() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn l_prism_volume() {
        let l = fixtures::l_prism();
        assert!((l.volume().unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn volume_is_translation_invariant() {
        let l = fixtures::l_prism();
        let moved = l.translated(&Vector::new(123.0, -45.0, 6.5));
        assert!((moved.volume().unwrap() - 3.0).abs() < 1e-9);
        let s = 0.37;
        assert!((l.scaled(s).volume().unwrap() - 3.0 * s * s * s).abs() < 1e-9);
    }

    #[test]
    fn removed_face_leaves_three_boundary_edges() {
        let cube = fixtures::unit_cube();
        let (v, mut f) = cube.into_parts();
        f.pop();
        let open = TriangleMesh::new(v, f).unwrap();
        let report = open.validate();
        assert!(!report.watertight);
        assert_eq!(report.boundary_edges, 3);
        assert!(matches!(open.volume(), Err(Error::NotWatertight { .. })));
    }

    #[test]
    fn empty_mesh_report() {
        let report = TriangleMesh::default().validate();
        assert!(report.empty);
        assert!(!report.watertight);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let cube = fixtures::unit_cube();
        let (v, mut f) = cube.into_parts();
        f.push([0, 1, 999]);
        assert!(matches!(TriangleMesh::new(v, f), Err(Error::Parse(_))));
    }

    #[test]
    fn flipped_orientation_is_inconsistent_free_but_negative() {
        let cube = fixtures::unit_cube().flipped();
        assert!(cube.validate().watertight);
        assert!((cube.signed_volume() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn weld_merges_nearby_points() {
        let pts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1e-10, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
        ];
        let (u, remap) = weld_points(&pts, 1e-9);
        assert_eq!(u.len(), 2);
        assert_eq!(remap, vec![0, 0, 1]);
    }

    #[test]
    fn winding_number_inside_outside() {
        let cube = fixtures::unit_cube();
        assert!((cube.winding_number(&Point::new(0.5, 0.5, 0.5)) - 1.0).abs() < 1e-9);
        assert!(cube.winding_number(&Point::new(1.5, 0.5, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn solids_keep_cavities_with_their_shell() {
        let outer = fixtures::box_mesh([0.0; 3], [1.0; 3]);
        let inner = fixtures::box_mesh([0.25; 3], [0.75; 3]).flipped();
        let other = fixtures::box_mesh([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]);
        let all = TriangleMesh::concat([&outer, &inner, &other]);
        let solids = all.solids();
        assert_eq!(solids.len(), 2);
        let mut vols: Vec<f64> = solids.iter().map(|s| s.signed_volume()).collect();
        vols.sort_by(f64::total_cmp);
        assert!((vols[0] - 0.875).abs() < 1e-12);
        assert!((vols[1] - 1.0).abs() < 1e-12);
    }
}
