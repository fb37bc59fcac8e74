//! Synthetic test meshes.
//!
//! Besides a few hand-built shapes this module has [`LayeredSolid`], which
//! stacks planar cross-sections along z and closes them into a watertight
//! surface. Most fixtures are layered solids.

use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::geom::{point_in_polygon_2d, polygon_area_2d, Point};
use crate::mesh::{weld_points, TriangleMesh};
use crate::triangulate::triangulate;

/// Axis-aligned box with outward, counter-clockwise faces.
pub fn box_mesh(min: [f64; 3], max: [f64; 3]) -> TriangleMesh {
    let v = |i: usize| {
        Point::new(
            if i & 1 == 0 { min[0] } else { max[0] },
            if i & 2 == 0 { min[1] } else { max[1] },
            if i & 4 == 0 { min[2] } else { max[2] },
        )
    };
    let vertices: Vec<Point> = (0..8).map(v).collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
    ];
    TriangleMesh::from_parts_unchecked(vertices, faces)
}

pub fn unit_cube() -> TriangleMesh {
    box_mesh([0.0; 3], [1.0; 3])
}

/// One connected piece of a cross-section: an outer ring and its holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub outer: Vec<[f64; 2]>,
    pub holes: Vec<Vec<[f64; 2]>>,
}

impl Section {
    pub fn new(outer: Vec<[f64; 2]>) -> Self {
        Section { outer, holes: Vec::new() }
    }

    pub fn with_hole(mut self, hole: Vec<[f64; 2]>) -> Self {
        self.holes.push(hole);
        self
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        point_in_polygon_2d(p, &self.outer) && !self.holes.iter().any(|h| point_in_polygon_2d(p, h))
    }
}

/// A solid built from cross-sections stacked along z.
///
/// Layer `i` occupies `[z[i], z[i + 1]]`. Rings of one layer must not cross
/// each other, and rings of consecutive layers must either be identical
/// (the wall continues) or not touch.
#[derive(Debug, Clone, Default)]
pub struct LayeredSolid {
    levels: Vec<f64>,
    layers: Vec<Vec<Section>>,
}

impl LayeredSolid {
    pub fn new(z0: f64) -> Self {
        LayeredSolid { levels: vec![z0], layers: Vec::new() }
    }

    /// Adds a layer of the given sections from the current top to `z_top`.
    pub fn layer(mut self, z_top: f64, sections: Vec<Section>) -> Self {
        assert!(z_top > *self.levels.last().unwrap(), "layers must go up");
        self.levels.push(z_top);
        self.layers.push(sections);
        self
    }

    pub fn build(&self) -> TriangleMesh {
        let mut tris: Vec<[Point; 3]> = Vec::new();
        // Walls.
        for (i, layer) in self.layers.iter().enumerate() {
            let (z0, z1) = (self.levels[i], self.levels[i + 1]);
            for s in layer {
                let mut rings = vec![oriented(&s.outer, true)];
                rings.extend(s.holes.iter().map(|h| oriented(h, false)));
                for r in &rings {
                    for k in 0..r.len() {
                        let (p, q) = (r[k], r[(k + 1) % r.len()]);
                        let p0 = Point::new(p[0], p[1], z0);
                        let q0 = Point::new(q[0], q[1], z0);
                        let p1 = Point::new(p[0], p[1], z1);
                        let q1 = Point::new(q[0], q[1], z1);
                        tris.push([p0, q0, q1]);
                        tris.push([p0, q1, p1]);
                    }
                }
            }
        }
        // Horizontal faces where the material changes.
        let empty = Vec::new();
        for (i, &z) in self.levels.iter().enumerate() {
            let below = if i == 0 { &empty } else { &self.layers[i - 1] };
            let above = self.layers.get(i).unwrap_or(&empty);
            self.interface(below, above, z, &mut tris);
        }
        let soup: Vec<Point> = tris.iter().flatten().copied().collect();
        let (vertices, remap) = weld_points(&soup, 0.0);
        let faces = remap.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        TriangleMesh::from_parts_unchecked(vertices, faces)
    }

    fn interface(&self, below: &[Section], above: &[Section], z: f64, out: &mut Vec<[Point; 3]>) {
        let rings_of = |layer: &[Section]| -> Vec<Vec<[f64; 2]>> {
            layer
                .iter()
                .flat_map(|s| std::iter::once(oriented(&s.outer, true)).chain(s.holes.iter().map(|h| oriented(h, true))))
                .collect()
        };
        let (rb, ra) = (rings_of(below), rings_of(above));
        // Rings present in both layers continue as walls and bound nothing here.
        let mut xor: Vec<Vec<[f64; 2]>> = rb.iter().filter(|r| !ra.contains(r)).cloned().collect();
        xor.extend(ra.iter().filter(|r| !rb.contains(r)).cloned());
        if xor.is_empty() {
            return;
        }
        let inside = |a: &Vec<[f64; 2]>, b: &Vec<[f64; 2]>| point_in_polygon_2d(a[0], b);
        let depth: Vec<usize> = (0..xor.len())
            .map(|i| (0..xor.len()).filter(|&j| j != i && inside(&xor[i], &xor[j])).count())
            .collect();
        for i in (0..xor.len()).filter(|&i| depth[i] % 2 == 0) {
            let mut rings = vec![xor[i].clone()];
            rings.extend(
                (0..xor.len())
                    .filter(|&j| depth[j] == depth[i] + 1 && inside(&xor[j], &xor[i]))
                    .map(|j| xor[j].clone()),
            );
            let flat: Vec<[f64; 2]> = rings.iter().flatten().copied().collect();
            let tri_ids = triangulate(&rings).expect("fixture cross-section triangulates");
            let Some(probe) = tri_ids.iter().find_map(|t| {
                let (a, b, c) = (flat[t[0]], flat[t[1]], flat[t[2]]);
                (polygon_area_2d(&[a, b, c]).abs() > 1e-12)
                    .then(|| [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0])
            }) else {
                continue;
            };
            let solid_below = below.iter().any(|s| s.contains(probe));
            let solid_above = above.iter().any(|s| s.contains(probe));
            debug_assert!(solid_below != solid_above);
            for t in tri_ids {
                let [a, b, c] = t.map(|k| Point::new(flat[k][0], flat[k][1], z));
                // Triangulation is counter-clockwise, i.e. facing +z.
                out.push(if solid_below { [a, b, c] } else { [a, c, b] });
            }
        }
    }
}

fn oriented(ring: &[[f64; 2]], ccw: bool) -> Vec<[f64; 2]> {
    let mut r = ring.to_vec();
    if (polygon_area_2d(&r) > 0.0) != ccw {
        r.reverse();
    }
    r
}

/// Regular polygon approximating a circle, counter-clockwise.
pub fn circle(center: [f64; 2], radius: f64, segments: usize) -> Vec<[f64; 2]> {
    (0..segments)
        .map(|i| {
            let a = TAU * i as f64 / segments as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

pub fn rect(min: [f64; 2], max: [f64; 2]) -> Vec<[f64; 2]> {
    vec![min, [max[0], min[1]], max, [min[0], max[1]]]
}

/// 2×2×1 block with the corner block `[1,2]×[1,2]×[0,1]` removed.
pub fn l_prism() -> TriangleMesh {
    let l = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
    LayeredSolid::new(0.0).layer(1.0, vec![Section::new(l)]).build()
}

/// Unit cube with a square pyramidal pit in the top face: opening
/// `[0.3,0.7]²` at z = 1, apex at `(0.5, 0.5, 0.8)`.
pub fn dimpled_cube() -> TriangleMesh {
    let mut tris: Vec<[Point; 3]> = Vec::new();
    let cube = unit_cube();
    // Keep all cube faces except the top (+z) pair.
    for [a, b, c] in cube.triangles() {
        if !(a.z == 1.0 && b.z == 1.0 && c.z == 1.0) {
            tris.push([a, b, c]);
        }
    }
    let outer = rect([0.0, 0.0], [1.0, 1.0]);
    let hole = rect([0.3, 0.3], [0.7, 0.7]);
    let rings = vec![outer, hole.clone()];
    let flat: Vec<[f64; 2]> = rings.iter().flatten().copied().collect();
    for t in triangulate(&rings).unwrap() {
        tris.push(t.map(|k| Point::new(flat[k][0], flat[k][1], 1.0)));
    }
    let apex = Point::new(0.5, 0.5, 0.8);
    for k in 0..4 {
        let (p, q) = (hole[k], hole[(k + 1) % 4]);
        // Pit walls face up and inward.
        tris.push([Point::new(p[0], p[1], 1.0), Point::new(q[0], q[1], 1.0), apex]);
    }
    soup_to_mesh(&tris)
}

/// Two cube lobes joined by a thin square bar, symmetric about z = 1.5.
pub fn dumbbell() -> TriangleMesh {
    let lobe = Section::new(rect([-0.5, -0.5], [0.5, 0.5]));
    let bar = Section::new(rect([-0.15, -0.15], [0.15, 0.15]));
    LayeredSolid::new(0.0)
        .layer(1.0, vec![lobe.clone()])
        .layer(2.0, vec![bar])
        .layer(3.0, vec![lobe])
        .build()
}

/// Square ring (a genus-one "torus" with square cross-section):
/// `[0,3]²` minus `[1,2]²`, height 1.
pub fn square_ring() -> TriangleMesh {
    let s = Section::new(rect([0.0, 0.0], [3.0, 3.0])).with_hole(rect([1.0, 1.0], [2.0, 2.0]));
    LayeredSolid::new(0.0).layer(1.0, vec![s]).build()
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|c| Point::from(nalgebra::Vector3::from(*c).normalize()))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Point>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (verts[a as usize].coords + verts[b as usize].coords).normalize();
                verts.push(Point::from(m));
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|p| Point::from(p.coords * radius)).collect();
    TriangleMesh::from_parts_unchecked(verts, faces)
}

/// Layout of [`motor_like`], exposed so tests can place regions on its
/// features.
pub mod motor {
    /// Half-width of the square mounting flange.
    pub const FLANGE: f64 = 1.4;
    pub const FLANGE_TOP: f64 = 0.2;
    /// Centres of the four bolt holes; each sits in a counterbored boss.
    pub const BOLTS: [[f64; 2]; 4] = [[1.1, 1.1], [-1.1, 1.1], [-1.1, -1.1], [1.1, -1.1]];
    pub const BOLT_RADIUS: f64 = 0.1;
    pub const COUNTERBORE_RADIUS: f64 = 0.17;
    pub const COUNTERBORE_DEPTH: f64 = 0.08;
    pub const BODY_RADIUS: f64 = 1.0;
    pub const FIN_DEPTH: f64 = 0.04;
    pub const FIN_COUNT: usize = 12;
    pub const BODY_TOP: f64 = 2.0;
    pub const CAP_RADIUS: f64 = 0.6;
    pub const CAP_TOP: f64 = 2.15;
    /// Lifting eye block with a blind hole.
    pub const EYE_HALF: [f64; 2] = [0.4, 0.25];
    pub const EYE_HOLE_RADIUS: f64 = 0.12;
    pub const EYE_TOP: f64 = 2.55;
    pub const SEGMENTS: usize = 48;
}

/// Motor-like test part: square flange with four counterbored bolt holes,
/// a finned cylindrical body, an end cap and a lifting eye with a blind hole.
pub fn motor_like() -> TriangleMesh {
    use motor::*;
    let bolt_ring = |r: f64| BOLTS.iter().map(|&c| circle(c, r, 24)).collect::<Vec<_>>();
    let flange = |r: f64| {
        let mut s = Section::new(rect([-FLANGE, -FLANGE], [FLANGE, FLANGE]));
        s.holes = bolt_ring(r);
        s
    };
    let mut solid = LayeredSolid::new(0.0)
        .layer(FLANGE_TOP - COUNTERBORE_DEPTH, vec![flange(BOLT_RADIUS)])
        .layer(FLANGE_TOP, vec![flange(COUNTERBORE_RADIUS)]);
    let fin_pitch = (BODY_TOP - FLANGE_TOP) / (2 * FIN_COUNT) as f64;
    for k in 0..2 * FIN_COUNT {
        let r = if k % 2 == 0 { BODY_RADIUS - FIN_DEPTH } else { BODY_RADIUS };
        let top = FLANGE_TOP + fin_pitch * (k + 1) as f64;
        solid = solid.layer(top, vec![Section::new(circle([0.0, 0.0], r, SEGMENTS))]);
    }
    let eye = Section::new(rect([-EYE_HALF[0], -EYE_HALF[1]], EYE_HALF))
        .with_hole(circle([0.0, 0.0], EYE_HOLE_RADIUS, 24));
    solid
        .layer(CAP_TOP, vec![Section::new(circle([0.0, 0.0], CAP_RADIUS, SEGMENTS))])
        .layer(EYE_TOP, vec![eye])
        .build()
}

fn soup_to_mesh(tris: &[[Point; 3]]) -> TriangleMesh {
    let soup: Vec<Point> = tris.iter().flatten().copied().collect();
    let (vertices, remap) = weld_points(&soup, 0.0);
    let faces = remap.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    TriangleMesh::from_parts_unchecked(vertices, faces)
}

/// Every fixture with a short name.
pub fn all() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("cube", unit_cube()),
        ("l_prism", l_prism()),
        ("dimpled_cube", dimpled_cube()),
        ("dumbbell", dumbbell()),
        ("square_ring", square_ring()),
        ("icosphere", icosphere(2, 1.0)),
        ("motor_like", motor_like()),
    ]
}
