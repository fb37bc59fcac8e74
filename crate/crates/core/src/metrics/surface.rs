use rayon::prelude::*;

use super::bvh::TriangleBvh;
use crate::convex::ConvexPart;
use crate::geom::{triangle_area, triangle_unit_normal, Aabb, Plane, Point};
use crate::pipeline::Decomposition;

type Polygon = Vec<Point>;

/// Splits a convex polygon by `plane` into the parts with signed distance
/// `≤ 0` and `≥ 0`. Distances within `slack` count as on the plane, so a
/// polygon lying in the plane goes entirely to the first part.
fn split_polygon(poly: &[Point], plane: &Plane, slack: f64) -> (Polygon, Polygon) {
    let sd: Vec<f64> = poly
        .iter()
        .map(|p| {
            let d = plane.signed_distance(p);
            if d.abs() <= slack { 0.0 } else { d }
        })
        .collect();
    if sd.iter().all(|&d| d <= 0.0) {
        return (poly.to_vec(), Vec::new());
    }
    if sd.iter().all(|&d| d >= 0.0) {
        return (Vec::new(), poly.to_vec());
    }
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        let (a, b, da, db) = (&poly[i], &poly[j], sd[i], sd[j]);
        if da <= 0.0 {
            inside.push(*a);
        }
        if da >= 0.0 {
            outside.push(*a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            let x = a + (b - a) * t;
            inside.push(x);
            outside.push(x);
        }
    }
    (inside, outside)
}

fn polygon_area(poly: &[Point]) -> f64 {
    (1..poly.len().saturating_sub(1)).map(|k| triangle_area(&poly[0], &poly[k], &poly[k + 1])).sum()
}

/// Pieces of `poly` outside `part`.
fn outside_of(poly: Polygon, part: &ConvexPart, slack: f64) -> Vec<Polygon> {
    let mut out = Vec::new();
    let mut cur = poly;
    for plane in part.planes() {
        let (inside, outside) = split_polygon(&cur, plane, slack);
        if outside.len() >= 3 {
            out.push(outside);
        }
        if inside.len() < 3 {
            return out;
        }
        cur = inside;
    }
    out
}

/// Clips a convex polygon to a closed box.
pub(crate) fn clip_polygon_to_box(poly: &[Point], aabb: &Aabb) -> Option<Polygon> {
    let mut cur = poly.to_vec();
    for plane in aabb.planes() {
        cur = split_polygon(&cur, &plane, 0.0).0;
        if cur.len() < 3 {
            return None;
        }
    }
    Some(cur)
}

fn fan(poly: &[Point], min_area: f64, out: &mut Vec<[Point; 3]>) {
    for k in 1..poly.len() - 1 {
        let t = [poly[0], poly[k], poly[k + 1]];
        if triangle_area(&t[0], &t[1], &t[2]) > min_area {
            out.push(t);
        }
    }
}

/// Triangles of `tris` clipped to a closed box.
pub fn clip_triangles_to_box(tris: &[[Point; 3]], aabb: &Aabb) -> Vec<[Point; 3]> {
    let mut out = Vec::new();
    for t in tris {
        let Some(tb) = Aabb::from_points(t.iter()) else { continue };
        if !tb.intersects(aabb, 0.0) {
            continue;
        }
        if aabb.contains_box(&tb, 0.0) {
            out.push(*t);
        } else if let Some(p) = clip_polygon_to_box(t, aabb) {
            fan(&p, 0.0, &mut out);
        }
    }
    out
}

/// The outer surface of the union of a decomposition's pieces.
///
/// Each face of a convex part is clipped against every other part and the
/// covered pieces dropped, so faces shared by neighbours (internal cut
/// faces) disappear. Where two parts have coplanar faces with the same
/// orientation over a common area, the lower-indexed part keeps it. Faces
/// of exact meshes are clipped against the convex parts; faces lying on the
/// box of another region's exact mesh and touching that mesh are dropped.
pub fn visible_surface(decomp: &Decomposition) -> Vec<[Point; 3]> {
    let Some(bounds) = decomp.aabb() else { return Vec::new() };
    let slack = 1e-9 * bounds.diagonal();
    let min_area = slack * slack;
    let parts: Vec<&ConvexPart> = decomp.parts.iter().map(|p| &p.part).collect();

    let clip_face = |tri: [Point; 3], owner: Option<usize>| -> Vec<[Point; 3]> {
        let Some(n) = triangle_unit_normal(&tri[0], &tri[1], &tri[2]) else { return Vec::new() };
        let d = n.dot(&tri[0].coords);
        let tb = Aabb::from_points(tri.iter()).expect("three points");
        let mut pieces = vec![tri.to_vec()];
        for (j, other) in parts.iter().enumerate() {
            if Some(j) == owner || !other.aabb().intersects(&tb, slack) {
                continue;
            }
            let same_side = other.planes().iter().any(|pl| pl.normal().dot(&n) > 1.0 - 1e-9 && (pl.offset() - d).abs() <= slack);
            // The face lies on `other`'s boundary with matching orientation:
            // keep it unless `other` comes first.
            if same_side && owner.is_none_or(|i| j > i) {
                continue;
            }
            pieces = pieces.into_iter().flat_map(|p| outside_of(p, other, slack)).collect();
            if pieces.is_empty() {
                break;
            }
        }
        let mut out = Vec::new();
        for p in pieces {
            if polygon_area(&p) > min_area {
                fan(&p, min_area, &mut out);
            }
        }
        out
    };

    let mut tris: Vec<[Point; 3]> = parts
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, part)| {
            let v = part.vertices();
            part.faces().iter().flat_map(move |f| clip_face(f.map(|k| v[k as usize]), Some(i))).collect::<Vec<_>>()
        })
        .collect();
    let exact_boxes: Vec<(usize, Aabb, TriangleBvh)> = decomp
        .exact_meshes
        .iter()
        .enumerate()
        .filter_map(|(k, e)| {
            let r = decomp.regions.iter().find(|r| r.id == e.region)?;
            Some((k, r.aabb().ok()?, TriangleBvh::from_mesh(&e.mesh)))
        })
        .collect();
    for (k, e) in decomp.exact_meshes.iter().enumerate() {
        for t in e.mesh.triangles() {
            for piece in clip_face(t, None) {
                if !on_exact_cap(&piece, Some(k), &exact_boxes, slack) {
                    tris.push(piece);
                }
            }
        }
    }
    if !exact_boxes.is_empty() {
        tris.retain(|t| !on_exact_cap(t, None, &exact_boxes, slack));
    }
    tris
}

/// True when `t` lies on a face of another exact mesh's box and its centroid
/// touches that mesh: the two sides of a cut between pieces.
fn on_exact_cap(t: &[Point; 3], owner: Option<usize>, exact: &[(usize, Aabb, TriangleBvh)], slack: f64) -> bool {
    let c = Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
    exact.iter().any(|(k, bx, bvh)| {
        Some(*k) != owner
            && bx.contains_point(&c, slack)
            && bx.planes().iter().any(|pl| t.iter().all(|p| pl.signed_distance(p).abs() <= slack))
            && bvh.distance(&c) <= slack
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::tests::cube_part;

    fn area(tris: &[[Point; 3]]) -> f64 {
        tris.iter().map(|t| triangle_area(&t[0], &t[1], &t[2])).sum()
    }

    #[test]
    fn shared_faces_disappear() {
        let a = cube_part([0.0; 3], [0.5, 1.0, 1.0]);
        let b = cube_part([0.5, 0.0, 0.0], [1.0; 3]);
        let d = Decomposition::from_parts(vec![a, b]);
        assert!((area(&visible_surface(&d)) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_cubes_count_once() {
        let a = cube_part([0.0; 3], [1.0; 3]);
        let b = cube_part([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
        let d = Decomposition::from_parts(vec![a, b]);
        // Union is a 1.5 × 1 × 1 box.
        assert!((area(&visible_surface(&d)) - 8.0).abs() < 1e-9);
    }

    #[test]
    fn box_clip() {
        let t = [Point::new(0.0, 0.0, 0.5), Point::new(2.0, 0.0, 0.5), Point::new(0.0, 2.0, 0.5)];
        let bx = Aabb::from_arrays([0.0; 3], [1.0; 3]).unwrap();
        // The triangle covers the whole unit square slice.
        assert!((area(&clip_triangles_to_box(&[t], &bx)) - 1.0).abs() < 1e-12);
    }
}
