use std::collections::HashMap;

use super::{convex_hull, ConvexPart};
use crate::geom::{Plane, Point};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    In,
    On,
    Out,
}

/// Splits a convex part by `plane` into the part on the inside
/// (`normal · x <= offset`) and the part outside.
///
/// The cut is capped with a fan around the centroid of the cross-section.
/// A side with less than `1e-12` of the input volume is dropped and its
/// sliver left with the other side, which is then the unchanged input.
pub fn split_by_plane(part: &ConvexPart, plane: &Plane) -> (Option<ConvexPart>, Option<ConvexPart>) {
    let tol = 1e-12 * part.diagonal().max(plane.offset().abs());
    let dist: Vec<f64> = part.vertices.iter().map(|v| plane.signed_distance(v)).collect();
    let max = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = dist.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= tol {
        return (Some(part.clone()), None);
    }
    if min >= -tol {
        return (None, Some(part.clone()));
    }
    let side: Vec<Side> = dist
        .iter()
        .map(|&d| if d > tol { Side::Out } else if d < -tol { Side::In } else { Side::On })
        .collect();

    let inside = clip_side(part, plane, &side, Side::In);
    let outside = clip_side(part, plane, &side, Side::Out);
    let vol = part.volume;
    let sliver = 1e-12 * vol;
    match (inside, outside) {
        (Some(i), Some(o)) if i.volume >= sliver && o.volume >= sliver => (Some(i), Some(o)),
        (Some(i), o) if o.as_ref().is_none_or(|o| o.volume < sliver) && i.volume >= sliver => {
            (Some(part.clone()), None)
        }
        (i, Some(o)) if i.as_ref().is_none_or(|i| i.volume < sliver) && o.volume >= sliver => {
            (None, Some(part.clone()))
        }
        _ => {
            if max > -min {
                (None, Some(part.clone()))
            } else {
                (Some(part.clone()), None)
            }
        }
    }
}

/// Keeps the `keep` side of every face (On vertices belong to both sides)
/// and closes the cut.
fn clip_side(part: &ConvexPart, plane: &Plane, side: &[Side], keep: Side) -> Option<ConvexPart> {
    let kept = |s: Side| s == keep || s == Side::On;
    let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
    let mut verts: Vec<Point> = Vec::new();
    let mut id_of = |p: Point, verts: &mut Vec<Point>| -> u32 {
        *ids.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_insert_with(|| {
            verts.push(p);
            (verts.len() - 1) as u32
        })
    };
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut cut_points: Vec<u32> = Vec::new();
    for face in face_polygons(part) {
        let mut poly: Vec<u32> = Vec::with_capacity(face.len() + 1);
        let n = face.len();
        for k in 0..n {
            let (a, b) = (face[k] as usize, face[(k + 1) % n] as usize);
            let (sa, sb) = (side[a], side[b]);
            if kept(sa) {
                let id = id_of(part.vertices[a], &mut verts);
                if sa == Side::On {
                    cut_points.push(id);
                }
                poly.push(id);
            }
            let crosses = (sa == Side::In && sb == Side::Out) || (sa == Side::Out && sb == Side::In);
            if crosses {
                let p = plane.intersect_segment(&part.vertices[a], &part.vertices[b]);
                let id = id_of(p, &mut verts);
                cut_points.push(id);
                poly.push(id);
            }
        }
        poly.dedup();
        if poly.len() >= 2 && poly[0] == *poly.last().unwrap() {
            poly.pop();
        }
        for k in 1..poly.len().saturating_sub(1) {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    if faces.is_empty() {
        return None;
    }

    // Unpaired directed edges bound the cross-section.
    let mut count: HashMap<(u32, u32), i32> = HashMap::new();
    for f in &faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a, b)).or_default() += 1;
        }
    }
    let mut boundary: Vec<(u32, u32)> = count
        .keys()
        .filter(|&&(a, b)| !count.contains_key(&(b, a)))
        .copied()
        .collect();
    boundary.sort_unstable();
    let manifold = count.values().all(|&c| c == 1);
    let cut_coords: Vec<Point> = cut_points.iter().map(|&i| verts[i as usize]).collect();
    if boundary.len() >= 3 && manifold {
        let mut loop_ids: Vec<u32> = boundary.iter().map(|e| e.0).collect();
        loop_ids.sort_unstable();
        loop_ids.dedup();
        let c = loop_ids.iter().fold(nalgebra::Vector3::zeros(), |acc, &i| acc + verts[i as usize].coords)
            / loop_ids.len() as f64;
        let center = plane.project(&Point::from(c));
        let ci = verts.len() as u32;
        verts.push(center);
        for &(a, b) in &boundary {
            faces.push([b, a, ci]);
        }
        let piece = ConvexPart::from_surface(verts, faces);
        if piece.volume > 0.0 {
            return Some(piece);
        }
    }
    // Fallback: hull of the kept vertices and the cut points.
    let mut pts: Vec<Point> = part
        .vertices
        .iter()
        .zip(side)
        .filter(|(_, &s)| kept(s))
        .map(|(p, _)| *p)
        .collect();
    pts.extend(cut_coords);
    convex_hull(&pts).ok()
}

/// Groups coplanar triangles into convex polygons (vertex loops). A group
/// whose boundary is not a single loop falls back to its triangles.
fn face_polygons(part: &ConvexPart) -> Vec<Vec<u32>> {
    let tol = 1e-9 * part.diagonal();
    let mut groups: Vec<(Plane, Vec<usize>)> = Vec::new();
    for (fi, f) in part.faces.iter().enumerate() {
        let [a, b, c] = f.map(|i| part.vertices[i as usize]);
        let n = crate::geom::triangle_unit_normal(&a, &b, &c);
        let Some(n) = n else {
            groups.push((Plane::axis(0, 1.0, 0.0), vec![fi]));
            continue;
        };
        let d = n.dot(&a.coords);
        match groups.iter_mut().find(|(pl, _)| {
            (pl.normal() - n).norm() < 1e-9 && [a, b, c].iter().all(|p| pl.signed_distance(p).abs() < tol)
        }) {
            Some((_, members)) => members.push(fi),
            None => groups.push((Plane::new(n, d).expect("unit normal"), vec![fi])),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        if members.len() == 1 {
            out.push(part.faces[members[0]].to_vec());
            continue;
        }
        let mut edges: HashMap<(u32, u32), ()> = HashMap::new();
        for &fi in &members {
            let f = part.faces[fi];
            for k in 0..3 {
                edges.insert((f[k], f[(k + 1) % 3]), ());
            }
        }
        let mut next: HashMap<u32, u32> = HashMap::new();
        let mut simple = true;
        for &(a, b) in edges.keys() {
            if !edges.contains_key(&(b, a)) && next.insert(a, b).is_some() {
                simple = false;
            }
        }
        let start = next.keys().min().copied();
        let mut ring = Vec::with_capacity(next.len());
        if let (true, Some(start)) = (simple, start) {
            let mut cur = start;
            loop {
                ring.push(cur);
                match next.get(&cur) {
                    Some(&n) if n == start => break,
                    Some(&n) if ring.len() <= next.len() => cur = n,
                    _ => {
                        simple = false;
                        break;
                    }
                }
            }
        }
        if simple && ring.len() == next.len() && ring.len() >= 3 {
            out.push(ring);
        } else {
            out.extend(members.iter().map(|&fi| part.faces[fi].to_vec()));
        }
    }
    out
}
