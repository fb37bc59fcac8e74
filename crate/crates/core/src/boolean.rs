//! Booleans between watertight meshes and axis-aligned boxes, plus the
//! convexity-preserving subtraction of a box from a set of convex parts.
//!
//! Mesh booleans are built from one primitive: refine every triangle along
//! a plane, keep one side and close the cut with a triangulated cap. Newly
//! created vertices depend only on the endpoints of the edge they split, so
//! two refinements that share an edge produce bit-identical points; the box
//! difference relies on that to stitch its pieces together exactly.

use std::collections::HashMap;

use crate::convex::{merge_pair, split_by_plane, ConvexPart};
use crate::error::{Error, Result};
use crate::geom::{point_in_polygon_2d, polygon_area_2d, triangle_normal_raw, triangle_unit_normal, Aabb, Plane, Point, Vector};
use crate::mesh::{weld_points, TriangleMesh};
use crate::triangulate::triangulate;

/// Distance below which a vertex counts as lying on a clip plane.
pub const ON_PLANE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    In,
    On,
    Out,
}

/// Triangle soup with shared vertices and a per-face "cap" flag.
#[derive(Debug, Clone, Default)]
struct Soup {
    verts: Vec<Point>,
    faces: Vec<[u32; 3]>,
    cap: Vec<bool>,
}

impl Soup {
    fn from_mesh(mesh: &TriangleMesh) -> Soup {
        Soup {
            verts: mesh.vertices().to_vec(),
            faces: mesh.faces().to_vec(),
            cap: vec![false; mesh.faces().len()],
        }
    }

    fn into_mesh(self) -> TriangleMesh {
        TriangleMesh::from_parts_unchecked(self.verts, self.faces).compacted()
    }
}

/// Side of a refined face relative to the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaceSide {
    In,
    Out,
    Coplanar,
}

/// Splits every face crossing `plane` so that each output face lies on one
/// side. Vertices within [`ON_PLANE_TOLERANCE`] are snapped onto the plane.
fn refine(s: &Soup, plane: &Plane) -> (Soup, Vec<FaceSide>) {
    let dist: Vec<f64> = s.verts.iter().map(|v| plane.signed_distance(v)).collect();
    let side: Vec<Side> = dist
        .iter()
        .map(|&d| {
            if d.abs() < ON_PLANE_TOLERANCE {
                Side::On
            } else if d < 0.0 {
                Side::In
            } else {
                Side::Out
            }
        })
        .collect();
    let mut verts: Vec<Point> = s
        .verts
        .iter()
        .zip(&side)
        .map(|(p, &sd)| if sd == Side::On { plane.project(p) } else { *p })
        .collect();
    let mut faces = Vec::with_capacity(s.faces.len() + s.faces.len() / 4);
    let mut cap = Vec::with_capacity(faces.capacity());
    let mut fside = Vec::with_capacity(faces.capacity());
    let mut cuts: HashMap<(u32, u32), u32> = HashMap::new();

    for (fi, f) in s.faces.iter().enumerate() {
        let sides = f.map(|v| side[v as usize]);
        let has_in = sides.contains(&Side::In);
        let has_out = sides.contains(&Side::Out);
        if !(has_in && has_out) {
            faces.push(*f);
            cap.push(s.cap[fi]);
            fside.push(if has_in {
                FaceSide::In
            } else if has_out {
                FaceSide::Out
            } else {
                FaceSide::Coplanar
            });
            continue;
        }
        let mut in_poly = Vec::with_capacity(4);
        let mut out_poly = Vec::with_capacity(4);
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let (sa, sb) = (sides[k], sides[(k + 1) % 3]);
            if sa != Side::Out {
                in_poly.push(a);
            }
            if sa != Side::In {
                out_poly.push(a);
            }
            if (sa == Side::In && sb == Side::Out) || (sa == Side::Out && sb == Side::In) {
                let key = (a.min(b), a.max(b));
                let id = *cuts.entry(key).or_insert_with(|| {
                    let p = plane.intersect_segment(&s.verts[a as usize], &s.verts[b as usize]);
                    verts.push(p);
                    (verts.len() - 1) as u32
                });
                in_poly.push(id);
                out_poly.push(id);
            }
        }
        for (poly, label) in [(in_poly, FaceSide::In), (out_poly, FaceSide::Out)] {
            for k in 1..poly.len().saturating_sub(1) {
                faces.push([poly[0], poly[k], poly[k + 1]]);
                cap.push(s.cap[fi]);
                fside.push(label);
            }
        }
    }
    (Soup { verts, faces, cap }, fside)
}

/// Keeps one side of `plane`, capping the cross-section.
fn clip_soup(s: &Soup, plane: &Plane, keep: Keep) -> Result<Option<Soup>> {
    // Outward normal of the kept region's cap.
    let cap_plane = match keep {
        Keep::Inside => *plane,
        Keep::Outside => plane.flipped(),
    };
    let (r, fside) = refine(s, plane);
    let wanted = match keep {
        Keep::Inside => FaceSide::In,
        Keep::Outside => FaceSide::Out,
    };
    let mut out = Soup { verts: r.verts, ..Default::default() };
    for (fi, f) in r.faces.iter().enumerate() {
        let keep_face = match fside[fi] {
            s if s == wanted => true,
            FaceSide::Coplanar => {
                let [a, b, c] = f.map(|v| out.verts[v as usize]);
                // Faces on the plane survive when their material is on the kept side.
                triangle_normal_raw(&a, &b, &c).dot(cap_plane.normal()) > 0.0
            }
            _ => false,
        };
        if keep_face {
            out.faces.push(*f);
            out.cap.push(r.cap[fi]);
        }
    }
    if out.faces.is_empty() {
        return Ok(None);
    }
    add_cap(&mut out, &cap_plane)?;
    Ok(Some(out))
}

/// Closes the open boundary of `s`, which must lie in `cap_plane`; cap
/// faces get the plane's normal.
fn add_cap(s: &mut Soup, cap_plane: &Plane) -> Result<()> {
    let mut count: HashMap<(u32, u32), u32> = HashMap::new();
    for f in &s.faces {
        for k in 0..3 {
            *count.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
        }
    }
    if count.values().any(|&c| c > 1) {
        return Err(Error::CapFailure("non-manifold edge before capping".into()));
    }
    // Cap edges run opposite to the unpaired surface edges.
    let mut cap_edges: Vec<(u32, u32)> = count
        .keys()
        .filter(|&&(a, b)| !count.contains_key(&(b, a)))
        .map(|&(a, b)| (b, a))
        .collect();
    if cap_edges.is_empty() {
        return Ok(());
    }
    cap_edges.sort_unstable();
    let (u, v) = cap_plane.basis();
    let to2 = |p: &Point| [u.dot(&p.coords), v.dot(&p.coords)];
    let tol = 1e-7 * (1.0 + cap_plane.offset().abs());
    for &(a, b) in &cap_edges {
        for x in [a, b] {
            if cap_plane.signed_distance(&s.verts[x as usize]).abs() > tol {
                return Err(Error::CapFailure("open boundary off the cutting plane".into()));
            }
        }
    }

    let loops = chain_loops(&cap_edges, |i| to2(&s.verts[i as usize]))?;
    for t in triangulate_loops(&s.verts, &loops, cap_plane)? {
        s.faces.push(t);
        s.cap.push(true);
    }
    Ok(())
}

/// Triangulates closed vertex loops lying in `plane`: loops counter-clockwise
/// about the plane normal are outer boundaries, clockwise ones are holes.
fn triangulate_loops(verts: &[Point], loops: &[Vec<u32>], plane: &Plane) -> Result<Vec<[u32; 3]>> {
    let (u, v) = plane.basis();
    let to2 = |p: &Point| [u.dot(&p.coords), v.dot(&p.coords)];
    let rings: Vec<Vec<[f64; 2]>> = loops
        .iter()
        .map(|l| l.iter().map(|&i| to2(&verts[i as usize])).collect())
        .collect();
    let area: Vec<f64> = rings.iter().map(|r| polygon_area_2d(r)).collect();
    let outers: Vec<usize> = (0..loops.len()).filter(|&i| area[i] > 0.0).collect();
    let mut holes_of: HashMap<usize, Vec<usize>> = HashMap::new();
    for h in (0..loops.len()).filter(|&i| area[i] < 0.0) {
        let host = outers
            .iter()
            .copied()
            .filter(|&o| ring_inside(&rings[h], &rings[o]))
            .min_by(|&a, &b| area[a].total_cmp(&area[b]))
            .ok_or_else(|| Error::CapFailure("hole loop without enclosing loop".into()))?;
        holes_of.entry(host).or_default().push(h);
    }
    if (0..loops.len()).any(|i| area[i] == 0.0) {
        return Err(Error::CapFailure("zero-area section loop".into()));
    }
    let mut out = Vec::new();
    for &o in &outers {
        let mut ids: Vec<u32> = loops[o].clone();
        let mut polys = vec![rings[o].clone()];
        for &h in holes_of.get(&o).map(Vec::as_slice).unwrap_or(&[]) {
            ids.extend_from_slice(&loops[h]);
            polys.push(rings[h].clone());
        }
        for t in triangulate(&polys)? {
            out.push(t.map(|k| ids[k]));
        }
    }
    Ok(out)
}

/// Whether ring `inner` (which does not cross `outer`) lies inside `outer`.
fn ring_inside(inner: &[[f64; 2]], outer: &[[f64; 2]]) -> bool {
    // Edge midpoints avoid vertices shared by touching loops.
    let n = inner.len();
    let mut votes = 0i32;
    for k in 0..n {
        let (a, b) = (inner[k], inner[(k + 1) % n]);
        let m = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        votes += if point_in_polygon_2d(m, outer) { 1 } else { -1 };
    }
    votes > 0
}

/// Chains directed edges into closed loops. At a vertex with several
/// outgoing edges the walk takes the leftmost turn, which separates loops
/// that touch at a point.
fn chain_loops(edges: &[(u32, u32)], pos: impl Fn(u32) -> [f64; 2]) -> Result<Vec<Vec<u32>>> {
    let mut out_edges: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(a, b) in edges {
        out_edges.entry(a).or_default().push(b);
    }
    let mut used: HashMap<(u32, u32), bool> = edges.iter().map(|&e| (e, false)).collect();
    let mut loops = Vec::new();
    for &(a0, b0) in edges {
        if used[&(a0, b0)] {
            continue;
        }
        let mut ring = vec![a0];
        used.insert((a0, b0), true);
        let (mut prev, mut cur) = (a0, b0);
        let mut guard = 0;
        while cur != a0 {
            guard += 1;
            if guard > edges.len() {
                return Err(Error::CapFailure("section loop does not close".into()));
            }
            ring.push(cur);
            let cands: Vec<u32> = out_edges
                .get(&cur)
                .map(|v| v.iter().copied().filter(|&n| !used[&(cur, n)]).collect())
                .unwrap_or_default();
            let next = match cands.len() {
                0 => return Err(Error::CapFailure("section loop does not close".into())),
                1 => cands[0],
                _ => {
                    let (p, c) = (pos(prev), pos(cur));
                    let din = [c[0] - p[0], c[1] - p[1]];
                    *cands
                        .iter()
                        .max_by(|&&x, &&y| {
                            let turn = |n: u32| {
                                let q = pos(n);
                                let d = [q[0] - c[0], q[1] - c[1]];
                                (din[0] * d[1] - din[1] * d[0]).atan2(din[0] * d[0] + din[1] * d[1])
                            };
                            turn(x).total_cmp(&turn(y))
                        })
                        .unwrap()
                }
            };
            used.insert((cur, next), true);
            prev = cur;
            cur = next;
        }
        loops.push(ring);
    }
    Ok(loops)
}

fn check_watertight(s: Soup, what: &str) -> Result<TriangleMesh> {
    let mesh = s.into_mesh();
    let report = mesh.validate();
    if !report.watertight {
        return Err(Error::CapFailure(format!(
            "{what} is not watertight ({} boundary, {} non-manifold, {} inconsistent edges)",
            report.boundary_edges, report.non_manifold_edges, report.inconsistent_edges
        )));
    }
    Ok(mesh)
}

/// Keeps the part of a watertight mesh on one side of `plane`, capping the
/// cross-section. `None` when nothing is kept.
pub fn clip_mesh_by_plane(mesh: &TriangleMesh, plane: &Plane, keep: Keep) -> Result<Option<TriangleMesh>> {
    let sign = if keep == Keep::Inside { 1.0 } else { -1.0 };
    let d: Vec<f64> = mesh.vertices().iter().map(|v| sign * plane.signed_distance(v)).collect();
    if d.iter().all(|&x| x <= -ON_PLANE_TOLERANCE) {
        return Ok(Some(mesh.clone()));
    }
    if d.iter().all(|&x| x >= ON_PLANE_TOLERANCE) {
        return Ok(None);
    }
    match clip_soup(&Soup::from_mesh(mesh), plane, keep)? {
        None => Ok(None),
        Some(s) => check_watertight(s, "clipped mesh").map(Some),
    }
}

fn intersect_box_soup(mesh: &TriangleMesh, aabb: &Aabb) -> Result<Option<Soup>> {
    let mut s = Soup::from_mesh(mesh);
    for plane in aabb.planes() {
        let all_in = s.verts.iter().all(|v| plane.signed_distance(v) <= -ON_PLANE_TOLERANCE);
        if all_in {
            continue;
        }
        match clip_soup(&s, &plane, Keep::Inside)? {
            Some(next) => {
                // Drop vertices of discarded faces before the next plane.
                let cap = next.cap;
                let m = TriangleMesh::from_parts_unchecked(next.verts, next.faces);
                let (verts, faces) = compact_with(&m);
                s = Soup { verts, faces, cap };
            }
            None => return Ok(None),
        }
    }
    Ok(Some(s))
}

fn compact_with(m: &TriangleMesh) -> (Vec<Point>, Vec<[u32; 3]>) {
    m.compacted().into_parts()
}

/// `mesh ∩ box`, watertight, or `None` when they do not overlap.
pub fn boolean_intersect_box(mesh: &TriangleMesh, aabb: &Aabb) -> Result<Option<TriangleMesh>> {
    match intersect_box_soup(mesh, aabb)? {
        None => Ok(None),
        Some(s) => check_watertight(s, "box intersection").map(Some),
    }
}

/// `mesh` minus the interiors of `boxes`, watertight, or `None` when
/// nothing is left. Boxes are subtracted one after another.
pub fn boolean_difference_boxes(mesh: &TriangleMesh, boxes: &[Aabb]) -> Result<Option<TriangleMesh>> {
    let mut cur = mesh.clone();
    for b in boxes {
        if b.volume() <= 0.0 {
            continue;
        }
        match difference_box(&cur, b)? {
            Some(m) => cur = m,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

fn difference_box(mesh: &TriangleMesh, aabb: &Aabb) -> Result<Option<TriangleMesh>> {
    let Some(mb) = mesh.aabb() else {
        return Ok(None);
    };
    if !mb.interiors_overlap(aabb, 0.0) {
        return Ok(Some(mesh.clone()));
    }
    let Some(inter) = intersect_box_soup(mesh, aabb)? else {
        return Ok(Some(mesh.clone()));
    };
    // Refine the whole surface by the same planes in the same order.
    let mut s = Soup::from_mesh(mesh);
    for plane in aabb.planes() {
        s = refine(&s, &plane).0;
    }
    let planes = aabb.planes();
    let on_face = |f: &[Point; 3]| -> Option<usize> {
        (0..6).find(|&k| {
            let (axis, c) = planes[k].as_axis().unwrap();
            f.iter().all(|p| p[axis] == c)
        })
    };
    let mut tris: Vec<[Point; 3]> = Vec::with_capacity(s.faces.len());
    for f in &s.faces {
        let t = f.map(|v| s.verts[v as usize]);
        let in_closed = t.iter().all(|p| aabb.contains_point(p, 0.0));
        if !in_closed {
            tris.push(t);
            continue;
        }
        if let Some(k) = on_face(&t) {
            // On the box surface: keep if the material lies outside the box.
            if triangle_normal_raw(&t[0], &t[1], &t[2]).dot(planes[k].normal()) < 0.0 {
                tris.push(t);
            }
        }
    }
    for (f, &is_cap) in inter.faces.iter().zip(&inter.cap) {
        if is_cap {
            let [a, b, c] = f.map(|v| inter.verts[v as usize]);
            tris.push([a, c, b]);
        }
    }
    if tris.is_empty() {
        return Ok(None);
    }
    let soup: Vec<Point> = tris.iter().flatten().copied().collect();
    let (verts, remap) = weld_points(&soup, 0.0);
    let faces: Vec<[u32; 3]> = remap.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let n = faces.len();
    let out = Soup { verts, faces, cap: vec![false; n] };
    let mesh = check_watertight(out, "box difference")?;
    if mesh.signed_volume() <= 0.0 {
        return Ok(None);
    }
    Ok(Some(mesh))
}

/// Counters reported by [`bool_difference_convex_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvexDifferenceStats {
    /// Parts that did not overlap the box interior.
    pub untouched: usize,
    /// Successful plane splits.
    pub splits: usize,
    /// Pieces dropped for lying inside the box.
    pub removed: usize,
    /// Zero-error merges of neighbouring pieces afterwards.
    pub merges: usize,
}

/// Removes the interior of `aabb` from a set of convex parts while keeping
/// every output convex.
pub fn bool_difference_convex(parts: &[ConvexPart], aabb: &Aabb) -> Vec<ConvexPart> {
    bool_difference_convex_with_stats(parts, aabb).0
}

pub fn bool_difference_convex_with_stats(parts: &[ConvexPart], aabb: &Aabb) -> (Vec<ConvexPart>, ConvexDifferenceStats) {
    let mut stats = ConvexDifferenceStats::default();
    let mut out = Vec::with_capacity(parts.len());
    for part in parts {
        if !part.aabb().interiors_overlap(aabb, 0.0) || part.clip_to_box(aabb).is_none() {
            stats.untouched += 1;
            out.push(part.clone());
            continue;
        }
        let mut pieces = Vec::new();
        let mut rest = Some(part.clone());
        for plane in aabb.planes() {
            let Some(cur) = rest.take() else { break };
            let (inside, outside) = split_by_plane(&cur, &plane);
            if inside.is_some() && outside.is_some() {
                stats.splits += 1;
            }
            pieces.extend(outside);
            rest = inside;
        }
        if rest.is_some() {
            stats.removed += 1;
        }
        let before = pieces.len();
        let merged = merge_exact(pieces, aabb);
        stats.merges += before - merged.len();
        out.extend(merged);
    }
    (out, stats)
}

/// Merges pieces whose union is already convex (zero volume error), unless
/// the merged hull would reach into the box.
fn merge_exact(mut pieces: Vec<ConvexPart>, aabb: &Aabb) -> Vec<ConvexPart> {
    loop {
        let mut best: Option<(usize, usize, ConvexPart)> = None;
        'search: for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                let (a, b) = (&pieces[i], &pieces[j]);
                let slack = 1e-6 * a.diagonal().max(b.diagonal());
                if !a.aabb().intersects(b.aabb(), slack) {
                    continue;
                }
                let Ok((m, err)) = merge_pair(a, b) else { continue };
                if err.abs() <= 1e-9 * (a.volume() + b.volume()) && !intrudes(&m, aabb) {
                    best = Some((i, j, m));
                    break 'search;
                }
            }
        }
        match best {
            Some((i, j, m)) => {
                pieces.remove(j);
                pieces[i] = m;
            }
            None => return pieces,
        }
    }
}

/// Whether a convex part reaches into the interior of `aabb`.
pub(crate) fn intrudes(part: &ConvexPart, aabb: &Aabb) -> bool {
    part.aabb().interiors_overlap(aabb, 0.0) && part.clip_to_box(aabb).is_some()
}

/// Removes vertices that carry no shape: those inside a planar region of
/// the surface and those on a straight crease between exactly two planar
/// regions. Each touched region is retriangulated from its boundary loops.
/// Repeated plane cuts leave many such vertices behind. Returns the input
/// unchanged if any region fails to triangulate.
pub fn simplify_coplanar(mesh: &TriangleMesh) -> TriangleMesh {
    try_simplify(mesh).unwrap_or_else(|| mesh.clone())
}

fn try_simplify(mesh: &TriangleMesh) -> Option<TriangleMesh> {
    let verts = mesh.vertices();
    let faces = mesh.faces();
    let tol = 1e-9 * mesh.diagonal();
    let normals: Vec<Option<Vector>> = faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| verts[i as usize]);
            triangle_unit_normal(&a, &b, &c)
        })
        .collect();
    let mut edge_face: HashMap<(u32, u32), usize> = HashMap::with_capacity(faces.len() * 3);
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_face.insert((f[k], f[(k + 1) % 3]), fi);
        }
    }

    // Flood planar regions; the region normal is fixed by its seed face.
    // Seeds go largest first: slivers left by earlier cuts have unreliable
    // normals, so they join a region by vertex distance alone.
    const NONE: usize = usize::MAX;
    let mut region = vec![NONE; faces.len()];
    let mut planes: Vec<Option<Plane>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut order: Vec<usize> = (0..faces.len()).collect();
    order.sort_by(|&a, &b| mesh.face_area(b).total_cmp(&mesh.face_area(a)).then(a.cmp(&b)));
    for seed in order {
        if region[seed] != NONE {
            continue;
        }
        let r = planes.len();
        region[seed] = r;
        let Some(n) = normals[seed] else {
            planes.push(None);
            members.push(vec![seed]);
            continue;
        };
        let plane = region_plane(n, &verts[faces[seed][0] as usize]);
        let mut list = vec![seed];
        let mut stack = vec![seed];
        while let Some(fi) = stack.pop() {
            let f = faces[fi];
            for k in 0..3 {
                let Some(&g) = edge_face.get(&(f[(k + 1) % 3], f[k])) else { continue };
                if region[g] != NONE {
                    continue;
                }
                let coplanar = normals[g].is_none_or(|m| m.dot(plane.normal()) > 0.0)
                    && faces[g].iter().all(|&i| plane.signed_distance(&verts[i as usize]).abs() <= tol);
                if coplanar {
                    region[g] = r;
                    list.push(g);
                    stack.push(g);
                }
            }
        }
        planes.push(Some(plane));
        members.push(list);
    }

    // Region count and crease neighbours per vertex.
    let nv = verts.len();
    let mut vregions: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (fi, f) in faces.iter().enumerate() {
        for &i in f {
            let l = &mut vregions[i as usize];
            if !l.contains(&region[fi]) {
                l.push(region[fi]);
            }
        }
    }
    let mut crease: Vec<Vec<u32>> = vec![Vec::new(); nv];
    for (&(a, b), &fi) in &edge_face {
        let other = edge_face.get(&(b, a))?;
        if region[*other] != region[fi] && !crease[a as usize].contains(&b) {
            crease[a as usize].push(b);
        }
    }
    let removable: Vec<bool> = (0..nv)
        .map(|i| match vregions[i].len() {
            1 => planes[vregions[i][0]].is_some(),
            2 if crease[i].len() == 2 && vregions[i].iter().all(|&r| planes[r].is_some()) => {
                let (p, a, b) = (verts[i], verts[crease[i][0] as usize], verts[crease[i][1] as usize]);
                let ab = b - a;
                let len = ab.norm();
                len > 0.0 && (p - a).cross(&ab).norm() / len <= tol && (p - a).dot(&(p - b)) < 0.0
            }
            _ => false,
        })
        .collect();
    if !removable.iter().any(|&r| r) && members.iter().all(|m| m.len() == 1) {
        return Some(mesh.clone());
    }

    let mut out: Vec<[u32; 3]> = Vec::with_capacity(faces.len());
    for (r, list) in members.iter().enumerate() {
        let plane = match &planes[r] {
            Some(p) if list.len() > 1 || list.iter().any(|&fi| faces[fi].iter().any(|&i| removable[i as usize])) => p,
            _ => {
                out.extend(list.iter().map(|&fi| faces[fi]));
                continue;
            }
        };
        let mut boundary: Vec<(u32, u32)> = Vec::new();
        for &fi in list {
            let f = faces[fi];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if region[edge_face[&(b, a)]] != r {
                    boundary.push((a, b));
                }
            }
        }
        boundary.sort_unstable();
        let (u, v) = plane.basis();
        let to2 = |i: u32| {
            let p = verts[i as usize];
            [u.dot(&p.coords), v.dot(&p.coords)]
        };
        let loops: Vec<Vec<u32>> = chain_loops(&boundary, to2)
            .ok()?
            .into_iter()
            .map(|l| l.into_iter().filter(|&i| !removable[i as usize]).collect::<Vec<u32>>())
            .collect();
        if loops.iter().any(|l| l.len() < 3) {
            return None;
        }
        let tris = triangulate_loops(verts, &loops, plane).ok()?;
        out.extend(tris);
    }
    let simplified = TriangleMesh::from_parts_unchecked(verts.to_vec(), out).compacted();
    let report = simplified.validate();
    if !report.watertight || !report.degenerate_faces.is_empty() {
        return None;
    }
    if ((simplified.signed_volume() - mesh.signed_volume()).abs()) > 1e-9 * mesh.signed_volume().abs().max(tol * tol * tol) {
        return None;
    }
    Some(simplified)
}

/// Plane with normal `n` through `p`, snapped to an exact axis plane when
/// `n` is axis-aligned.
fn region_plane(n: Vector, p: &Point) -> Plane {
    for k in 0..3 {
        if n[k].abs() > 1.0 - 1e-15 && n[(k + 1) % 3].abs() < 1e-12 && n[(k + 2) % 3].abs() < 1e-12 {
            return Plane::axis(k, n[k], p[k]);
        }
    }
    Plane::new(n, n.dot(&p.coords)).expect("unit normal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplify_restores_minimal_box() {
        // Two rounds of midpoint subdivision: vertices inside faces and on
        // the straight cube edges.
        let mut m = crate::fixtures::unit_cube();
        for _ in 0..2 {
            let (mut v, f) = m.into_parts();
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut faces = Vec::new();
            for t in f {
                let mut m3 = [0u32; 3];
                for k in 0..3 {
                    let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                    m3[k] = *mid.entry((a, b)).or_insert_with(|| {
                        v.push(Point::from((v[a as usize].coords + v[b as usize].coords) * 0.5));
                        (v.len() - 1) as u32
                    });
                }
                faces.push([t[0], m3[0], m3[2]]);
                faces.push([m3[0], t[1], m3[1]]);
                faces.push([m3[2], m3[1], t[2]]);
                faces.push(m3);
            }
            m = TriangleMesh::new(v, faces).unwrap();
        }
        assert_eq!(m.faces().len(), 12 * 16);
        let s = simplify_coplanar(&m);
        assert!(s.validate().watertight);
        assert_eq!(s.vertices().len(), 8);
        assert_eq!(s.faces().len(), 12);
        assert!((s.volume().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplify_keeps_shape_vertices() {
        for (name, m) in crate::fixtures::all() {
            let s = simplify_coplanar(&m);
            assert!(s.validate().watertight, "{name}");
            assert!((s.volume().unwrap() - m.volume().unwrap()).abs() < 1e-9, "{name}");
            assert!(s.vertices().len() <= m.vertices().len());
        }
    }
    use crate::convex::convex_hull;
    use crate::fixtures;

    fn bx(min: [f64; 3], max: [f64; 3]) -> Aabb {
        Aabb::from_arrays(min, max).unwrap()
    }

    #[test]
    fn clip_cube_half() {
        let cube = fixtures::unit_cube();
        let m = clip_mesh_by_plane(&cube, &Plane::axis(0, 1.0, 0.5), Keep::Inside).unwrap().unwrap();
        assert!(m.validate().watertight);
        assert!((m.volume().unwrap() - 0.5).abs() < 1e-9);
        let o = clip_mesh_by_plane(&cube, &Plane::axis(0, 1.0, 0.5), Keep::Outside).unwrap().unwrap();
        assert!((o.volume().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn clip_missing_plane_keeps_mesh() {
        let cube = fixtures::unit_cube();
        let m = clip_mesh_by_plane(&cube, &Plane::axis(0, 1.0, 3.0), Keep::Inside).unwrap().unwrap();
        assert_eq!(m, cube);
        assert!(clip_mesh_by_plane(&cube, &Plane::axis(0, 1.0, 3.0), Keep::Outside).unwrap().is_none());
    }

    #[test]
    fn clip_ring_through_both_arms() {
        let ring = fixtures::square_ring();
        let plane = Plane::axis(0, 1.0, 1.5);
        let m = clip_mesh_by_plane(&ring, &plane, Keep::Inside).unwrap().unwrap();
        assert!(m.validate().watertight);
        assert!((m.volume().unwrap() - 4.0).abs() < 1e-9);
        // Cross-section has two loops: two separate cap regions.
        let cap_faces: Vec<[Point; 3]> = m
            .triangles()
            .filter(|t| t.iter().all(|p| p.x == 1.5))
            .collect();
        let cap = TriangleMesh::concat(&[soup_mesh(&cap_faces)]);
        assert_eq!(cap.shells().len(), 2);
        // Euler characteristic of the closed result (a single U-shaped solid).
        let e = m.faces().len() * 3 / 2;
        let chi = m.vertices().len() as i64 - e as i64 + m.faces().len() as i64;
        assert_eq!(chi, 2);
    }

    fn soup_mesh(tris: &[[Point; 3]]) -> TriangleMesh {
        let soup: Vec<Point> = tris.iter().flatten().copied().collect();
        let (v, r) = weld_points(&soup, 0.0);
        TriangleMesh::new(v, r.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()).unwrap()
    }

    #[test]
    fn clip_through_coplanar_face() {
        let l = fixtures::l_prism();
        // x <= 1 passes through the notch wall at x = 1.
        let m = clip_mesh_by_plane(&l, &Plane::axis(0, 1.0, 1.0), Keep::Inside).unwrap().unwrap();
        assert!((m.volume().unwrap() - 2.0).abs() < 1e-9);
        let o = clip_mesh_by_plane(&l, &Plane::axis(0, 1.0, 1.0), Keep::Outside).unwrap().unwrap();
        assert!((o.volume().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn intersect_cube_with_box() {
        let cube = fixtures::unit_cube();
        let m = boolean_intersect_box(&cube, &bx([0.5; 3], [1.5; 3])).unwrap().unwrap();
        assert!(m.validate().watertight);
        assert!((m.volume().unwrap() - 0.125).abs() < 1e-9);
        let all = boolean_intersect_box(&cube, &bx([-1.0; 3], [2.0; 3])).unwrap().unwrap();
        assert_eq!(all.vertices().len(), 8);
        assert!(boolean_intersect_box(&cube, &bx([2.0; 3], [3.0; 3])).unwrap().is_none());
    }

    #[test]
    fn difference_half_and_cavity() {
        let cube = fixtures::unit_cube();
        let half = boolean_difference_boxes(&cube, &[bx([0.5, -1.0, -1.0], [2.0, 2.0, 2.0])]).unwrap().unwrap();
        assert!((half.volume().unwrap() - 0.5).abs() < 1e-9);
        let hollow = boolean_difference_boxes(&cube, &[bx([0.25; 3], [0.75; 3])]).unwrap().unwrap();
        assert!(hollow.validate().watertight);
        assert!((hollow.volume().unwrap() - 0.875).abs() < 1e-9);
        assert_eq!(hollow.shells().len(), 2);
        let same = boolean_difference_boxes(&cube, &[]).unwrap().unwrap();
        assert_eq!(same, cube);
    }

    #[test]
    fn difference_with_face_touching_boxes() {
        let l = fixtures::l_prism();
        let boxes = [bx([0.0, 0.0, 0.0], [0.5, 0.5, 1.0]), bx([0.5, 0.0, 0.0], [1.5, 0.5, 0.5])];
        let d = boolean_difference_boxes(&l, &boxes).unwrap().unwrap();
        assert!(d.validate().watertight);
        assert!((d.volume().unwrap() - (3.0 - 0.25 - 0.25)).abs() < 1e-9);
    }

    #[test]
    fn convex_difference_cavity() {
        let part = convex_hull(fixtures::unit_cube().vertices()).unwrap();
        let aabb = bx([0.25; 3], [0.75; 3]);
        let (out, stats) = bool_difference_convex_with_stats(&[part], &aabb);
        let total: f64 = out.iter().map(|p| p.volume()).sum();
        assert!((total - 0.875).abs() < 1e-6);
        assert_eq!(stats.removed, 1);
        for p in &out {
            assert!(p.is_valid());
            assert!(!p.vertices().iter().any(|v| aabb.strictly_contains(v, 1e-9)));
            assert!(!intrudes(p, &aabb));
        }
    }

    #[test]
    fn convex_difference_pass_through_and_removal() {
        let part = convex_hull(fixtures::unit_cube().vertices()).unwrap();
        let far = bx([2.0; 3], [3.0; 3]);
        let out = bool_difference_convex(std::slice::from_ref(&part), &far);
        assert_eq!(out, vec![part.clone()]);
        let around = bx([-1.0; 3], [2.0; 3]);
        assert!(bool_difference_convex(&[part], &around).is_empty());
    }
}
