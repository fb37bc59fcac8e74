//! Quickhull in three dimensions.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, Vector};
use crate::mesh::weld_points;

struct Face {
    v: [usize; 3],
    normal: Vector,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(pts: &[Point], v: [usize; 3]) -> Face {
        let (a, b, c) = (pts[v[0]], pts[v[1]], pts[v[2]]);
        // Cross product of the two edges at the vertex facing the longest edge.
        let e = [(b - a).norm_squared(), (c - b).norm_squared(), (a - c).norm_squared()];
        let n = match (0..3).max_by(|&i, &j| e[i].total_cmp(&e[j])).unwrap() {
            0 => (a - c).cross(&(b - c)),
            1 => (b - a).cross(&(c - a)),
            _ => (c - b).cross(&(a - b)),
        };
        let normal = n.try_normalize(0.0).unwrap_or_else(Vector::zeros);
        let offset = normal.dot(&((a.coords + b.coords + c.coords) / 3.0));
        Face { v, normal, offset, outside: Vec::new(), alive: true }
    }

    #[inline]
    fn dist(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Hull as (vertices, outward counter-clockwise triangles).
pub(crate) fn quickhull(input: &[Point]) -> Result<(Vec<Point>, Vec<[u32; 3]>)> {
    let (pts, _) = weld_points(input, 0.0);
    let bbox = Aabb::from_points(pts.iter()).ok_or_else(|| Error::DegenerateInput("no points".into()))?;
    if pts.len() < 4 {
        return Err(Error::DegenerateInput(format!("{} distinct points", pts.len())));
    }
    let scale = bbox.diagonal().max(bbox.min.coords.abs().max()).max(bbox.max.coords.abs().max());
    let eps = 1e-10 * scale;

    let simplex = initial_simplex(&pts, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    let [i0, i1, i2, i3] = simplex;
    let mut tetra = [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]];
    if Face::new(&pts, tetra[0]).dist(&pts[i3]) > 0.0 {
        for t in &mut tetra {
            t.swap(1, 2);
        }
    }
    for v in tetra {
        faces.push(Face::new(&pts, v));
    }
    let mut edge_face: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_face.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    for p in 0..pts.len() {
        if simplex.contains(&p) {
            continue;
        }
        assign(&mut faces, &[0, 1, 2, 3], p, &pts, eps);
    }

    let mut queue: VecDeque<usize> = (0..4).collect();
    while let Some(fi) = queue.pop_front() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let eye = *faces[fi]
            .outside
            .iter()
            .max_by(|&&a, &&b| faces[fi].dist(&pts[a]).total_cmp(&faces[fi].dist(&pts[b])))
            .unwrap();
        let ep = pts[eye];

        // Visible set by flood fill from fi.
        let mut visible = vec![fi];
        let mut seen: HashMap<usize, bool> = HashMap::from([(fi, true)]);
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            let v = faces[f].v;
            for e in 0..3 {
                let nb = edge_face[&(v[(e + 1) % 3], v[e])];
                if seen.contains_key(&nb) {
                    continue;
                }
                let vis = faces[nb].dist(&ep) > eps;
                seen.insert(nb, vis);
                if vis {
                    visible.push(nb);
                }
            }
        }
        // Horizon: edges of visible faces whose neighbour is not visible.
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                if !seen[&edge_face[&(b, a)]] {
                    horizon.push((a, b));
                }
            }
        }
        // A pinched visible region would produce a non-manifold fan.
        let mut starts: HashMap<usize, usize> = HashMap::new();
        for &(a, _) in &horizon {
            *starts.entry(a).or_default() += 1;
        }
        if starts.values().any(|&c| c > 1) {
            faces[fi].outside.retain(|&q| q != eye);
            queue.push_back(fi);
            continue;
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.append(&mut faces[f].outside);
            let v = faces[f].v;
            for e in 0..3 {
                edge_face.remove(&(v[e], v[(e + 1) % 3]));
            }
        }
        let mut created = Vec::with_capacity(horizon.len());
        for &(a, b) in &horizon {
            let nf = faces.len();
            faces.push(Face::new(&pts, [a, b, eye]));
            for (x, y) in [(a, b), (b, eye), (eye, a)] {
                edge_face.insert((x, y), nf);
            }
            created.push(nf);
        }
        for q in orphans {
            if q != eye {
                assign(&mut faces, &created, q, &pts, eps);
            }
        }
        queue.extend(created);
    }

    let mut remap = vec![u32::MAX; pts.len()];
    let mut vertices = Vec::new();
    let mut out = Vec::new();
    for f in faces.iter().filter(|f| f.alive) {
        out.push(f.v.map(|i| {
            if remap[i] == u32::MAX {
                remap[i] = vertices.len() as u32;
                vertices.push(pts[i]);
            }
            remap[i]
        }));
    }
    Ok((vertices, out))
}

fn assign(faces: &mut [Face], candidates: &[usize], p: usize, pts: &[Point], eps: f64) {
    for &f in candidates {
        if faces[f].dist(&pts[p]) > eps {
            faces[f].outside.push(p);
            return;
        }
    }
}

fn initial_simplex(pts: &[Point], eps: f64) -> Result<[usize; 4]> {
    // Extreme points per axis; take the farthest pair among them.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let cmp = |&a: &usize, &b: &usize| pts[a][axis].total_cmp(&pts[b][axis]);
        extremes.push((0..pts.len()).min_by(cmp).unwrap());
        extremes.push((0..pts.len()).max_by(cmp).unwrap());
    }
    let mut best = (0.0, 0, 0);
    for &a in &extremes {
        for &b in &extremes {
            let d = (pts[a] - pts[b]).norm_squared();
            if d > best.0 {
                best = (d, a, b);
            }
        }
    }
    let (_, a, b) = best;
    if best.0.sqrt() <= eps {
        return Err(Error::DegenerateInput("points are coincident".into()));
    }
    let ab = (pts[b] - pts[a]).normalize();
    let line_dist = |p: &Point| {
        let d = p - pts[a];
        (d - ab * d.dot(&ab)).norm()
    };
    let c = (0..pts.len())
        .max_by(|&i, &j| line_dist(&pts[i]).total_cmp(&line_dist(&pts[j])))
        .unwrap();
    if line_dist(&pts[c]) <= eps {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a])).normalize();
    let plane_dist = |p: &Point| n.dot(&(p - pts[a])).abs();
    let d = (0..pts.len())
        .max_by(|&i, &j| plane_dist(&pts[i]).total_cmp(&plane_dist(&pts[j])))
        .unwrap();
    if plane_dist(&pts[d]) <= eps {
        return Err(Error::DegenerateInput("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}
