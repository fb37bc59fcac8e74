//! Gilbert–Johnson–Keerthi distance between posed convex parts.

use nalgebra::Isometry3;

use super::ConvexPart;
use crate::error::{Error, Result};
use crate::geom::Vector;

pub const GJK_MAX_ITERATIONS: usize = 64;
const GJK_TOLERANCE: f64 = 1e-9;

#[inline]
fn support(a: &ConvexPart, pa: &Isometry3<f64>, b: &ConvexPart, pb: &Isometry3<f64>, d: &Vector) -> Vector {
    let sa = pa * a.support(&pa.rotation.inverse_transform_vector(d));
    let sb = pb * b.support(&pb.rotation.inverse_transform_vector(&-d));
    sa - sb
}

/// Euclidean distance between the posed parts, 0 when they intersect.
pub fn gjk_distance(a: &ConvexPart, pose_a: &Isometry3<f64>, b: &ConvexPart, pose_b: &Isometry3<f64>) -> Result<f64> {
    run(a, pose_a, b, pose_b, false).map(|(d, _)| d)
}

/// Boolean query; returns as soon as a separating direction is found.
pub fn gjk_intersects(a: &ConvexPart, pose_a: &Isometry3<f64>, b: &ConvexPart, pose_b: &Isometry3<f64>) -> Result<bool> {
    run(a, pose_a, b, pose_b, true).map(|(_, hit)| hit)
}

fn run(a: &ConvexPart, pa: &Isometry3<f64>, b: &ConvexPart, pb: &Isometry3<f64>, early_out: bool) -> Result<(f64, bool)> {
    let scale = a.diagonal().max(b.diagonal()).max(1e-12);
    let zero_tol = GJK_TOLERANCE * scale;
    let mut d = (pa * a.aabb().center()) - (pb * b.aabb().center());
    if d.norm_squared() < 1e-24 {
        d = Vector::x();
    }
    let mut simplex: Vec<Vector> = vec![support(a, pa, b, pb, &-d)];
    let mut v = simplex[0];
    for _ in 0..GJK_MAX_ITERATIONS {
        let vv = v.norm_squared();
        if vv.sqrt() <= zero_tol {
            return Ok((0.0, true));
        }
        let w = support(a, pa, b, pb, &-v);
        if early_out && v.dot(&w) > 0.0 {
            return Ok((f64::NAN, false));
        }
        // `v·w / |v|` is a lower bound on the distance, `|v|` an upper bound.
        if vv - v.dot(&w) <= GJK_TOLERANCE * vv.sqrt() || simplex.iter().any(|s| (s - w).norm_squared() < 1e-30) {
            return Ok((vv.sqrt(), false));
        }
        simplex.push(w);
        match closest_on_simplex(&simplex) {
            None => return Ok((0.0, true)),
            Some((p, kept)) => {
                simplex = kept;
                if p.norm_squared() >= vv {
                    // No progress: numerical floor reached.
                    return Ok((vv.sqrt(), false));
                }
                v = p;
            }
        }
    }
    Err(Error::NoConvergence)
}

/// Closest point of the simplex to the origin and the vertices supporting
/// it; `None` if the origin is inside a tetrahedron.
fn closest_on_simplex(s: &[Vector]) -> Option<(Vector, Vec<Vector>)> {
    match s.len() {
        1 => Some((s[0], s.to_vec())),
        2 => Some(closest_segment(s[0], s[1])),
        3 => Some(closest_triangle(s[0], s[1], s[2])),
        _ => closest_tetra(s[0], s[1], s[2], s[3]),
    }
}

fn closest_segment(a: Vector, b: Vector) -> (Vector, Vec<Vector>) {
    let ab = b - a;
    let t = -a.dot(&ab);
    if t <= 0.0 {
        return (a, vec![a]);
    }
    let denom = ab.norm_squared();
    if t >= denom {
        return (b, vec![b]);
    }
    (a + ab * (t / denom), vec![a, b])
}

/// Ericson's Voronoi-region walk for the triangle closest point.
fn closest_triangle(a: Vector, b: Vector, c: Vector) -> (Vector, Vec<Vector>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, vec![b, c]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_tetra(a: Vector, b: Vector, c: Vector, d: Vector) -> Option<(Vector, Vec<Vector>)> {
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let mut best: Option<(f64, (Vector, Vec<Vector>))> = None;
    let mut outside_any = false;
    for (p, q, r, opp) in faces {
        let n = (q - p).cross(&(r - p));
        let s_origin = -n.dot(&p);
        let s_opp = n.dot(&(opp - p));
        // Origin strictly on the other side of this face than the fourth vertex.
        if s_origin * s_opp < 0.0 {
            outside_any = true;
            let cand = closest_triangle(p, q, r);
            let dd = cand.0.norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| dd < *bd) {
                best = Some((dd, cand));
            }
        }
    }
    if !outside_any {
        return None;
    }
    best.map(|(_, c)| c)
}
