//! Ear-clipping triangulation of planar polygons with holes.
//!
//! Holes are bridged into the outer ring (Eberly's visibility method) and
//! the resulting weakly simple polygon is ear-clipped. Orientation tests go
//! through `robust::orient2d`.

use robust::{orient2d, Coord};

use crate::error::{Error, Result};

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(
        Coord { x: a[0], y: a[1] },
        Coord { x: b[0], y: b[1] },
        Coord { x: c[0], y: c[1] },
    )
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Triangulates `rings[0]` minus the holes `rings[1..]`.
///
/// Returned indices refer to the rings flattened in order. Output triangles
/// are counter-clockwise. Ring orientation on input does not matter.
pub fn triangulate(rings: &[Vec<[f64; 2]>]) -> Result<Vec<[usize; 3]>> {
    let Some(outer) = rings.first() else {
        return Ok(Vec::new());
    };
    let mut pos: Vec<[f64; 2]> = Vec::new();
    let mut starts = Vec::with_capacity(rings.len());
    for r in rings {
        starts.push(pos.len());
        pos.extend_from_slice(r);
    }
    if outer.len() < 3 {
        return Err(Error::CapFailure("outer ring has fewer than 3 vertices".into()));
    }
    let ring_ids = |k: usize, ccw: bool| -> Vec<usize> {
        let ids: Vec<usize> = (starts[k]..starts[k] + rings[k].len()).collect();
        let is_ccw = signed_area(&rings[k]) > 0.0;
        if is_ccw == ccw {
            ids
        } else {
            ids.into_iter().rev().collect()
        }
    };
    let mut poly = ring_ids(0, true);

    // Bridge holes, rightmost first.
    let mut holes: Vec<Vec<usize>> = (1..rings.len())
        .filter(|&k| rings[k].len() >= 3)
        .map(|k| ring_ids(k, false))
        .collect();
    let max_x = |h: &Vec<usize>| h.iter().map(|&i| pos[i][0]).fold(f64::NEG_INFINITY, f64::max);
    holes.sort_by(|a, b| max_x(b).total_cmp(&max_x(a)));
    for hole in holes {
        bridge_hole(&mut poly, &hole, &pos)?;
    }
    clip_ears(poly, &pos)
}

fn bridge_hole(poly: &mut Vec<usize>, hole: &[usize], pos: &[[f64; 2]]) -> Result<()> {
    // Rightmost hole vertex (ties: lowest y).
    let (hm, &m) = hole
        .iter()
        .enumerate()
        .max_by(|(_, &a), (_, &b)| {
            pos[a][0]
                .total_cmp(&pos[b][0])
                .then(pos[b][1].total_cmp(&pos[a][1]))
        })
        .unwrap();
    let mp = pos[m];
    let n = poly.len();

    // Nearest edge hit by the ray from M towards +x.
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let (a, b) = (pos[poly[i]], pos[poly[(i + 1) % n]]);
        if !(a[1] <= mp[1] && mp[1] <= b[1]) || a[1] == b[1] {
            continue;
        }
        let x = a[0] + (mp[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
        if x >= mp[0] && best.is_none_or(|(bx, _)| x < bx) {
            best = Some((x, i));
        }
    }
    let (hit_x, edge) = best.ok_or_else(|| Error::CapFailure("hole is not inside the outer ring".into()))?;
    let (ia, ib) = (edge, (edge + 1) % n);
    let mut target = if pos[poly[ia]][0] >= pos[poly[ib]][0] { ia } else { ib };
    let hit = [hit_x, mp[1]];
    if pos[poly[target]] != hit {
        // Vertices inside triangle (M, hit, target) may block visibility; take
        // the one with the smallest angle to the ray.
        let tp = pos[poly[target]];
        let (t0, t1, t2) = if orient(mp, hit, tp) > 0.0 { (mp, hit, tp) } else { (mp, tp, hit) };
        let mut best_key = (f64::INFINITY, f64::INFINITY);
        for i in 0..n {
            let q = pos[poly[i]];
            if i == target || q == mp {
                continue;
            }
            if orient(t0, t1, q) >= 0.0 && orient(t1, t2, q) >= 0.0 && orient(t2, t0, q) >= 0.0 {
                let d = [q[0] - mp[0], q[1] - mp[1]];
                let key = ((d[1].atan2(d[0])).abs(), d[0] * d[0] + d[1] * d[1]);
                if key < best_key {
                    best_key = key;
                    target = i;
                }
            }
        }
    }
    // Among coincident copies of the target (earlier bridges), pick the one
    // whose interior wedge contains M.
    let tp = pos[poly[target]];
    for i in 0..n {
        if pos[poly[i]] == tp && in_wedge(poly, pos, i, mp) {
            target = i;
            break;
        }
    }
    let mut splice = Vec::with_capacity(hole.len() + 2);
    splice.extend(hole[hm..].iter().chain(&hole[..hm]).copied());
    splice.push(m);
    splice.push(poly[target]);
    poly.splice(target + 1..target + 1, splice);
    Ok(())
}

/// Whether `p` lies in the interior angle of the polygon at slot `i`.
fn in_wedge(poly: &[usize], pos: &[[f64; 2]], i: usize, p: [f64; 2]) -> bool {
    let n = poly.len();
    let a = pos[poly[(i + n - 1) % n]];
    let b = pos[poly[i]];
    let c = pos[poly[(i + 1) % n]];
    if orient(a, b, c) >= 0.0 {
        orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0
    } else {
        orient(a, b, p) >= 0.0 || orient(b, c, p) >= 0.0
    }
}

fn clip_ears(mut poly: Vec<usize>, pos: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let mut tris = Vec::with_capacity(poly.len().saturating_sub(2));
    let mut i = 0;
    let mut stall = 0;
    while poly.len() > 3 {
        let n = poly.len();
        let (ia, ib, ic) = ((i + n - 1) % n, i % n, (i + 1) % n);
        if is_ear(&poly, pos, ia, ib, ic, true) {
            tris.push([poly[ia], poly[ib], poly[ic]]);
            poly.remove(ib);
            stall = 0;
            i = ib.saturating_sub(1);
            continue;
        }
        i = (i + 1) % n;
        stall += 1;
        if stall > n {
            // No clean ear: relax to ignore points touching the triangle boundary.
            let relaxed = (0..n).find(|&k| {
                let (a, c) = ((k + n - 1) % n, (k + 1) % n);
                is_ear(&poly, pos, a, k, c, false)
            });
            let k = relaxed
                .or_else(|| (0..n).find(|&k| {
                    let (a, c) = ((k + n - 1) % n, (k + 1) % n);
                    orient(pos[poly[a]], pos[poly[k]], pos[poly[c]]) >= 0.0
                }))
                .ok_or_else(|| Error::CapFailure("polygon has no clippable ear".into()))?;
            let (a, c) = ((k + n - 1) % n, (k + 1) % n);
            tris.push([poly[a], poly[k], poly[c]]);
            poly.remove(k);
            stall = 0;
            i = 0;
        }
    }
    if poly.len() == 3 {
        tris.push([poly[0], poly[1], poly[2]]);
    }
    Ok(tris)
}

fn is_ear(poly: &[usize], pos: &[[f64; 2]], ia: usize, ib: usize, ic: usize, strict: bool) -> bool {
    let (a, b, c) = (pos[poly[ia]], pos[poly[ib]], pos[poly[ic]]);
    if orient(a, b, c) <= 0.0 {
        return false;
    }
    for (k, &v) in poly.iter().enumerate() {
        if k == ia || k == ib || k == ic {
            continue;
        }
        let q = pos[v];
        if q == a || q == b || q == c {
            continue;
        }
        let (o1, o2, o3) = (orient(a, b, q), orient(b, c, q), orient(c, a, q));
        let inside = if strict {
            o1 >= 0.0 && o2 >= 0.0 && o3 >= 0.0
        } else {
            o1 > 0.0 && o2 > 0.0 && o3 > 0.0
        };
        if inside {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area_of(tris: &[[usize; 3]], pts: &[[f64; 2]]) -> f64 {
        tris.iter()
            .map(|t| signed_area(&[pts[t[0]], pts[t[1]], pts[t[2]]]))
            .sum()
    }

    fn flat(rings: &[Vec<[f64; 2]>]) -> Vec<[f64; 2]> {
        rings.iter().flatten().copied().collect()
    }

    #[test]
    fn square() {
        let rings = vec![vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]];
        let t = triangulate(&rings).unwrap();
        assert_eq!(t.len(), 2);
        assert!((area_of(&t, &flat(&rings)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_l_shape() {
        let mut l = vec![
            [0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0],
        ];
        l.reverse();
        let rings = vec![l];
        let t = triangulate(&rings).unwrap();
        assert_eq!(t.len(), 4);
        assert!((area_of(&t, &flat(&rings)) - 3.0).abs() < 1e-12);
        for tri in &t {
            let p = flat(&rings);
            assert!(signed_area(&[p[tri[0]], p[tri[1]], p[tri[2]]]) > 0.0);
        }
    }

    #[test]
    fn square_with_two_holes() {
        let rings = vec![
            vec![[0.0, 0.0], [4.0, 0.0], [4.0, 2.0], [0.0, 2.0]],
            vec![[0.5, 0.5], [1.5, 0.5], [1.5, 1.5], [0.5, 1.5]],
            vec![[2.5, 0.5], [3.5, 0.5], [3.5, 1.5], [2.5, 1.5]],
        ];
        let t = triangulate(&rings).unwrap();
        assert!((area_of(&t, &flat(&rings)) - 6.0).abs() < 1e-12);
        // Every ring edge must appear in exactly one triangle.
        let mut edges = std::collections::HashMap::new();
        for tri in &t {
            for k in 0..3 {
                *edges.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut start = 0;
        for r in &rings {
            let n = r.len();
            for i in 0..n {
                let (a, b) = (start + i, start + (i + 1) % n);
                let c = edges.get(&(a, b)).copied().unwrap_or(0) + edges.get(&(b, a)).copied().unwrap_or(0);
                assert_eq!(c, 1, "edge {a}-{b}");
            }
            start += n;
        }
    }

    #[test]
    fn collinear_points_are_kept() {
        let rings = vec![vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]];
        let t = triangulate(&rings).unwrap();
        assert_eq!(t.len(), 3);
        assert!((area_of(&t, &flat(&rings)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_with_circular_hole() {
        let ring = |r: f64, n: usize| -> Vec<[f64; 2]> {
            (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    [r * a.cos(), r * a.sin()]
                })
                .collect()
        };
        let rings = vec![ring(1.0, 64), ring(0.5, 48)];
        let t = triangulate(&rings).unwrap();
        let expect = signed_area(&rings[0]) - signed_area(&rings[1]);
        assert!((area_of(&t, &flat(&rings)) - expect).abs() < 1e-9);
        assert_eq!(t.len(), 64 + 48);
    }
}
