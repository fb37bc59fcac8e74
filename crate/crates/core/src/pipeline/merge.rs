use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::acd::depth_inside;
use crate::convex::{merge_pair, ConvexPart};
use crate::error::Result;
use crate::geom::Point;
use crate::mesh::{sample_surface, TriangleMesh};
use crate::metrics::TriangleBvh;

/// Numerical allowance on the relative volume error, so exact complements
/// still merge at `τ = 0`.
pub const MERGE_SLACK: f64 = 1e-9;

struct Candidate {
    rel: f64,
    i: usize,
    j: usize,
    merged: ConvexPart,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // Reversed: the heap pops the smallest error, then the lowest indices.
    fn cmp(&self, o: &Self) -> Ordering {
        o.rel.total_cmp(&self.rel).then(o.i.cmp(&self.i)).then(o.j.cmp(&self.j))
    }
}

/// Greedily merges neighbouring parts, cheapest first, while the relative
/// volume error `volume_error / (vol(a) + vol(b))` stays within `tau`.
/// Neighbours are parts whose bounding boxes touch.
pub fn merge_neighbors(parts: Vec<ConvexPart>, tau: f64) -> Vec<ConvexPart> {
    merge_neighbors_with(parts, tau, &|_, _, _| true).0
}

/// [`merge_neighbors`] with an extra veto on each merged candidate; also
/// returns the number of merges.
pub fn merge_neighbors_with(
    parts: Vec<ConvexPart>,
    tau: f64,
    accept: &(dyn Fn(&ConvexPart, &ConvexPart, &ConvexPart) -> bool + Sync),
) -> (Vec<ConvexPart>, usize) {
    if parts.len() < 2 {
        return (parts, 0);
    }
    let diag = parts
        .iter()
        .skip(1)
        .fold(*parts[0].aabb(), |acc, p| acc.union(p.aabb()))
        .diagonal();
    let slack = 1e-6 * diag;
    let mut alive: Vec<Option<ConvexPart>> = parts.into_iter().map(Some).collect();
    let mut heap = BinaryHeap::new();
    let consider = |i: usize, j: usize, alive: &[Option<ConvexPart>], heap: &mut BinaryHeap<Candidate>| {
        let (Some(a), Some(b)) = (&alive[i], &alive[j]) else { return };
        if !a.aabb().intersects(b.aabb(), slack) {
            return;
        }
        let Ok((merged, err)) = merge_pair(a, b) else { return };
        let rel = err / (a.volume() + b.volume());
        if rel <= tau + MERGE_SLACK && accept(a, b, &merged) {
            heap.push(Candidate { rel, i, j, merged });
        }
    };
    for i in 0..alive.len() {
        for j in i + 1..alive.len() {
            consider(i, j, &alive, &mut heap);
        }
    }
    let mut merges = 0;
    while let Some(c) = heap.pop() {
        if alive[c.i].is_none() || alive[c.j].is_none() {
            continue;
        }
        alive[c.i] = None;
        alive[c.j] = None;
        alive.push(Some(c.merged));
        merges += 1;
        let k = alive.len() - 1;
        for i in 0..k {
            consider(i, k, &alive, &mut heap);
        }
    }
    (alive.into_iter().flatten().collect(), merges)
}

/// Veto for merges that would move the surface of a group of parts further
/// than `tolerance` from the solid they approximate.
///
/// A merged hull is rejected when a point of its surface outside both
/// inputs lies outside the solid and more than `tolerance` from its
/// surface, or when a probe on the solid's surface ends up deeper than
/// `tolerance` inside the hull while neither input already held it that
/// deep. Measuring against the solid rather than the merged pair keeps
/// chains of small merges from adding up.
pub(crate) struct MergeGuard {
    tolerance: f64,
    slack: f64,
    surface: TriangleBvh,
    probes: Vec<Point>,
}

const GUARD_PROBES: usize = 4096;
const HULL_SAMPLES: usize = 256;

impl MergeGuard {
    pub(crate) fn new(solid: &TriangleMesh, tolerance: f64, seed: u64) -> Result<Self> {
        let mut probes = sample_surface(solid, GUARD_PROBES, seed)?.points;
        probes.extend_from_slice(solid.vertices());
        Ok(MergeGuard { tolerance, slack: 1e-9 * solid.diagonal(), surface: TriangleBvh::from_mesh(solid), probes })
    }

    pub(crate) fn accept(&self, a: &ConvexPart, b: &ConvexPart, merged: &ConvexPart) -> bool {
        for p in &self.probes {
            if !merged.aabb().contains_point(p, 0.0) {
                continue;
            }
            let d = depth_inside(merged, p);
            if d > self.tolerance && d > depth_inside(a, p).max(depth_inside(b, p)) + self.slack {
                return false;
            }
        }
        hull_points(merged).iter().all(|x| {
            a.contains_point(x, self.slack)
                || b.contains_point(x, self.slack)
                || self.surface.any_within(x, self.tolerance)
                || self.surface.is_inside(x)
        })
    }
}

/// Fixed barycentric points on every face plus area-uniform samples.
fn hull_points(part: &ConvexPart) -> Vec<Point> {
    const BARY: [[f64; 3]; 7] = [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    let mut out = Vec::with_capacity(part.faces().len() * BARY.len() + HULL_SAMPLES);
    for f in part.faces() {
        let [p, q, r] = f.map(|i| part.vertices()[i as usize]);
        for w in BARY {
            out.push(Point::from(p.coords * w[0] + q.coords * w[1] + r.coords * w[2]));
        }
    }
    if let Ok(cloud) = sample_surface(&part.to_mesh(), HULL_SAMPLES, 0) {
        out.extend(cloud.points);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::tests::cube_part;

    #[test]
    fn complementary_halves_merge() {
        let a = cube_part([0.0; 3], [0.5, 1.0, 1.0]);
        let b = cube_part([0.5, 0.0, 0.0], [1.0; 3]);
        let out = merge_neighbors(vec![a.clone(), b.clone()], 1e-6);
        assert_eq!(out.len(), 1);
        assert!((out[0].volume() - 1.0).abs() < 1e-12);
        assert_eq!(merge_neighbors(vec![a, b], 0.0).len(), 1);
    }

    #[test]
    fn distant_cubes_stay_apart() {
        let a = cube_part([0.0; 3], [1.0; 3]);
        let b = cube_part([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]);
        // Not neighbours; even as a pair the relative error is 0.5.
        assert_eq!(merge_neighbors(vec![a.clone(), b.clone()], 0.1).len(), 2);
        let (_, err) = merge_pair(&a, &b).unwrap();
        assert!((err / 2.0 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn cheapest_first_and_chains() {
        let slabs: Vec<ConvexPart> = (0..4).map(|k| cube_part([k as f64 * 0.25, 0.0, 0.0], [(k + 1) as f64 * 0.25, 1.0, 1.0])).collect();
        let (out, n) = merge_neighbors_with(slabs, 0.0, &|_, _, _| true);
        assert_eq!(out.len(), 1);
        assert_eq!(n, 3);
    }

    #[test]
    fn veto_blocks_merges() {
        let a = cube_part([0.0; 3], [0.5, 1.0, 1.0]);
        let b = cube_part([0.5, 0.0, 0.0], [1.0; 3]);
        let (out, n) = merge_neighbors_with(vec![a, b], 1.0, &|_, _, _| false);
        assert_eq!((out.len(), n), (2, 0));
    }

    #[test]
    fn guard_blocks_filling_a_notch() {
        use crate::fixtures;
        // The two arms of the L merge into a hull that covers the missing
        // corner, whose surface is up to 0.5 away from the solid.
        let l = fixtures::l_prism();
        let a = cube_part([0.0; 3], [2.0, 1.0, 1.0]);
        let b = cube_part([0.0, 1.0, 0.0], [1.0, 2.0, 1.0]);
        let (m, _) = merge_pair(&a, &b).unwrap();
        assert!(!MergeGuard::new(&l, 0.1, 0).unwrap().accept(&a, &b, &m));
        assert!(MergeGuard::new(&l, 0.8, 0).unwrap().accept(&a, &b, &m));
        // Complementary halves rebuild the cube exactly.
        let cube = fixtures::unit_cube();
        let h0 = cube_part([0.0; 3], [0.5, 1.0, 1.0]);
        let h1 = cube_part([0.5, 0.0, 0.0], [1.0; 3]);
        let (m, _) = merge_pair(&h0, &h1).unwrap();
        assert!(MergeGuard::new(&cube, 1e-6, 0).unwrap().accept(&h0, &h1, &m));
    }
}
