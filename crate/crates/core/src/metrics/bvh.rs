//! Bounding-volume hierarchy over triangles for exact closest-point and
//! ray-parity queries.

use crate::geom::{closest_point_on_triangle, Aabb, Point, Vector};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Closest {
    pub point: Point,
    pub distance: f64,
    /// Index into the triangle slice the tree was built from.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    start: u32,
    count: u32,
    /// Right child; the left child is the next node.
    right: u32,
}

/// Traversal stack on the call stack; the tree depth is logarithmic in the
/// triangle count, so 128 entries never run out.
struct Stack {
    items: [(usize, f64); 128],
    len: usize,
}

impl Stack {
    fn new() -> Self {
        Stack { items: [(0, 0.0); 128], len: 0 }
    }

    fn push(&mut self, item: (usize, f64)) {
        self.items[self.len] = item;
        self.len += 1;
    }

    fn pop(&mut self) -> Option<(usize, f64)> {
        self.len = self.len.checked_sub(1)?;
        Some(self.items[self.len])
    }
}

#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Point; 3]>,
    index: Vec<u32>,
    nodes: Vec<Node>,
}

fn tri_bounds(t: &[Point; 3]) -> Aabb {
    Aabb::from_points(t.iter()).expect("three points")
}

impl TriangleBvh {
    pub fn new(tris: Vec<[Point; 3]>) -> Self {
        let mut index: Vec<u32> = (0..tris.len() as u32).collect();
        let centroids: Vec<Point> =
            tris.iter().map(|[a, b, c]| Point::from((a.coords + b.coords + c.coords) / 3.0)).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build(&tris, &centroids, &mut index, 0, tris.len(), &mut nodes);
        }
        TriangleBvh { tris, index, nodes }
    }

    pub fn from_mesh(mesh: &crate::mesh::TriangleMesh) -> Self {
        Self::new(mesh.triangles().collect())
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        &self.tris
    }

    /// Closest point on any triangle, or `None` for an empty tree.
    pub fn closest(&self, p: &Point) -> Option<Closest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = Closest { point: *p, distance: f64::INFINITY, triangle: usize::MAX };
        let mut best_sq = f64::INFINITY;
        let mut stack = Stack::new();
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((n, d2)) = stack.pop() {
            if d2 > best_sq {
                continue;
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &t in &self.index[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[t as usize];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (q - p).norm_squared();
                    if d < best_sq || (d == best_sq && (t as usize) < best.triangle) {
                        best_sq = d;
                        best = Closest { point: q, distance: 0.0, triangle: t as usize };
                    }
                }
            } else {
                self.push_children(n, p, &mut stack);
            }
        }
        best.distance = best_sq.sqrt();
        Some(best)
    }

    /// True when some triangle lies within `r` of `p`. Cheaper than
    /// [`closest`](Self::closest) since it stops at the first hit.
    pub fn any_within(&self, p: &Point, r: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let r2 = r * r;
        let mut stack = Stack::new();
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((n, d2)) = stack.pop() {
            if d2 > r2 {
                continue;
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &t in &self.index[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[t as usize];
                    if (closest_point_on_triangle(p, a, b, c) - p).norm_squared() <= r2 {
                        return true;
                    }
                }
            } else {
                self.push_children(n, p, &mut stack);
            }
        }
        false
    }

    /// Largest distance from any of `points` to the surface, with the point
    /// attaining it.
    pub fn max_distance<'a>(&self, points: impl IntoIterator<Item = &'a Point>) -> Option<(f64, Point)> {
        let mut best: Option<(f64, Point)> = None;
        for p in points {
            if let Some((d, _)) = best {
                if self.any_within(p, d) {
                    continue;
                }
            }
            let d = self.distance(p);
            if best.is_none_or(|(b, _)| d > b) {
                best = Some((d, *p));
            }
        }
        best
    }

    fn push_children(&self, n: usize, p: &Point, stack: &mut Stack) {
        let (l, r) = (n + 1, self.nodes[n].right as usize);
        let dl = self.nodes[l].bounds.distance_squared(p);
        let dr = self.nodes[r].bounds.distance_squared(p);
        // Push the farther child first so the nearer one is popped next.
        if dl <= dr {
            stack.push((r, dr));
            stack.push((l, dl));
        } else {
            stack.push((l, dl));
            stack.push((r, dr));
        }
    }

    pub fn distance(&self, p: &Point) -> f64 {
        self.closest(p).map_or(f64::INFINITY, |c| c.distance)
    }

    /// Number of triangles crossed by the ray `origin + t·dir`, `t > 0`.
    pub fn ray_crossings(&self, origin: &Point, dir: &Vector) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let inv = Vector::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut hits = 0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !ray_hits_box(origin, &inv, &node.bounds) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.index[node.start as usize..(node.start + node.count) as usize] {
                    if ray_hits_triangle(origin, dir, &self.tris[t as usize]) {
                        hits += 1;
                    }
                }
            } else {
                stack.push(n + 1);
                stack.push(node.right as usize);
            }
        }
        hits
    }

    /// Inside test for a closed surface: majority vote of ray parity along
    /// three skew directions.
    pub fn is_inside(&self, p: &Point) -> bool {
        const DIRS: [[f64; 3]; 3] = [
            [0.5773, 0.5962, 0.5577],
            [-0.6917, 0.2219, 0.6872],
            [0.1862, -0.8734, -0.4499],
        ];
        let odd = DIRS.iter().filter(|d| self.ray_crossings(p, &Vector::new(d[0], d[1], d[2])) % 2 == 1).count();
        odd >= 2
    }
}

fn build(tris: &[[Point; 3]], centroids: &[Point], index: &mut [u32], lo: usize, hi: usize, nodes: &mut Vec<Node>) {
    let bounds = index[lo..hi]
        .iter()
        .map(|&t| tri_bounds(&tris[t as usize]))
        .reduce(|a, b| a.union(&b))
        .expect("non-empty range");
    let me = nodes.len();
    nodes.push(Node { bounds, start: lo as u32, count: (hi - lo) as u32, right: 0 });
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let cb = Aabb::from_points(index[lo..hi].iter().map(|&t| &centroids[t as usize])).expect("non-empty");
    let ext = cb.extents();
    let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
    if ext[axis] == 0.0 {
        return;
    }
    let mid = (lo + hi) / 2;
    index[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
    });
    nodes[me].count = 0;
    build(tris, centroids, index, lo, mid, nodes);
    nodes[me].right = nodes.len() as u32;
    build(tris, centroids, index, mid, hi, nodes);
}

fn ray_hits_box(o: &Point, inv: &Vector, b: &Aabb) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        let a = (b.min[k] - o[k]) * inv[k];
        let c = (b.max[k] - o[k]) * inv[k];
        t0 = t0.max(a.min(c));
        t1 = t1.min(a.max(c));
    }
    t0 <= t1
}

// Möller–Trumbore.
fn ray_hits_triangle(o: &Point, d: &Vector, [a, b, c]: &[Point; 3]) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-300 {
        return false;
    }
    let f = 1.0 / det;
    let s = o - a;
    let u = f * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = f * d.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    f * e2.dot(&q) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn brute(tris: &[[Point; 3]], p: &Point) -> f64 {
        tris.iter().map(|[a, b, c]| (closest_point_on_triangle(p, a, b, c) - p).norm()).fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn closest_matches_linear_scan(x in -2.0..3.0f64, y in -2.0..3.0f64, z in -2.0..3.0f64) {
            let mesh = fixtures::motor_like();
            let bvh = TriangleBvh::from_mesh(&mesh);
            let p = Point::new(x, y, z);
            let c = bvh.closest(&p).unwrap();
            prop_assert!((c.distance - brute(bvh.triangles(), &p)).abs() < 1e-12);
            prop_assert!(((c.point - p).norm() - c.distance).abs() < 1e-12);
            prop_assert!(bvh.any_within(&p, c.distance + 1e-12));
            prop_assert!(c.distance < 1e-9 || !bvh.any_within(&p, c.distance * 0.999));
        }

        #[test]
        fn parity_agrees_with_winding_number(x in -0.5..1.5f64, y in -0.5..1.5f64, z in -0.5..1.5f64) {
            let mesh = fixtures::l_prism();
            let bvh = TriangleBvh::from_mesh(&mesh);
            let p = Point::new(x, y, z);
            prop_assume!(bvh.distance(&p) > 1e-6);
            prop_assert_eq!(bvh.is_inside(&p), mesh.winding_number(&p) > 0.5);
        }
    }

    #[test]
    fn max_distance_matches_exhaustive() {
        let bvh = TriangleBvh::from_mesh(&fixtures::unit_cube());
        let pts: Vec<Point> = (0..50).map(|k| Point::new(k as f64 * 0.07 - 1.0, 0.3, 2.0 - k as f64 * 0.05)).collect();
        let want = pts.iter().map(|p| bvh.distance(p)).fold(0.0, f64::max);
        let (got, at) = bvh.max_distance(&pts).unwrap();
        assert_eq!(got, want);
        assert_eq!(bvh.distance(&at), want);
    }

    #[test]
    fn empty_tree() {
        let bvh = TriangleBvh::new(Vec::new());
        assert!(bvh.closest(&Point::origin()).is_none());
        assert!(!bvh.is_inside(&Point::origin()));
    }
}
