//! Static 3-d tree for nearest-neighbour queries over point clouds.

use crate::geom::Point;

pub struct KdTree {
    points: Vec<Point>,
    /// Original index of each stored point.
    index: Vec<usize>,
    nodes: Vec<Node>,
}

struct Node {
    lo: usize,
    hi: usize,
    axis: u8,
    split: f64,
    children: Option<(u32, u32)>,
}

const LEAF_SIZE: usize = 12;

impl KdTree {
    pub fn new(points: &[Point]) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            build(points, &mut idx, 0, points.len(), &mut nodes);
        }
        KdTree { points: idx.iter().map(|&i| points[i]).collect(), index: idx, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index (into the construction slice) and squared distance of the
    /// point nearest to `q`.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some((self.index[best.0], best.1))
    }

    fn search(&self, node: usize, q: &Point, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        match n.children {
            None => {
                for i in n.lo..n.hi {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && self.index[i] < self.index.get(best.0).copied().unwrap_or(usize::MAX)) {
                        *best = (i, d);
                    }
                }
            }
            Some((l, r)) => {
                let diff = q[n.axis as usize] - n.split;
                let (near, far) = if diff <= 0.0 { (l, r) } else { (r, l) };
                self.search(near as usize, q, best);
                if diff * diff <= best.1 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build(points: &[Point], idx: &mut [usize], lo: usize, hi: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    nodes.push(Node { lo, hi, axis: 0, split: 0.0, children: None });
    if hi - lo <= LEAF_SIZE {
        return me;
    }
    let mut min = points[idx[lo]];
    let mut max = min;
    for &i in &idx[lo..hi] {
        for k in 0..3 {
            min[k] = min[k].min(points[i][k]);
            max[k] = max[k].max(points[i][k]);
        }
    }
    let ext = max - min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
    if ext[axis] == 0.0 {
        return me;
    }
    let mid = (lo + hi) / 2;
    idx[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let split = points[idx[mid]][axis];
    let l = build(points, idx, lo, mid, nodes);
    let r = build(points, idx, mid, hi, nodes);
    nodes[me].axis = axis as u8;
    nodes[me].split = split;
    nodes[me].children = Some((l as u32, r as u32));
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Point], q: &Point) -> f64 {
        points.iter().map(|p| (p - q).norm_squared()).fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn matches_linear_scan(
            pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64), 1..300),
            qs in prop::collection::vec((-12.0..12.0f64, -12.0..12.0f64, -12.0..12.0f64), 1..20),
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect();
            let tree = KdTree::new(&pts);
            for (x, y, z) in qs {
                let q = Point::new(x, y, z);
                let (i, d) = tree.nearest(&q).unwrap();
                prop_assert_eq!(d, brute(&pts, &q));
                prop_assert_eq!((pts[i] - q).norm_squared(), d);
            }
        }
    }

    #[test]
    fn duplicates_and_empty() {
        assert!(KdTree::new(&[]).nearest(&Point::origin()).is_none());
        let pts = vec![Point::new(1.0, 1.0, 1.0); 40];
        let (_, d) = KdTree::new(&pts).nearest(&Point::origin()).unwrap();
        assert_eq!(d, 3.0);
    }
}
