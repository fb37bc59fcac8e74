//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regacd::fixtures::motor;
use regacd::kdtree::KdTree;
use regacd::pipeline::RegionBox;
use regacd::{convex_hull, ConvexPart, Point, TriangleMesh, Vector};

/// Area-weighted surface samples drawn with a plain cumulative-area search.
pub fn oracle_samples(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Point> {
    let tris: Vec<[Point; 3]> = mesh.triangles().collect();
    let mut cum = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for [a, b, c] in &tris {
        total += 0.5 * (b - a).cross(&(c - a)).norm();
        cum.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.random::<f64>() * total;
            let k = cum.partition_point(|&c| c < t).min(tris.len() - 1);
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            let [a, b, c] = tris[k];
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}

/// Outward unit normal and offset of every non-degenerate hull triangle.
pub fn hull_planes(hull: &ConvexPart) -> Vec<(Vector, f64)> {
    let v = hull.vertices();
    hull.faces()
        .iter()
        .filter_map(|f| {
            let [a, b, c] = f.map(|i| v[i as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            (len > 1e-14).then(|| (n / len, (n / len).dot(&a.coords)))
        })
        .collect()
}

/// Largest distance from a surface sample to the boundary of the mesh's
/// convex hull. For a point inside a convex polytope that distance is the
/// smallest gap to any face plane.
pub fn oracle_concavity(mesh: &TriangleMesh, n: usize, seed: u64) -> f64 {
    let hull = convex_hull(mesh.vertices()).unwrap();
    let planes = hull_planes(&hull);
    oracle_samples(mesh, n, seed)
        .iter()
        .map(|p| planes.iter().map(|(nrm, d)| d - nrm.dot(&p.coords)).fold(f64::INFINITY, f64::min).max(0.0))
        .fold(0.0, f64::max)
}

/// Mean distance between neighbouring samples, `sqrt(area / n)`.
pub fn spacing(mesh: &TriangleMesh, n: usize) -> f64 {
    (mesh.surface_area() / n as f64).sqrt()
}

/// Every vertex on or behind every face plane, within the part's tolerance.
pub fn is_convex(part: &ConvexPart) -> bool {
    let v = part.vertices();
    let tol = 1e-7 * part.diagonal();
    part.faces().iter().all(|f| {
        let [a, b, c] = f.map(|i| v[i as usize]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        len > 0.0 && v.iter().all(|p| n.dot(&(p - a)) / len <= tol)
    })
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect()
}

pub fn random_part(rng: &mut ChaCha8Rng) -> ConvexPart {
    let n = rng.random_range(6..40);
    let scale = rng.random_range(0.2..2.0);
    convex_hull(&random_points(rng, n, scale)).unwrap()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let v = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng, at: Vector) -> Isometry3<f64> {
    let axis = Unit::new_normalize(random_unit(rng));
    let rot = UnitQuaternion::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU));
    Isometry3::from_parts(Translation3::from(at), rot)
}

/// Minimum distance between `n` surface samples of each posed part, and
/// the larger of the two sample spacings.
pub fn sampled_distance(a: &ConvexPart, pa: &Isometry3<f64>, b: &ConvexPart, pb: &Isometry3<f64>, n: usize, seed: u64) -> (f64, f64) {
    let qa: Vec<Point> = oracle_samples(&a.to_mesh(), n, seed).iter().map(|p| pa * p).collect();
    let qb: Vec<Point> = oracle_samples(&b.to_mesh(), n, seed ^ 0x5555).iter().map(|p| pb * p).collect();
    let tree = KdTree::new(&qb);
    let d = qa.iter().map(|p| tree.nearest(p).unwrap().1.sqrt()).fold(f64::INFINITY, f64::min);
    let spacing = (a.surface_area() / n as f64).sqrt().max((b.surface_area() / n as f64).sqrt());
    (d, spacing)
}

/// The motor fixture's five feature regions: the four bolt holes and the
/// lifting eye, all at tolerance `eps`.
pub fn motor_regions(eps: f64) -> Vec<RegionBox> {
    let mut regions: Vec<RegionBox> = motor::BOLTS
        .iter()
        .enumerate()
        .map(|(i, c)| RegionBox::new(format!("bolt{i}"), [c[0] - 0.25, c[1] - 0.25, -0.05], [c[0] + 0.25, c[1] + 0.25, 0.3], eps))
        .collect();
    regions.push(RegionBox::new("eye", [-0.45, -0.3, 2.15], [0.45, 0.3, 2.6], eps));
    regions
}

/// A mixed region set per fixture, with at least one zero-tolerance box
/// on the fixtures that have room for one.
pub fn fixture_regions(name: &str) -> Vec<RegionBox> {
    match name {
        "cube" => vec![RegionBox::new("corner", [0.5; 3], [1.5; 3], 0.02)],
        "l_prism" => vec![
            RegionBox::new("notch", [0.5, 0.5, -0.1], [1.5, 1.5, 1.1], 0.02),
            RegionBox::new("tip", [1.5, -0.1, -0.1], [2.1, 1.1, 1.1], 0.0),
        ],
        "dimpled_cube" => vec![RegionBox::new("dimple", [0.2, 0.2, 0.6], [0.8, 0.8, 1.1], 0.01)],
        "dumbbell" => vec![
            RegionBox::new("bar", [-0.5, -0.5, 1.2], [0.5, 0.5, 1.8], 0.0),
            RegionBox::new("lobe", [-0.6, -0.6, 2.5], [0.6, 0.6, 3.1], 0.05),
        ],
        "square_ring" => vec![RegionBox::new("side", [-0.1, -0.1, -0.1], [1.5, 3.1, 1.1], 0.02)],
        "icosphere" => vec![RegionBox::new("cap", [-1.1, -1.1, 0.5], [1.1, 1.1, 1.1], 0.01)],
        "motor_like" => motor_regions(0.005),
        _ => Vec::new(),
    }
}
