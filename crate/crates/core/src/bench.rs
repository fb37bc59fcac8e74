//! Collision-query throughput of a decomposition, used as a stand-in for
//! simulation speed.
//!
//! Twenty-five copies of the decomposed object sit on a jittered grid in a
//! closed box. Every step each object receives a small random rigid
//! displacement, then a sweep-and-prune broad phase over part boxes and a
//! GJK narrow phase over candidate part pairs decide which moves are
//! rejected. Throughput is object-pair queries per second of query time.

use std::time::{Duration, Instant};

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acd::mix_seed;
use crate::convex::{convex_hull, gjk_intersects, ConvexPart};
use crate::error::{Error, Result};
use crate::fixtures::box_mesh;
use crate::geom::{Aabb, Point, Vector};
use crate::pipeline::Decomposition;

pub const WARMUP_STEPS: usize = 10;
const MAX_PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    /// Objects per grid row; the scene holds `grid²` objects.
    pub grid: usize,
    /// Grid spacing as a multiple of the object's box diagonal.
    pub spacing_factor: f64,
    /// Largest initial offset, as a fraction of the spacing.
    pub jitter: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams { grid: 5, spacing_factor: 1.2, jitter: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchParams {
    /// Largest translation per step, as a fraction of the spacing.
    pub max_translation: f64,
    /// Largest rotation per step in degrees.
    pub max_rotation_deg: f64,
    /// Run the narrow phase on the rayon pool. Timings from this mode are
    /// not comparable with sequential runs.
    pub parallel: bool,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams { max_translation: 0.02, max_rotation_deg: 2.0, parallel: false }
    }
}

/// Posed copies of one decomposition inside a wall box.
#[derive(Debug, Clone)]
pub struct BenchScene {
    /// Parts in the object frame, centred on the object's box.
    pub parts: Vec<ConvexPart>,
    pub poses: Vec<Isometry3<f64>>,
    pub walls: Aabb,
    pub spacing: f64,
}

impl BenchScene {
    pub fn object_count(&self) -> usize {
        self.poses.len()
    }

    /// True when no two objects touch.
    pub fn is_clear(&self) -> Result<bool> {
        let boxes = self.world_boxes(&self.poses);
        for a in 0..self.poses.len() {
            for b in a + 1..self.poses.len() {
                if self.objects_touch(a, b, &self.poses, &boxes, 0.0)?.1 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn world_boxes(&self, poses: &[Isometry3<f64>]) -> Vec<Vec<Aabb>> {
        poses.iter().map(|pose| self.parts.iter().map(|p| transform_box(p.aabb(), pose)).collect()).collect()
    }

    /// Number of GJK queries run and whether objects `a` and `b` touch.
    fn objects_touch(
        &self,
        a: usize,
        b: usize,
        poses: &[Isometry3<f64>],
        boxes: &[Vec<Aabb>],
        margin: f64,
    ) -> Result<(u64, bool)> {
        let mut queries = 0;
        for (i, pa) in self.parts.iter().enumerate() {
            for (j, pb) in self.parts.iter().enumerate() {
                if boxes[a][i].intersects(&boxes[b][j], margin) {
                    queries += 1;
                    if gjk_intersects(pa, &poses[a], pb, &poses[b])? {
                        return Ok((queries, true));
                    }
                }
            }
        }
        Ok((queries, false))
    }
}

fn transform_box(b: &Aabb, pose: &Isometry3<f64>) -> Aabb {
    let corners = (0..8).map(|k| {
        pose * Point::new(
            if k & 1 == 0 { b.min.x } else { b.max.x },
            if k & 2 == 0 { b.min.y } else { b.max.y },
            if k & 4 == 0 { b.min.z } else { b.max.z },
        )
    });
    let pts: Vec<Point> = corners.collect();
    Aabb::from_points(pts.iter()).expect("eight corners")
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let v = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vector {
    random_unit(rng) * radius * rng.random::<f64>().cbrt()
}

/// The convex pieces an object is built from: every convex part, plus the
/// hull of each exact mesh.
fn object_parts(decomp: &Decomposition) -> Result<Vec<ConvexPart>> {
    let mut parts = decomp.convex_parts();
    for e in &decomp.exact_meshes {
        parts.push(convex_hull(e.mesh.vertices())?);
    }
    Ok(parts)
}

pub fn build_scene(decomp: &Decomposition, seed: u64) -> Result<BenchScene> {
    build_scene_with(decomp, &SceneParams::default(), seed)
}

/// Places `grid²` copies of the decomposition on a jittered, randomly
/// rotated grid and checks that none touch, redrawing the jitter up to 100
/// times.
pub fn build_scene_with(decomp: &Decomposition, params: &SceneParams, seed: u64) -> Result<BenchScene> {
    let raw = object_parts(decomp)?;
    if raw.is_empty() {
        return Err(Error::EmptyInput);
    }
    if params.grid == 0 || !(params.spacing_factor > 0.0) || !(params.jitter >= 0.0) {
        return Err(Error::InvalidParams("scene needs a non-empty grid, positive spacing and jitter ≥ 0".into()));
    }
    let bounds = raw.iter().skip(1).fold(*raw[0].aabb(), |acc, p| acc.union(p.aabb()));
    let shift = -bounds.center().coords;
    let parts = raw
        .iter()
        .map(|p| convex_hull(&p.vertices().iter().map(|v| v + shift).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let spacing = params.spacing_factor * bounds.diagonal();
    let n = params.grid;
    let half = spacing * n as f64 / 2.0;
    let height = bounds.diagonal() * 2.0;
    let walls = Aabb::from_arrays([-half, -half, -height], [half, half, height])?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0, 31));
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut poses = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let base = Vector::new((i as f64 + 0.5) * spacing - half, (j as f64 + 0.5) * spacing - half, 0.0);
                let offset = random_in_ball(&mut rng, params.jitter * spacing);
                let rot = UnitQuaternion::from_axis_angle(
                    &nalgebra::Unit::new_normalize(random_unit(&mut rng)),
                    rng.random_range(0.0..std::f64::consts::TAU),
                );
                poses.push(Isometry3::from_parts(Translation3::from(base + offset), rot));
            }
        }
        let scene = BenchScene { parts: parts.clone(), poses, walls, spacing };
        if scene.is_clear()? {
            return Ok(scene);
        }
    }
    Err(Error::ClearanceViolation(MAX_PLACEMENT_ATTEMPTS))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    /// Object-pair collision queries answered per second of query time.
    pub queries_per_second: f64,
    /// GJK calls.
    pub total_narrowphase_queries: u64,
    /// Part pairs whose boxes overlapped in the broad phase.
    pub broadphase_pairs: u64,
    pub object_pair_queries: u64,
    /// Moves rejected because they would have caused contact or left the
    /// walls.
    pub rejected_moves: u64,
    pub steps: usize,
    pub duration_wall: f64,
    /// Reference throughput of a single unit-cube pair on this machine.
    pub reference_rate: f64,
    /// `queries_per_second / reference_rate`.
    pub proxy_rtf: f64,
    pub parallel: bool,
}

impl PerfReport {
    pub fn summary(&self) -> String {
        format!(
            "{} steps: {:.0} queries/s, proxy_rtf {:.4}, {} narrow-phase, {} broad-phase pairs, {:.3}s",
            self.steps,
            self.queries_per_second,
            self.proxy_rtf,
            self.total_narrowphase_queries,
            self.broadphase_pairs,
            self.duration_wall
        )
    }
}

/// GJK queries per second between two unit cubes a small gap apart.
pub fn reference_rate() -> f64 {
    let cube = ConvexPart::from_mesh(&box_mesh([-0.5; 3], [0.5; 3])).expect("unit cube is convex");
    let a = Isometry3::identity();
    let b = Isometry3::translation(1.1, 0.05, 0.0);
    let mut count = 0u64;
    let started = Instant::now();
    while started.elapsed() < Duration::from_millis(50) {
        for _ in 0..256 {
            let _ = std::hint::black_box(gjk_intersects(&cube, &a, &cube, &b));
        }
        count += 256;
    }
    count as f64 / started.elapsed().as_secs_f64()
}

pub fn run_bench(scene: &BenchScene, steps: usize, seed: u64) -> Result<PerfReport> {
    run_bench_with(scene, steps, seed, &BenchParams::default(), reference_rate())
}

/// Runs `WARMUP_STEPS` untimed steps and then `steps` timed ones. Query
/// counts depend only on the scene and seed.
pub fn run_bench_with(
    scene: &BenchScene,
    steps: usize,
    seed: u64,
    params: &BenchParams,
    reference_rate: f64,
) -> Result<PerfReport> {
    let mut report = PerfReport { steps, reference_rate, parallel: params.parallel, ..Default::default() };
    if steps == 0 {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0, 32));
    let mut poses = scene.poses.clone();
    let mut elapsed = Duration::ZERO;
    for step in 0..WARMUP_STEPS + steps {
        let mut counts = PerfReport::default();
        let proposed: Vec<Isometry3<f64>> = poses
            .iter()
            .map(|pose| {
                let t = random_in_ball(&mut rng, params.max_translation * scene.spacing);
                let axis = nalgebra::Unit::new_normalize(random_unit(&mut rng));
                let angle = rng.random_range(-1.0..=1.0) * params.max_rotation_deg.to_radians();
                let rot = UnitQuaternion::from_axis_angle(&axis, angle);
                Isometry3::from_parts(Translation3::from(pose.translation.vector + t), rot * pose.rotation)
            })
            .collect();
        let started = Instant::now();
        poses = resolve_step(scene, &poses, proposed, params, &mut counts)?;
        if step >= WARMUP_STEPS {
            elapsed += started.elapsed();
            report.total_narrowphase_queries += counts.total_narrowphase_queries;
            report.broadphase_pairs += counts.broadphase_pairs;
            report.object_pair_queries += counts.object_pair_queries;
            report.rejected_moves += counts.rejected_moves;
        }
    }
    report.duration_wall = elapsed.as_secs_f64();
    if report.duration_wall > 0.0 {
        report.queries_per_second = report.object_pair_queries as f64 / report.duration_wall;
    }
    if reference_rate > 0.0 {
        report.proxy_rtf = report.queries_per_second / reference_rate;
    }
    Ok(report)
}

/// Moves every object to its proposed pose unless that leaves the walls or
/// touches another object; rejected objects stay put. Rejections can
/// cascade, so pairs involving a newly rejected object are re-checked.
fn resolve_step(
    scene: &BenchScene,
    old: &[Isometry3<f64>],
    proposed: Vec<Isometry3<f64>>,
    params: &BenchParams,
    counts: &mut PerfReport,
) -> Result<Vec<Isometry3<f64>>> {
    let n = old.len();
    let mut poses = proposed;
    let mut boxes = scene.world_boxes(&poses);
    let mut moved = vec![true; n];
    for k in 0..n {
        let inside = boxes[k].iter().all(|b| scene.walls.contains_box(b, 0.0));
        if !inside {
            moved[k] = false;
            poses[k] = old[k];
            boxes[k] = scene.world_boxes(&old[k..k + 1]).remove(0);
            counts.rejected_moves += 1;
        }
    }
    counts.object_pair_queries += (n * (n - 1) / 2) as u64;
    let mut pending = broad_phase(&boxes, counts);
    loop {
        let results: Vec<((usize, usize), Result<(u64, bool)>)> = if params.parallel {
            pending.par_iter().map(|&(a, b)| ((a, b), scene.objects_touch(a, b, &poses, &boxes, 0.0))).collect()
        } else {
            pending.iter().map(|&(a, b)| ((a, b), scene.objects_touch(a, b, &poses, &boxes, 0.0))).collect()
        };
        let mut newly = Vec::new();
        for ((a, b), r) in results {
            let (q, hit) = r?;
            counts.total_narrowphase_queries += q;
            if hit {
                for k in [a, b] {
                    if moved[k] {
                        moved[k] = false;
                        newly.push(k);
                    }
                }
            }
        }
        if newly.is_empty() {
            return Ok(poses);
        }
        counts.rejected_moves += newly.len() as u64;
        for &k in &newly {
            poses[k] = old[k];
            boxes[k] = scene.world_boxes(&old[k..k + 1]).remove(0);
        }
        // A reverted object may now touch a neighbour; re-check its pairs.
        pending = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| newly.contains(&a) || newly.contains(&b))
            .filter(|&(a, b)| object_boxes_overlap(&boxes[a], &boxes[b]))
            .collect();
    }
}

fn object_boxes_overlap(a: &[Aabb], b: &[Aabb]) -> bool {
    a.iter().any(|x| b.iter().any(|y| x.intersects(y, 0.0)))
}

/// Sweep and prune along x over all part boxes; returns the object pairs
/// with at least one overlapping part pair.
fn broad_phase(boxes: &[Vec<Aabb>], counts: &mut PerfReport) -> Vec<(usize, usize)> {
    let mut items: Vec<(f64, f64, usize, usize)> = boxes
        .iter()
        .enumerate()
        .flat_map(|(o, parts)| parts.iter().enumerate().map(move |(p, b)| (b.min.x, b.max.x, o, p)))
        .collect();
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut active: Vec<usize> = Vec::new();
    let mut pairs = Vec::new();
    for (k, &(lo, _, o, p)) in items.iter().enumerate() {
        active.retain(|&a| items[a].1 >= lo);
        for &a in &active {
            let (_, _, oa, pa) = items[a];
            if oa != o && boxes[oa][pa].intersects(&boxes[o][p], 0.0) {
                counts.broadphase_pairs += 1;
                pairs.push((oa.min(o), oa.max(o)));
            }
        }
        active.push(k);
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}
