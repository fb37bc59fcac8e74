//! Approximation error of a decomposition: per-region symmetric Hausdorff
//! distances, coloured error samples and the weighted objective.

mod bvh;
mod samples;
mod surface;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bvh::{Closest, TriangleBvh};
pub use samples::{error_samples, error_samples_for, normalize_clamp, Colormap, ErrorSampleParams, ErrorSampleSet};
pub use surface::{clip_triangles_to_box, visible_surface};

use crate::acd::mix_seed;
use crate::bench::PerfReport;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::mesh::{sample_triangles, TriangleMesh};
use crate::pipeline::{Decomposition, RegionBox};

pub const DEFAULT_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionError {
    pub id: String,
    pub tolerance: f64,
    /// Largest distance from the approximation's surface in the box to the
    /// original surface.
    pub d_a_to_o: f64,
    /// Largest distance from the original surface in the box to the
    /// approximation's surface.
    pub d_o_to_a: f64,
    pub region_error: f64,
}

impl RegionError {
    pub fn within(&self, factor: f64) -> bool {
        self.region_error <= factor * self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionErrorReport {
    pub regions: Vec<RegionError>,
    pub overall: f64,
}

/// Distance structures for one original mesh and one decomposition, reused
/// across regions.
pub struct ErrorEvaluator {
    original: TriangleBvh,
    approx: TriangleBvh,
}

impl ErrorEvaluator {
    pub fn new(original: &TriangleMesh, approx: &Decomposition) -> Self {
        ErrorEvaluator { original: TriangleBvh::from_mesh(original), approx: TriangleBvh::new(visible_surface(approx)) }
    }

    /// Visible triangles of the approximation.
    pub fn approx_surface(&self) -> &[[Point; 3]] {
        self.approx.triangles()
    }

    /// `(d_a_to_o, d_o_to_a)` inside `region`'s closed box, from `n`
    /// area-uniform samples per direction plus the corners of the clipped
    /// surface. Both directions draw with the same seed, so swapping the
    /// two surfaces swaps the two values exactly.
    pub fn region(&self, region: &RegionBox, n: usize, seed: u64) -> Result<(f64, f64)> {
        let aabb = region.aabb()?;
        let probe_seed = mix_seed(seed, 0, 11);
        let orig = clip_triangles_to_box(self.original.triangles(), &aabb);
        let orig_pts = probe_points(&orig, n, probe_seed).ok_or_else(|| Error::NoSamplesInRegion(region.id.clone()))?;
        let d_o_to_a = max_distance(&orig_pts, &self.approx);
        let approx = clip_triangles_to_box(self.approx.triangles(), &aabb);
        let d_a_to_o = match probe_points(&approx, n, probe_seed) {
            Some(pts) => max_distance(&pts, &self.original),
            None => 0.0,
        };
        Ok((d_a_to_o, d_o_to_a))
    }
}

fn probe_points(tris: &[[Point; 3]], n: usize, seed: u64) -> Option<Vec<Point>> {
    let cloud = sample_triangles(tris, n.max(1), seed).ok()?;
    let mut pts = cloud.points;
    pts.extend(tris.iter().flatten().copied());
    Some(pts)
}

fn max_distance(points: &[Point], target: &TriangleBvh) -> f64 {
    if target.is_empty() {
        return f64::INFINITY;
    }
    points.par_iter().map(|p| target.distance(p)).reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance between `original` and `approx` restricted
/// to `region`.
pub fn region_hausdorff(
    original: &TriangleMesh,
    approx: &Decomposition,
    region: &RegionBox,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    ErrorEvaluator::new(original, approx).region(region, n, seed)
}

/// Errors of every region; `overall` is their mean.
pub fn evaluate_regions(
    original: &TriangleMesh,
    approx: &Decomposition,
    regions: &[RegionBox],
    n: usize,
    seed: u64,
) -> Result<RegionErrorReport> {
    let eval = ErrorEvaluator::new(original, approx);
    let regions: Vec<RegionError> = regions
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let (d_a_to_o, d_o_to_a) = eval.region(r, n, mix_seed(seed, i as u64, 12))?;
            Ok(RegionError {
                id: r.id.clone(),
                tolerance: r.tolerance,
                d_a_to_o,
                d_o_to_a,
                region_error: d_a_to_o.max(d_o_to_a),
            })
        })
        .collect::<Result<_>>()?;
    let overall = overall_error(&regions)?;
    Ok(RegionErrorReport { regions, overall })
}

/// Regions to evaluate a decomposition over: its own regions, or one
/// box around the whole mesh with tolerance 0 when it has none.
pub fn evaluation_regions(mesh: &TriangleMesh, decomp: &Decomposition) -> Result<Vec<RegionBox>> {
    if !decomp.regions.is_empty() {
        return Ok(decomp.regions.clone());
    }
    let bb = mesh.aabb().ok_or(Error::EmptyMesh)?;
    Ok(vec![RegionBox::from_aabb("mesh", &bb, 0.0)])
}

/// Mean region error.
pub fn overall_error(reports: &[RegionError]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(reports.iter().map(|r| r.region_error).sum::<f64>() / reports.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerm {
    pub id: String,
    /// Measured region error.
    pub phi: f64,
    /// Requested tolerance.
    pub delta: f64,
}

/// `λ_err·ξ + λ_sim·τ` with `ξ = Σ (φ_r − δ_r)²` over the regions and `τ`
/// the simulation cost, `1 / proxy_rtf`. Both terms are costs, so lower is
/// better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub lambda_err: f64,
    pub lambda_sim: f64,
    pub terms: Vec<ObjectiveTerm>,
    pub xi: f64,
    pub tau: f64,
    pub weighted_total: f64,
}

impl ObjectiveReport {
    pub fn new(terms: Vec<ObjectiveTerm>, tau: f64, lambda_err: f64, lambda_sim: f64) -> Result<Self> {
        if !(lambda_err >= 0.0 && lambda_sim >= 0.0) {
            return Err(Error::InvalidParams("objective weights must be non-negative".into()));
        }
        let xi = terms.iter().map(|t| (t.phi - t.delta).powi(2)).sum();
        Ok(ObjectiveReport { lambda_err, lambda_sim, terms, xi, tau, weighted_total: lambda_err * xi + if lambda_sim == 0.0 { 0.0 } else { lambda_sim * tau } })
    }
}

/// Objective of a decomposition from its region errors and a benchmark
/// run.
pub fn objective_report(errors: &RegionErrorReport, perf: &PerfReport, lambda_err: f64, lambda_sim: f64) -> Result<ObjectiveReport> {
    let terms = errors
        .regions
        .iter()
        .map(|r| ObjectiveTerm { id: r.id.clone(), phi: r.region_error, delta: r.tolerance })
        .collect();
    ObjectiveReport::new(terms, 1.0 / perf.proxy_rtf, lambda_err, lambda_sim)
}
