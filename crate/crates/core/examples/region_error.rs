//! Per-region Hausdorff error of a decomposition and the objective that
//! trades it against simulation cost.

use regacd::bench::{build_scene, run_bench};
use regacd::fixtures;
use regacd::metrics::{evaluate_regions, objective_report};
use regacd::pipeline::{interactive_decomposition, PipelineParams, RegionBox};

fn main() -> regacd::Result<()> {
    let mesh = fixtures::dimpled_cube();
    let regions = vec![
        RegionBox::new("dimple", [0.2, 0.2, 0.6], [0.8, 0.8, 1.1], 0.03),
        RegionBox::new("corner", [-0.1, -0.1, -0.1], [0.3, 0.3, 0.3], 0.0),
    ];
    let params = PipelineParams { regions: regions.clone(), remainder_tolerance: 0.2, ..Default::default() };
    let decomp = interactive_decomposition(&mesh, &params)?;
    let errors = evaluate_regions(&mesh, &decomp, &regions, 20_000, 0)?;
    for r in &errors.regions {
        println!("{:>6}: error {:.5} (to original {:.5}, to approximation {:.5}), tolerance {}", r.id, r.region_error, r.d_a_to_o, r.d_o_to_a, r.tolerance);
    }
    let perf = run_bench(&build_scene(&decomp, 0)?, 50, 0)?;
    let objective = objective_report(&errors, &perf, 1.0, 1e-3)?;
    println!("xi {:.3e}, tau {:.3}, weighted {:.4}", objective.xi, objective.tau, objective.weighted_total);
    Ok(())
}
