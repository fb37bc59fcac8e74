//! Collision-query throughput of a coarse and a fine decomposition of the
//! same object in a crowded 25-object scene.

use regacd::acd::{convex_decompose, AcdParams};
use regacd::bench::{build_scene_with, reference_rate, run_bench_with, BenchParams, SceneParams};
use regacd::fixtures;
use regacd::pipeline::Decomposition;

fn main() -> regacd::Result<()> {
    let mesh = fixtures::dimpled_cube();
    let reference = reference_rate();
    let crowded = SceneParams { spacing_factor: 0.9, jitter: 0.02, ..Default::default() };
    for eps in [0.2, 0.02] {
        let decomp = Decomposition::from_parts(convex_decompose(&mesh, &AcdParams::with_tolerance(eps))?.parts());
        let scene = build_scene_with(&decomp, &crowded, 1)?;
        let report = run_bench_with(&scene, 100, 1, &BenchParams::default(), reference)?;
        println!("{:3} parts: {}", decomp.parts.len(), report.summary());
    }
    Ok(())
}
