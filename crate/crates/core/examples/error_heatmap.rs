//! Coloured per-sample error between the dimpled cube and a plain cube,
//! written as PLY point clouds for both sampling directions.
//!
//! cargo run --release --example error_heatmap -- [out_prefix]

use regacd::fixtures;
use regacd::metrics::{error_samples, ErrorSampleParams};
use regacd::{Aabb, ConvexPart};

fn main() -> regacd::Result<()> {
    let prefix = std::env::args().nth(1).unwrap_or_else(|| "dimple".into());
    let original = fixtures::dimpled_cube();
    let approx = [ConvexPart::from_mesh(&fixtures::unit_cube())?];
    let dimple = Aabb::from_arrays([0.2, 0.2, 0.6], [0.8, 0.8, 1.1])?;
    for on_approx in [false, true] {
        let params = ErrorSampleParams { n: 50_000, beta: Some(0.2), filter_boxes: vec![dimple], on_approx, ..Default::default() };
        let set = error_samples(&original, &approx, &params)?;
        let path = format!("{prefix}_{}.ply", if on_approx { "approx" } else { "original" });
        std::fs::write(&path, set.to_ply()).map_err(|e| regacd::Error::io(&path, e))?;
        println!("{path}: {} points, max distance {:.4}", set.len(), set.max_distance());
    }
    Ok(())
}
