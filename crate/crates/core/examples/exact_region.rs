//! A zero-tolerance region keeps the original geometry inside its box
//! untouched; only the rest is approximated.

use regacd::fixtures;
use regacd::metrics::evaluate_regions;
use regacd::pipeline::{interactive_decomposition, PipelineParams, RegionBox};

fn main() -> regacd::Result<()> {
    let mesh = fixtures::l_prism();
    let notch = RegionBox::new("notch", [0.5, 0.5, -0.1], [2.1, 2.1, 1.1], 0.0);
    let params = PipelineParams { regions: vec![notch.clone()], remainder_tolerance: 0.2, ..Default::default() };
    let decomp = interactive_decomposition(&mesh, &params)?;
    let exact = &decomp.exact_meshes[0].mesh;
    println!(
        "exact mesh: {} vertices, {} faces, volume {:.6}",
        exact.vertices().len(),
        exact.faces().len(),
        exact.volume()?
    );
    println!("convex remainder parts: {}", decomp.parts.len());
    let errors = evaluate_regions(&mesh, &decomp, &[notch], 20_000, 0)?;
    println!("notch error: {:.2e}", errors.regions[0].region_error);
    Ok(())
}
