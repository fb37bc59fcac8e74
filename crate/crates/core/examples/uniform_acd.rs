//! Plain approximate convex decomposition at a range of tolerances.

use regacd::acd::{concavity, convex_decompose, AcdParams};
use regacd::fixtures;

fn main() -> regacd::Result<()> {
    let mesh = fixtures::dimpled_cube();
    println!("concavity of the whole mesh: {:.4}", concavity(&mesh, 8192, 0)?.value);
    for eps in [0.2, 0.1, 0.05, 0.02] {
        let out = convex_decompose(&mesh, &AcdParams::with_tolerance(eps))?;
        let hull_volume: f64 = out.pieces.iter().map(|p| p.hull.volume()).sum();
        println!(
            "eps {eps:<5} {:3} parts, worst fit {:.4}, hull volume {:.4} (mesh {:.4})",
            out.pieces.len(),
            out.max_concavity(),
            hull_volume,
            mesh.volume()?
        );
    }
    Ok(())
}
