//! Decompose the motor fixture with tight boxes around its bolt holes and
//! lifting eye, then write the parts and manifest to a directory.
//!
//! cargo run --release --example region_decomposition -- [out_dir]

use regacd::fixtures::{self, motor};
use regacd::pipeline::{check_invariants, interactive_decomposition, write_decomposition, PipelineParams, RegionBox};

fn main() -> regacd::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "motor-parts".into());
    let mesh = fixtures::motor_like();
    let mut regions: Vec<RegionBox> = motor::BOLTS
        .iter()
        .enumerate()
        .map(|(i, c)| RegionBox::new(format!("bolt{i}"), [c[0] - 0.25, c[1] - 0.25, -0.05], [c[0] + 0.25, c[1] + 0.25, 0.3], 0.005))
        .collect();
    regions.push(RegionBox::new("eye", [-0.45, -0.3, 2.15], [0.45, 0.3, 2.6], 0.005));

    let params = PipelineParams { regions, remainder_tolerance: 0.05, ..Default::default() };
    let decomp = interactive_decomposition(&mesh, &params)?;
    for r in &decomp.stats.regions {
        println!("{:>6}: {:3} parts, concavity {:.4} (tolerance {})", r.id, r.parts, r.max_concavity, r.tolerance);
    }
    println!("remainder: {} parts; {} merges", decomp.stats.remainder_parts, decomp.stats.merges);

    let report = check_invariants(&decomp, &mesh)?;
    println!("invariants ok: {}", report.ok());
    let manifest = write_decomposition(&decomp, out.as_ref())?;
    println!("wrote {}", manifest.display());
    Ok(())
}
