//! Load, validate, sample and save meshes.
//!
//! cargo run --release --example mesh_io -- [mesh.obj|mesh.stl]

use regacd::fixtures;
use regacd::mesh::{load_mesh, sample_surface, save_mesh, LoadOptions, MeshFormat};

fn main() -> regacd::Result<()> {
    let mesh = match std::env::args().nth(1) {
        Some(path) => load_mesh(&path, MeshFormat::Auto, LoadOptions::default())?,
        None => {
            let path = std::env::temp_dir().join("regacd-example.stl");
            save_mesh(&fixtures::l_prism(), &path, MeshFormat::Stl)?;
            load_mesh(&path, MeshFormat::Auto, LoadOptions::default())?
        }
    };
    let report = mesh.validate();
    println!("{} vertices, {} faces, watertight {}", report.vertex_count, report.face_count, report.watertight);
    println!("volume {:.6}, area {:.6}, bounds {:?}", mesh.volume()?, mesh.surface_area(), mesh.aabb());
    let cloud = sample_surface(&mesh, 10_000, 0)?;
    println!("{} samples, spacing {:.4}", cloud.len(), cloud.spacing());
    Ok(())
}
