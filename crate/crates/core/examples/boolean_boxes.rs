//! Cutting a mesh with boxes: intersection and difference stay watertight
//! and conserve volume.

use regacd::boolean::{boolean_difference_boxes, boolean_intersect_box};
use regacd::{fixtures, Aabb};

fn main() -> regacd::Result<()> {
    let mesh = fixtures::dumbbell();
    let bx = Aabb::from_arrays([-1.0, -1.0, 0.8], [1.0, 1.0, 2.2])?;
    let inside = boolean_intersect_box(&mesh, &bx)?.expect("box overlaps the bar");
    let outside = boolean_difference_boxes(&mesh, &[bx])?.expect("lobes remain");
    println!("input   {:.6}", mesh.volume()?);
    println!("inside  {:.6} watertight {}", inside.volume()?, inside.is_watertight());
    println!("outside {:.6} watertight {}, {} solids", outside.volume()?, outside.is_watertight(), outside.solids().len());
    println!("sum     {:.6}", inside.volume()? + outside.volume()?);
    Ok(())
}
