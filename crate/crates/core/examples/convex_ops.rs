//! Hulls, plane splits, GJK distance and pairwise merging.

use nalgebra::Isometry3;
use regacd::convex::{gjk_distance, merge_pair, split_by_plane};
use regacd::{convex_hull, fixtures, ConvexPart, Plane, Point, Vector};

fn main() -> regacd::Result<()> {
    let sphere = fixtures::icosphere(2, 1.0);
    let hull = convex_hull(sphere.vertices())?;
    println!("icosphere hull: {} vertices, volume {:.4}", hull.vertices().len(), hull.volume());

    let plane = Plane::new(Vector::new(1.0, 1.0, 0.0).normalize(), 0.3)?;
    let (inside, outside) = split_by_plane(&hull, &plane);
    let vi = inside.as_ref().map_or(0.0, |p| p.volume());
    let vo = outside.as_ref().map_or(0.0, |p| p.volume());
    println!("split: {vi:.4} + {vo:.4} = {:.4}", vi + vo);

    let cube = ConvexPart::from_mesh(&fixtures::unit_cube())?;
    let far = Isometry3::translation(2.5, 0.0, 0.0);
    println!("cube to cube, 1.5 apart: {:.6}", gjk_distance(&cube, &Isometry3::identity(), &cube, &far)?);

    let shifted: Vec<Point> = cube.vertices().iter().map(|v| v + Vector::new(1.2, 0.0, 0.0)).collect();
    let (merged, err) = merge_pair(&cube, &convex_hull(&shifted)?)?;
    println!("merged volume {:.3}, added volume {:.3}", merged.volume(), err);
    Ok(())
}
