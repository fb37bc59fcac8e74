use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::{triangle_area, Point};

/// Points drawn uniformly by area from a triangle surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SurfaceSampleCloud {
    pub points: Vec<Point>,
    /// Index of the face each point was drawn from.
    pub source_face: Vec<usize>,
    /// Samples per unit area.
    pub density: f64,
}

impl SurfaceSampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Typical distance between neighbouring samples, `sqrt(1 / density)`.
    pub fn spacing(&self) -> f64 {
        if self.density > 0.0 {
            (1.0 / self.density).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Draws `n` area-uniform samples from `mesh`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfaceSampleCloud> {
    let tris: Vec<[Point; 3]> = mesh.triangles().collect();
    sample_triangles(&tris, n, seed)
}

/// Area-uniform sampling over an explicit triangle list; `source_face`
/// indexes into `tris`.
pub fn sample_triangles(tris: &[[Point; 3]], n: usize, seed: u64) -> Result<SurfaceSampleCloud> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for [a, b, c] in tris {
        total += triangle_area(a, b, c);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut source_face = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random::<f64>() * total;
        let face = cdf.partition_point(|&c| c <= t).min(tris.len() - 1);
        // Skip zero-area faces that a boundary draw could land on.
        let face = if face > 0 && cdf[face] == cdf[face - 1] {
            cdf.partition_point(|&c| c < cdf[face]).min(tris.len() - 1)
        } else {
            face
        };
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = tris[face];
        points.push(a + (b - a) * u + (c - a) * v);
        source_face.push(face);
    }
    Ok(SurfaceSampleCloud {
        points,
        source_face,
        density: n as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geom::closest_point_on_triangle;

    fn cube_face_of(p: &Point) -> usize {
        let eps = 1e-12;
        for axis in 0..3 {
            if p[axis].abs() < eps {
                return 2 * axis;
            }
            if (p[axis] - 1.0).abs() < eps {
                return 2 * axis + 1;
            }
        }
        unreachable!("point {p:?} not on the cube")
    }

    #[test]
    fn cube_faces_are_balanced() {
        let cube = fixtures::unit_cube();
        let cloud = sample_surface(&cube, 6000, 7).unwrap();
        let mut counts = [0usize; 6];
        for p in &cloud.points {
            counts[cube_face_of(p)] += 1;
        }
        // Multinomial with p = 1/6: sigma = sqrt(n p (1-p)).
        let sigma = (6000.0 * (1.0 / 6.0) * (5.0 / 6.0f64)).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn area_fraction_converges() {
        let cube = fixtures::unit_cube();
        let n = 100_000;
        let cloud = sample_surface(&cube, n, 1).unwrap();
        let mut counts = [0usize; 6];
        for p in &cloud.points {
            counts[cube_face_of(p)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let l = fixtures::l_prism();
        let a = sample_surface(&l, 1, 99).unwrap();
        let b = sample_surface(&l, 1, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn points_lie_on_source_face() {
        let l = fixtures::l_prism();
        let cloud = sample_surface(&l, 500, 3).unwrap();
        for (p, &f) in cloud.points.iter().zip(&cloud.source_face) {
            let [a, b, c] = l.triangle(f);
            assert!((closest_point_on_triangle(p, &a, &b, &c) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn degenerate_mesh_is_empty() {
        let p = Point::new(0.0, 0.0, 0.0);
        let q = Point::new(1.0, 0.0, 0.0);
        let m = TriangleMesh::new(vec![p, q, Point::new(2.0, 0.0, 0.0)], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_surface(&m, 10, 0), Err(Error::EmptyMesh)));
    }
}
