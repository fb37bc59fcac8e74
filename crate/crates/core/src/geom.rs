//! Small geometric primitives shared by every module: points, planes,
//! axis-aligned boxes and triangle helpers.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

/// Oriented plane `normal · x = offset`.
///
/// A point is *inside* when `normal · x <= offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vector,
    offset: f64,
}

impl Plane {
    /// Builds a plane from any non-zero normal; the normal is normalized and
    /// the offset rescaled accordingly.
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidParams(format!(
                "plane normal must be finite and non-zero, got {normal:?}"
            )));
        }
        Ok(Plane {
            normal: normal / len,
            offset: offset / len,
        })
    }

    pub fn through_point(normal: Vector, point: &Point) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) {
            return Err(Error::InvalidParams("zero plane normal".into()));
        }
        let n = normal / len;
        Ok(Plane {
            normal: n,
            offset: n.dot(&point.coords),
        })
    }

    /// Axis-aligned plane. `sign` selects the normal direction (+1 or -1).
    pub fn axis(axis: usize, sign: f64, coordinate: f64) -> Self {
        let mut normal = Vector::zeros();
        let s = if sign < 0.0 { -1.0 } else { 1.0 };
        normal[axis] = s;
        Plane {
            normal,
            offset: s * coordinate,
        }
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Same plane with the halfspaces swapped.
    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// If the normal is a signed coordinate axis, returns `(axis, coordinate)`.
    pub fn as_axis(&self) -> Option<(usize, f64)> {
        let mut found = None;
        for i in 0..3 {
            let c = self.normal[i];
            if c == 1.0 || c == -1.0 {
                found = Some((i, self.offset * c));
            } else if c != 0.0 {
                return None;
            }
        }
        found
    }

    /// Orthogonal projection onto the plane; exact for axis-aligned planes.
    pub fn project(&self, p: &Point) -> Point {
        if let Some((axis, coord)) = self.as_axis() {
            let mut q = *p;
            q[axis] = coord;
            return q;
        }
        p - self.normal * self.signed_distance(p)
    }

    /// Intersection of segment `a`-`b` with the plane. The result is
    /// independent of the argument order, so shared edges get identical points.
    pub fn intersect_segment(&self, a: &Point, b: &Point) -> Point {
        let (a, b) = if lex_less(a, b) { (a, b) } else { (b, a) };
        let sa = self.signed_distance(a);
        let sb = self.signed_distance(b);
        let denom = sa - sb;
        let t = if denom.abs() > 0.0 { sa / denom } else { 0.5 };
        let t = t.clamp(0.0, 1.0);
        self.project(&(a + (b - a) * t))
    }

    /// Two unit vectors spanning the plane with `u × v = normal`.
    pub fn basis(&self) -> (Vector, Vector) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.57 {
            Vector::x()
        } else if n.y.abs() < 0.57 {
            Vector::y()
        } else {
            Vector::z()
        };
        let u = helper.cross(&n).normalize();
        let v = n.cross(&u);
        (u, v)
    }
}

fn lex_less(a: &Point, b: &Point) -> bool {
    for i in 0..3 {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    false
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] <= max[i]);
        if !ok {
            return Err(Error::InvalidParams(format!(
                "invalid box: min {:?} max {:?}",
                min.coords.as_slice(),
                max.coords.as_slice()
            )));
        }
        Ok(Aabb { min, max })
    }

    pub fn from_arrays(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        Aabb::new(Point::from(min), Point::from(max))
    }

    /// Smallest box containing all points. `None` for an empty iterator.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in it {
            b.grow(p);
        }
        Some(b)
    }

    pub fn grow(&mut self, p: &Point) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        b.grow(&other.min);
        b.grow(&other.max);
        b
    }

    pub fn extents(&self) -> Vector {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Closed containment test with the box grown by `slack`.
    pub fn contains_point(&self, p: &Point, slack: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - slack && p[i] <= self.max[i] + slack)
    }

    /// True when `p` is inside the box by more than `margin` on every axis.
    pub fn strictly_contains(&self, p: &Point, margin: f64) -> bool {
        (0..3).all(|i| p[i] > self.min[i] + margin && p[i] < self.max[i] - margin)
    }

    /// Closed overlap test (touching boxes overlap).
    pub fn intersects(&self, other: &Aabb, slack: f64) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] + slack && other.min[i] <= self.max[i] + slack)
    }

    /// True when the interiors overlap by more than `tol` on every axis.
    pub fn interiors_overlap(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] - tol && other.min[i] < self.max[i] - tol)
    }

    pub fn contains_box(&self, other: &Aabb, slack: f64) -> bool {
        self.contains_point(&other.min, slack) && self.contains_point(&other.max, slack)
    }

    /// The six bounding planes with outward normals, ordered -x, +x, -y, +y, -z, +z.
    /// The box is the intersection of their inside halfspaces.
    pub fn planes(&self) -> [Plane; 6] {
        [
            Plane::axis(0, -1.0, self.min.x),
            Plane::axis(0, 1.0, self.max.x),
            Plane::axis(1, -1.0, self.min.y),
            Plane::axis(1, 1.0, self.max.y),
            Plane::axis(2, -1.0, self.min.z),
            Plane::axis(2, 1.0, self.max.z),
        ]
    }

    /// Squared distance from a point to the box (0 inside).
    pub fn distance_squared(&self, p: &Point) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

pub fn triangle_normal_raw(a: &Point, b: &Point, c: &Point) -> Vector {
    (b - a).cross(&(c - a))
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * triangle_normal_raw(a, b, c).norm()
}

/// Unit normal computed from the two edges meeting at the vertex opposite
/// the longest edge, which is the best conditioned choice for thin triangles.
pub fn triangle_unit_normal(a: &Point, b: &Point, c: &Point) -> Option<Vector> {
    let lab = (b - a).norm_squared();
    let lbc = (c - b).norm_squared();
    let lca = (a - c).norm_squared();
    let n = if lab >= lbc && lab >= lca {
        (a - c).cross(&(b - c))
    } else if lbc >= lca {
        (b - a).cross(&(c - a))
    } else {
        (c - b).cross(&(a - b))
    };
    let len = n.norm();
    (len > 0.0 && len.is_finite()).then(|| n / len)
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        let v = if denom != 0.0 { d1 / denom } else { 0.0 };
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        let w = if denom != 0.0 { d2 / denom } else { 0.0 };
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        let w = if denom != 0.0 { (d4 - d3) / denom } else { 0.0 };
        return b + (c - b) * w;
    }
    let sum = va + vb + vc;
    if sum == 0.0 {
        // Degenerate triangle: fall back to the closest of the three edges.
        return [(a, b), (b, c), (c, a)]
            .iter()
            .map(|(s, e)| closest_point_on_segment(p, s, e))
            .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
            .unwrap_or(*a);
    }
    let denom = 1.0 / sum;
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn closest_point_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Orientation of `d` relative to the plane through `a, b, c`: positive when
/// `d` lies on the side the normal `(b-a)×(c-a)` points to. Falls back to an
/// adaptive-precision predicate when the fast result is too small to trust.
pub fn orient3d(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    let fast = triangle_normal_raw(a, b, c).dot(&(d - a));
    if fast.abs() >= 1e-12 {
        return fast;
    }
    let c3 = |p: &Point| robust::Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    };
    // robust::orient3d is positive when d lies below the plane of a, b, c.
    -robust::orient3d(c3(a), c3(b), c3(c), c3(d))
}

/// Signed area of a closed 2D polygon (positive for counter-clockwise).
pub fn polygon_area_2d(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc
}

/// Even-odd point-in-polygon test in 2D.
pub fn point_in_polygon_2d(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_halfspace_convention() {
        let p = Plane::new(Vector::new(2.0, 0.0, 0.0), 1.0).unwrap();
        assert!((p.normal().norm() - 1.0).abs() < 1e-12);
        assert!(p.signed_distance(&Point::new(0.0, 5.0, 5.0)) < 0.0);
        assert!(p.signed_distance(&Point::new(1.0, 0.0, 0.0)) > 0.0);
        assert!(Plane::new(Vector::zeros(), 1.0).is_err());
    }

    #[test]
    fn segment_intersection_is_order_independent() {
        let plane = Plane::new(Vector::new(1.0, 1.0, 1.0), 0.7).unwrap();
        let a = Point::new(0.1, -0.3, 0.2);
        let b = Point::new(0.9, 0.8, 0.4);
        let p = plane.intersect_segment(&a, &b);
        let q = plane.intersect_segment(&b, &a);
        assert_eq!(p, q);
        assert!(plane.signed_distance(&p).abs() < 1e-12);
    }

    #[test]
    fn axis_projection_is_exact() {
        let plane = Plane::axis(1, -1.0, 0.3);
        let q = plane.project(&Point::new(1.0, 0.3000000001, 2.0));
        assert_eq!(q.y, 0.3);
    }

    #[test]
    fn box_planes_bound_the_box() {
        let b = Aabb::from_arrays([0.0, 1.0, 2.0], [1.0, 3.0, 5.0]).unwrap();
        let c = b.center();
        for p in b.planes() {
            assert!(p.signed_distance(&c) < 0.0);
            assert!(p.signed_distance(&b.min) <= 0.0 && p.signed_distance(&b.max) <= 0.0);
        }
        assert!(Aabb::from_arrays([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn closest_point_regions() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        let inside = closest_point_on_triangle(&Point::new(0.2, 0.2, 3.0), &a, &b, &c);
        assert!((inside - Point::new(0.2, 0.2, 0.0)).norm() < 1e-12);
        let vertex = closest_point_on_triangle(&Point::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(vertex, a);
        let edge = closest_point_on_triangle(&Point::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((edge - Point::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn orient3d_sign_matches_normal() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(1.0, 0.0, 0.0);
        let c = Point::new(0.0, 1.0, 0.0);
        assert!(orient3d(&a, &b, &c, &Point::new(0.0, 0.0, 1.0)) > 0.0);
        assert!(orient3d(&a, &b, &c, &Point::new(0.0, 0.0, -1e-30)) < 0.0);
        assert_eq!(orient3d(&a, &b, &c, &Point::new(0.3, 0.3, 0.0)), 0.0);
    }
}
