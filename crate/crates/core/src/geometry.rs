//! Planar geometry shared by every other module: vectors, oriented
//! rectangles, the separating-axis overlap test and simple polygons.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest rectangle area treated as non-degenerate (square meters).
pub const MIN_BOX_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
}

/// A 2-vector in meters (or a dimensionless direction).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const X: Vec2 = Vec2 { x: 1.0, y: 0.0 };
    pub const Y: Vec2 = Vec2 { x: 0.0, y: 1.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Rotate +90 degrees (counterclockwise).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Angle of this vector in radians, in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rectangle with a center, a unit heading and half extents measured along
/// (heading, left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: Vec2,
    pub half_extents: Vec2,
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: Vec2, half_extents: Vec2) -> Self {
        Self {
            center,
            heading,
            half_extents,
        }
    }

    /// Corners in counterclockwise order starting at front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let f = self.heading * self.half_extents.x;
        let l = self.heading.perp() * self.half_extents.y;
        let c = self.center;
        [c + f + l, c - f + l, c - f - l, c + f - l]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.x * self.half_extents.y
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        let ok = self.center.is_finite()
            && self.heading.is_finite()
            && (self.heading.norm() - 1.0).abs() < 1e-6
            && self.half_extents.x > 0.0
            && self.half_extents.y > 0.0
            && self.area() > MIN_BOX_AREA;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::DegenerateBox(format!("{self:?}")))
        }
    }
}

/// Checks that four corners describe a box with positive area.
pub fn check_corners(corners: &[Vec2; 4]) -> Result<(), GeometryError> {
    if corners.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::DegenerateBox("non-finite corner".into()));
    }
    if polygon_area(corners).abs() <= MIN_BOX_AREA {
        return Err(GeometryError::DegenerateBox(format!("{corners:?}")));
    }
    Ok(())
}

fn projection_range(corners: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    corners
        .iter()
        .map(|c| c.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        })
}

/// Separating-axis test over the four edge normals. Touching rectangles
/// (zero-width separation) count as overlapping.
pub fn obb_overlap(a: &OrientedRect, b: &OrientedRect) -> Result<bool, GeometryError> {
    a.check()?;
    b.check()?;
    let ca = a.corners();
    let cb = b.corners();
    let axes = [a.heading, a.heading.perp(), b.heading, b.heading.perp()];
    for axis in axes {
        let (amin, amax) = projection_range(&ca, axis);
        let (bmin, bmax) = projection_range(&cb, axis);
        if amax < bmin || bmax < amin {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Signed shoelace area (positive for counterclockwise order).
pub fn polygon_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (shared endpoints and collinear overlap
/// count).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True when the closed polygon has at least three vertices, non-zero area
/// and no two non-adjacent edges touch.
pub fn is_simple_polygon(points: &[Vec2]) -> bool {
    let n = points.len();
    if n < 3 || points.iter().any(|p| !p.is_finite()) {
        return false;
    }
    if polygon_area(points).abs() <= MIN_BOX_AREA {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (points[i], points[(i + 1) % n]);
        if a1 == a2 {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (points[j], points[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test. Points exactly on an edge count as inside.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if orientation(a, b, p) == 0.0 && on_segment(a, b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
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

    fn unit_square(cx: f64, cy: f64) -> OrientedRect {
        OrientedRect::new(Vec2::new(cx, cy), Vec2::X, Vec2::new(0.5, 0.5))
    }

    #[test]
    fn identical_rects_overlap() {
        let a = unit_square(0.0, 0.0);
        assert!(obb_overlap(&a, &a).unwrap());
    }

    #[test]
    fn separated_unit_squares() {
        assert!(!obb_overlap(&unit_square(0.0, 0.0), &unit_square(3.0, 0.0)).unwrap());
    }

    #[test]
    fn touching_counts_as_overlap() {
        assert!(obb_overlap(&unit_square(0.0, 0.0), &unit_square(1.0, 0.0)).unwrap());
    }

    #[test]
    fn degenerate_rect_rejected() {
        let bad = OrientedRect::new(Vec2::ZERO, Vec2::X, Vec2::new(0.0, 1.0));
        assert!(matches!(
            obb_overlap(&bad, &unit_square(0.0, 0.0)),
            Err(GeometryError::DegenerateBox(_))
        ));
    }

    #[test]
    fn rotated_diamond_misses_corner() {
        // 45 degree square whose tip stops short of the axis-aligned square
        let h = Vec2::new(1.0, 1.0).normalized().unwrap();
        let d = OrientedRect::new(Vec2::new(1.0 + 0.5 * 2f64.sqrt() + 0.01, 0.0), h, Vec2::new(0.5, 0.5));
        assert!(!obb_overlap(&unit_square(0.5, 0.0), &d).unwrap());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bowtie = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(!is_simple_polygon(&bowtie));
        let square = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(is_simple_polygon(&square));
    }

    #[test]
    fn point_in_square() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        assert!(point_in_polygon(Vec2::new(1.0, 1.0), &sq));
        assert!(point_in_polygon(Vec2::new(2.0, 1.0), &sq));
        assert!(!point_in_polygon(Vec2::new(2.5, 1.0), &sq));
    }

    #[test]
    fn corners_are_ccw() {
        let r = unit_square(0.0, 0.0);
        assert!(polygon_area(&r.corners()) > 0.0);
        assert!((polygon_area(&r.corners()) - r.area()).abs() < 1e-12);
    }
}
