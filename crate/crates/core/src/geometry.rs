//! Planar primitives used by the motion models: points, simple polygons,
//! shoelace area, boundary-inclusive containment and polygonisation of a
//! parametric boundary curve.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position or 2D vector in SI units (metres, or metres per second for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector at angle `phi` (radians, counter-clockwise from +x).
    #[inline]
    pub fn from_angle(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Point2 { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// Cosines and sines of `n` evenly spaced angles `2πk/n`, shared by every
/// polygonisation with the same vertex count.
#[derive(Debug, Clone)]
pub struct AngleTable {
    dirs: Vec<Point2>,
}

impl AngleTable {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        let dirs = (0..n)
            .map(|k| Point2::from_angle(TAU * k as f64 / n as f64))
            .collect();
        Ok(AngleTable { dirs })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.dirs.len() as f64
    }

    /// Unit direction vectors, in order of increasing angle.
    pub fn directions(&self) -> &[Point2] {
        &self.dirs
    }
}

/// Simple polygon with counter-clockwise vertex order; the closing edge from
/// the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Builds a polygon, reversing clockwise input so the signed area is non-negative.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteVertex(i));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Polygon { vertices })
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn contains(&self, q: Point2) -> bool {
        point_in_polygon(q, self)
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }
}

impl TryFrom<Vec<Point2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

/// Shoelace area, positive for counter-clockwise vertex order.
///
/// Coordinates are taken relative to the first vertex, which keeps the
/// cross products small for polygons far from the origin.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let origin = vertices[0];
    let mut twice = 0.0;
    let mut prev = vertices[1] - origin;
    for v in &vertices[2..] {
        let cur = *v - origin;
        twice += prev.cross(cur);
        prev = cur;
    }
    0.5 * twice
}

/// Surface area of a vertex ring in square metres.
pub fn polygon_area(vertices: &[Point2]) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(Error::TooFewVertices(vertices.len()));
    }
    Ok(signed_area(vertices).abs())
}

#[inline]
fn on_segment(q: Point2, a: Point2, b: Point2) -> bool {
    (b - a).cross(q - a) == 0.0
        && q.x >= a.x.min(b.x)
        && q.x <= a.x.max(b.x)
        && q.y >= a.y.min(b.y)
        && q.y <= a.y.max(b.y)
}

/// Boundary-inclusive containment test.
///
/// Points lying exactly on an edge or vertex are inside; everything else is
/// decided by the winding number, which is non-zero exactly for interior
/// points of a simple polygon of either orientation.
pub fn point_in_polygon(q: Point2, p: &Polygon) -> bool {
    let vs = &p.vertices;
    let mut winding = 0i32;
    let mut a = vs[vs.len() - 1];
    for &b in vs {
        if on_segment(q, a, b) {
            return true;
        }
        let side = (b - a).cross(q - a);
        if a.y <= q.y {
            if b.y > q.y && side > 0.0 {
                winding += 1;
            }
        } else if b.y <= q.y && side < 0.0 {
            winding -= 1;
        }
        a = b;
    }
    winding != 0
}

/// Samples a boundary curve at `n` evenly spaced angles `2πk/n` and returns
/// the resulting polygon. Zero-area results (e.g. a curve collapsed to a
/// point) are rejected.
pub fn boundary_polygon<F>(f: F, n: usize) -> Result<Polygon>
where
    F: FnMut(f64) -> Point2,
{
    let table = AngleTable::new(n)?;
    boundary_polygon_with(f, &table)
}

/// Same as [`boundary_polygon`] with a precomputed angle table.
pub fn boundary_polygon_with<F>(mut f: F, table: &AngleTable) -> Result<Polygon>
where
    F: FnMut(f64) -> Point2,
{
    let vertices: Vec<Point2> = (0..table.len()).map(|k| f(table.angle(k))).collect();
    let poly = Polygon::new(vertices)?;
    let area = poly.area();
    if !(area > 0.0) {
        return Err(Error::Degenerate(format!("zero-area polygon, area {area}")));
    }
    Ok(poly)
}

/// Regular polygon with vertices on a circle; vertex `k` sits at angle `2πk/n`.
pub(crate) fn circle_polygon(center: Point2, radius: f64, table: &AngleTable) -> Result<Polygon> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Degenerate(format!("circle radius {radius}")));
    }
    if !center.is_finite() {
        return Err(Error::NonFiniteVertex(0));
    }
    let vertices = table
        .directions()
        .iter()
        .map(|&u| center + u * radius)
        .collect();
    Ok(Polygon::from_ccw_unchecked(vertices))
}
