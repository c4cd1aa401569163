//! Planar vectors, 2×2 matrices and triangle helpers.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Planar value: a position (m), velocity (m/s) or acceleration (m/s²)
/// depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `deg` degrees counter-clockwise from +X.
    pub fn from_heading_deg(deg: f64) -> Self {
        let rad = deg.to_radians();
        Self::new(libm::cos(rad), libm::sin(rad))
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rescales the vector so its norm does not exceed `limit`.
    pub fn clamp_norm(self, limit: f64) -> Vec2 {
        let n = self.norm();
        if n > limit && n > 0.0 {
            self * (limit / n)
        } else {
            self
        }
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mat2 {
    pub rows: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        rows: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self {
            rows: [[m11, m12], [m21, m22]],
        }
    }

    pub const fn scalar(s: f64) -> Self {
        Self::new(s, 0.0, 0.0, s)
    }

    /// Matrix whose columns are `c1` and `c2`.
    pub const fn from_columns(c1: Vec2, c2: Vec2) -> Self {
        Self::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn rotation(angle_rad: f64) -> Self {
        let (s, c) = (libm::sin(angle_rad), libm::cos(angle_rad));
        Self::new(c, -s, s, c)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col]
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.rows;
        a * d - b * c
    }

    pub fn transpose(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.rows;
        Mat2::new(a, c, b, d)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let [[a, b], [c, d]] = self.rows;
        Some(Mat2::new(d / det, -b / det, -c / det, a / det))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// Largest absolute element difference to `other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.rows;
        Vec2::new(a * v.x + b * v.y, c * v.x + d * v.y)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let [[a, b], [c, d]] = self.rows;
        let [[e, f], [g, h]] = o.rows;
        Mat2::new(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let [[a, b], [c, d]] = self.rows;
        Mat2::new(a * s, b * s, c * s, d * s)
    }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn signed_area2(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

pub fn triangle_area(tri: &[Vec2; 3]) -> f64 {
    0.5 * libm::fabs(signed_area2(tri[0], tri[1], tri[2]))
}

pub fn centroid(tri: &[Vec2; 3]) -> Vec2 {
    (tri[0] + tri[1] + tri[2]) / 3.0
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * s)
}

/// Whether `p` is inside the closed triangle.
pub fn point_in_triangle(p: Vec2, tri: &[Vec2; 3]) -> bool {
    let orient = signed_area2(tri[0], tri[1], tri[2]).signum();
    (0..3).all(|i| {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        signed_area2(a, b, p) * orient >= 0.0
    })
}

/// Distance from `p` to the triangle boundary, positive inside and negative
/// outside.
pub fn signed_distance_to_triangle(p: Vec2, tri: &[Vec2; 3]) -> f64 {
    let d = (0..3)
        .map(|i| point_segment_distance(p, tri[i], tri[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min);
    if point_in_triangle(p, tri) {
        d
    } else {
        -d
    }
}
