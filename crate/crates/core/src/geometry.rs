//! Small fixed-size linear algebra used by the deformation code.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point (or vector) in continuous image coordinates, in pixels.
///
/// Pixel `(x, y)` has its center at integer coordinates; `y` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn dot(self, rhs: Self) -> f64 {
        self.x * rhs.x + self.y * rhs.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// `(x, y)⊥ = (-y, x)`.
    #[inline]
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Row vector times matrix: `[x y] · M`.
    #[inline]
    pub fn mul_mat(self, m: &Mat2) -> Self {
        Point2::new(
            self.x * m.m11 + self.y * m.m21,
            self.x * m.m12 + self.y * m.m22,
        )
    }

    /// Unit vector at `degrees`, measured from +x toward +y.
    pub fn from_angle_deg(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Point2::new(c, s)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Self {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: Point2) -> Point2 {
        Point2::new(self * rhs.x, self * rhs.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// 2x2 matrix.
///
/// | m11  m12 |
/// | m21  m22 |
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    /// Matrix whose rows are `r1` and `r2`.
    #[inline]
    pub fn from_rows(r1: Point2, r2: Point2) -> Self {
        Mat2 {
            m11: r1.x,
            m12: r1.y,
            m21: r2.x,
            m22: r2.y,
        }
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Mat2 {
            m11: self.m11,
            m12: self.m21,
            m21: self.m12,
            m22: self.m22,
        }
    }

    #[inline]
    pub fn matmul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2 {
            m11: s * self.m11,
            m12: s * self.m12,
            m21: s * self.m21,
            m22: s * self.m22,
        }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Solves `M · x = b` for a column vector `x`. `None` when singular.
    pub fn solve(&self, b: Point2) -> Option<Point2> {
        let det = self.det();
        if det.abs() < 1e-300 || !det.is_finite() {
            return None;
        }
        Some(Point2::new(
            (self.m22 * b.x - self.m12 * b.y) / det,
            (self.m11 * b.y - self.m21 * b.x) / det,
        ))
    }
}
