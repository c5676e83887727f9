//! Plane-to-plane perspective transform from four point pairs.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// 3x3 matrix acting on row vectors, `[x' y' w'] = [x y 1] M`, with the
/// bottom-right entry fixed to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerspectiveMatrix(Matrix3<f64>);

impl PerspectiveMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m[(2, 2)].abs() < 1e-15 {
            return Err(Error::DegenerateConfiguration("bottom-right entry is zero".into()));
        }
        let m = m / m[(2, 2)];
        if m.determinant().abs() <= 1e-12 {
            return Err(Error::DegenerateConfiguration("singular perspective matrix".into()));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.0.try_inverse().ok_or_else(|| Error::DegenerateConfiguration("not invertible".into()))?;
        Self::new(inv)
    }
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn check_general_position(pts: &[Point2; 4], what: &str) -> Result<()> {
    let scale = pts.iter().map(|p| (p - pts[0]).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateConfiguration(format!("{what} points coincide")));
    }
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if cross(&pts[i], &pts[j], &pts[k]).abs() <= 1e-12 * scale * scale {
            return Err(Error::DegenerateConfiguration(format!("three {what} points are collinear")));
        }
    }
    Ok(())
}

/// Fit the transform taking each `src[i]` to `dst[i]`.
pub fn solve_perspective(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<PerspectiveMatrix> {
    check_general_position(src, "source")?;
    check_general_position(dst, "target")?;
    // unknowns: m11 m12 m13 m21 m22 m23 m31 m32
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let (x, y) = (src[i].x, src[i].y);
        let (u, v) = (dst[i].x, dst[i].y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[x, 0.0, -u * x, y, 0.0, -u * y, 1.0, 0.0]);
        b[r] = u;
        a.row_mut(r + 1).copy_from_slice(&[0.0, x, -v * x, 0.0, y, -v * y, 0.0, 1.0]);
        b[r + 1] = v;
    }
    let sol = a.lu().solve(&b).ok_or_else(|| Error::DegenerateConfiguration("singular point configuration".into()))?;
    let m = Matrix3::new(sol[0], sol[1], sol[2], sol[3], sol[4], sol[5], sol[6], sol[7], 1.0);
    PerspectiveMatrix::new(m)
}

/// Map a point, dividing by the homogeneous coordinate.
pub fn project(p: &Point2, m: &PerspectiveMatrix) -> Result<Point2> {
    let m = &m.0;
    let x = p.x * m[(0, 0)] + p.y * m[(1, 0)] + m[(2, 0)];
    let y = p.x * m[(0, 1)] + p.y * m[(1, 1)] + m[(2, 1)];
    let w = p.x * m[(0, 2)] + p.y * m[(1, 2)] + m[(2, 2)];
    if w.abs() < 1e-12 * (x.abs() + y.abs()).max(1.0) {
        return Err(Error::PointAtInfinity);
    }
    Ok(Point2::new(x / w, y / w))
}
