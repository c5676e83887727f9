//! Points, quaternions and rigid transforms.
//!
//! Point clouds use the sensor convention x forward, y up, z right. The world
//! frame shares it: world `X` is east, `Y` is up, and `Z` points south, so a
//! planar position `(x, y)` lives at `(x, height, -y)` and a planar heading
//! `psi` (counter-clockwise from east) is a rotation of `psi` about `+Y`.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;
pub type Point2 = Vector2<f64>;

/// Tolerance within which a quaternion is silently renormalized.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Quaternion with vector part `(x, y, z)` and scalar part `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    /// Renormalize when within [`UNIT_TOLERANCE`] of unit length, reject otherwise.
    pub fn to_unit(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidInput(format!("quaternion norm {n} is not unit")));
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n, self.w / n))
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(axis.x * s, axis.y * s, axis.z * s, c)
    }

    /// Rotation vector (axis scaled by angle).
    pub fn from_rotation_vector(v: Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            // second-order accurate near zero
            let q = Self::new(0.5 * v.x, 0.5 * v.y, 0.5 * v.z, 1.0);
            let n = q.norm();
            return Self::new(q.x / n, q.y / n, q.z / n, q.w / n);
        }
        Self::from_axis_angle(v / angle, angle)
    }

    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = if self.w < 0.0 { self.negated() } else { *self };
        let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if s < 1e-12 {
            return Vector3::new(2.0 * q.x, 2.0 * q.y, 2.0 * q.z);
        }
        let angle = 2.0 * s.atan2(q.w);
        Vector3::new(q.x, q.y, q.z) * (angle / s)
    }

    /// Rotation about the vertical `+Y` axis.
    pub fn from_yaw(psi: f64) -> Self {
        Self::from_axis_angle(Vector3::y(), psi)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, self.w)
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, -self.w)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    /// Hamilton product `self * rhs` (apply `rhs` first).
    pub fn mul(&self, r: &Self) -> Self {
        let (a, b) = (self, r);
        Self::new(
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        )
    }

    /// Spherical interpolation; `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn slerp(&self, other: &Self, t: f64) -> Self {
        if t == 0.0 {
            return *self;
        }
        if t == 1.0 {
            return *other;
        }
        let mut o = *other;
        let mut d = self.dot(&o);
        if d < 0.0 {
            o = o.negated();
            d = -d;
        }
        let (wa, wb) = if d > 0.9995 {
            (1.0 - t, t)
        } else {
            let theta = d.clamp(-1.0, 1.0).acos();
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        let q = Self::new(
            wa * self.x + wb * o.x,
            wa * self.y + wb * o.y,
            wa * self.z + wb * o.z,
            wa * self.w + wb * o.w,
        );
        let n = q.norm();
        Self::new(q.x / n, q.y / n, q.z / n, q.w / n)
    }

    /// Heading about `+Y`, assuming the rotation is (close to) a pure yaw.
    pub fn yaw(&self) -> f64 {
        let r = rotation_unchecked(self);
        // image of the forward axis, projected to the plane
        wrap_angle((-r[(2, 0)]).atan2(r[(0, 0)]))
    }
}

/// Orthonormal 3x3 rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub Matrix3<f64>);

impl RotationMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.0 * p
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(self.0.transpose())
    }
}

fn rotation_unchecked(q: &Quaternion) -> Matrix3<f64> {
    let (x, y, z, w) = (q.x, q.y, q.z, q.w);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Rotation matrix of a unit quaternion.
pub fn quat_to_rotation(q: &Quaternion) -> Result<RotationMatrix> {
    let q = q.to_unit()?;
    Ok(RotationMatrix(rotation_unchecked(&q)))
}

/// Rigid transform mapping points of a local frame into a parent frame:
/// `p_parent = R * p_local + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseTransform {
    pub translation: Vector3<f64>,
    rotation: Quaternion,
}

impl PoseTransform {
    pub const IDENTITY: PoseTransform = PoseTransform {
        translation: Vector3::new(0.0, 0.0, 0.0),
        rotation: Quaternion::IDENTITY,
    };

    pub fn new(translation: Vector3<f64>, rotation: Quaternion) -> Result<Self> {
        if !(translation.x.is_finite() && translation.y.is_finite() && translation.z.is_finite()) {
            return Err(Error::InvalidInput("non-finite translation".into()));
        }
        Ok(Self { translation, rotation: rotation.to_unit()? })
    }

    /// Build from the seven-component form `[t_x, t_y, t_z, x, y, z, w]`.
    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        Self::new(Vector3::new(v[0], v[1], v[2]), Quaternion::new(v[3], v[4], v[5], v[6]))
    }

    pub fn to_array(&self) -> [f64; 7] {
        let t = self.translation;
        let q = self.rotation;
        [t.x, t.y, t.z, q.x, q.y, q.z, q.w]
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self { translation: t, rotation: Quaternion::IDENTITY }
    }

    pub fn from_rotation_vector(rotvec: Vector3<f64>, t: Vector3<f64>) -> Self {
        Self { translation: t, rotation: Quaternion::from_rotation_vector(rotvec) }
    }

    /// Sensor pose at planar position `(x, y)`, heading `psi`, mounted at `height`.
    pub fn from_planar(x: f64, y: f64, psi: f64, height: f64) -> Self {
        Self { translation: Vector3::new(x, height, -y), rotation: Quaternion::from_yaw(psi) }
    }

    /// Planar `(x, y, psi)` of this pose.
    pub fn planar(&self) -> (f64, f64, f64) {
        (self.translation.x, -self.translation.z, self.rotation.yaw())
    }

    pub fn rotation(&self) -> Quaternion {
        self.rotation
    }

    pub fn rotation_matrix(&self) -> RotationMatrix {
        RotationMatrix(rotation_unchecked(&self.rotation))
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation_matrix().apply(p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rinv = self.rotation.conjugate();
        let t = -(RotationMatrix(rotation_unchecked(&rinv)).apply(&self.translation));
        Self { translation: t, rotation: rinv }
    }
}

/// `compose(a, b)` applies `b` first, then `a`.
pub fn compose(a: &PoseTransform, b: &PoseTransform) -> PoseTransform {
    let q = a.rotation.mul(&b.rotation);
    let n = q.norm();
    PoseTransform {
        translation: a.apply(&b.translation),
        rotation: Quaternion::new(q.x / n, q.y / n, q.z / n, q.w / n),
    }
}

/// Express a point observed in frame `k` in frame `hat`, where both poses map
/// their local frame into the common world frame.
pub fn transfer_point(x: &Point3, t_k: &PoseTransform, t_hat: &PoseTransform) -> Point3 {
    let world = t_k.apply(x);
    t_hat.rotation_matrix().transpose().apply(&(world - t_hat.translation))
}

/// Planar projection of a sensor-frame point: `(forward, left)`.
pub fn to_plane(p: &Point3) -> Point2 {
    Point2::new(p.x, -p.z)
}

/// Lift a planar `(x, y)` at the given vertical coordinate.
pub fn from_plane(p: &Point2, up: f64) -> Point3 {
    Point3::new(p.x, up, -p.y)
}
