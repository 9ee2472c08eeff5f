//! Rigid-body transforms and the calibrated chain that maps spherical
//! sampling coordinates onto executable probe poses.
//!
//! Rotations are stored as full 3x3 matrices (every transform in the
//! measurement chain is written in matrix form), with an explicit
//! re-orthonormalization pass available to bound drift over long
//! composition chains. Angles are radians everywhere in memory; degrees
//! appear only at file and CLI boundaries.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

/// Validation tolerance for rotation matrices: max |R^T R - I| entry.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("non-finite input value")]
    NonFinite,
    #[error("radius must be > 0 (got {0})")]
    NonPositiveRadius(f64),
    #[error("polar angle must lie in [0, pi/2] (got {0} rad)")]
    ThetaOutOfRange(f64),
    #[error("matrix is not a proper rotation (orthonormality error {0:.3e})")]
    NotOrthonormal(f64),
    #[error("probe origin coincides with the target position")]
    ZeroSeparation,
}

// Small fixed-size vector helpers shared across the crate.
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    scale(a, 1.0 / n)
}

/// A proper rotation: orthonormal 3x3 matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Wraps a matrix after checking orthonormality and determinant
    /// against [`ROTATION_TOL`].
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeomError> {
        let r = Self { m };
        let err = r.orthonormality_error().max((r.determinant() - 1.0).abs());
        if !err.is_finite() || err > ROTATION_TOL {
            return Err(GeomError::NotOrthonormal(err));
        }
        Ok(r)
    }

    /// Wraps a matrix the caller already knows to be a proper rotation.
    pub fn from_matrix_unchecked(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        }
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        }
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        let m = self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max-entry deviation of R^T R from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let rt = self.transpose();
        let p = rt * *self;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.m[i][j] - target).abs());
            }
        }
        worst
    }

    /// Gram-Schmidt pass to pull a drifted matrix back onto SO(3).
    pub fn renormalized(&self) -> Self {
        let c0 = [self.m[0][0], self.m[1][0], self.m[2][0]];
        let c1 = [self.m[0][1], self.m[1][1], self.m[2][1]];
        let u0 = normalize(c0);
        let u1 = normalize(sub(c1, scale(u0, dot(c1, u0))));
        let u2 = cross(u0, u1);
        Self {
            m: [
                [u0[0], u1[0], u2[0]],
                [u0[1], u1[1], u2[1]],
                [u0[2], u1[2], u2[2]],
            ],
        }
    }

    /// Geodesic distance to another rotation, in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let rel = self.transpose() * *other;
        let t = rel.m[0][0] + rel.m[1][1] + rel.m[2][2];
        ((t - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * rhs.m[0][j]
                    + self.m[i][1] * rhs.m[1][j]
                    + self.m[i][2] * rhs.m[2][j];
            }
        }
        Self { m }
    }
}

/// Rigid transform: rotation followed by translation, `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Self = Self {
        rotation: Rotation::IDENTITY,
        translation: [0.0, 0.0, 0.0],
    };

    pub fn new(rotation: Rotation, translation: [f64; 3]) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: [f64; 3]) -> Self {
        Self {
            rotation: Rotation::IDENTITY,
            translation,
        }
    }

    /// Homogeneous-matrix product `self * other` (other applied first).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: add(self.rotation.apply(other.translation), self.translation),
        }
    }

    /// Inverse transform: `(R, t)^-1 = (R^T, -R^T t)`.
    pub fn invert(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: scale(rt.apply(self.translation), -1.0),
        }
    }

    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        add(self.rotation.apply(p), self.translation)
    }
}

impl std::ops::Mul for Pose {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

/// Z-Y-X intrinsic Euler angles: yaw about z, then pitch about the new y,
/// then roll about the new x. Stored normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyx {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        w = PI;
    }
    w
}

impl EulerZyx {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self {
            yaw: wrap_angle(yaw),
            pitch: wrap_angle(pitch),
            roll: wrap_angle(roll),
        }
    }
}

/// Composite rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to_rotation(e: EulerZyx) -> Result<Rotation, GeomError> {
    if !(e.yaw.is_finite() && e.pitch.is_finite() && e.roll.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    Ok(Rotation::rot_z(e.yaw) * Rotation::rot_y(e.pitch) * Rotation::rot_x(e.roll))
}

/// One commanded sampling direction and distance: azimuth, polar angle
/// from the vertical, and radius. Azimuth is normalized to [0, 2pi);
/// the polar angle must stay on the upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    phi: f64,
    theta: f64,
    r: f64,
}

impl SphericalCoord {
    pub fn new(phi: f64, theta: f64, r: f64) -> Result<Self, GeomError> {
        if !(phi.is_finite() && theta.is_finite() && r.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if r <= 0.0 {
            return Err(GeomError::NonPositiveRadius(r));
        }
        if !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
            return Err(GeomError::ThetaOutOfRange(theta));
        }
        Ok(Self {
            phi: phi.rem_euclid(TAU),
            theta: theta.min(PI / 2.0),
            r,
        })
    }

    pub fn from_degrees(phi_deg: f64, theta_deg: f64, r: f64) -> Result<Self, GeomError> {
        Self::new(phi_deg.to_radians(), theta_deg.to_radians(), r)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi.to_degrees()
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    /// Unit direction from the sphere centre toward this sample.
    pub fn direction(&self) -> [f64; 3] {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Spherical sampling transform: rotation `Rz(phi) * Ry(-theta)` and
/// translation `r * (sin t cos p, sin t sin p, cos t)`. The negative
/// y-rotation matches the upward-facing flange convention of the
/// measurement chain.
pub fn sphere_transform(s: SphericalCoord) -> Pose {
    let rotation = Rotation::rot_z(s.phi) * Rotation::rot_y(-s.theta);
    Pose {
        rotation,
        translation: scale(s.direction(), s.r),
    }
}

/// Executable probe pose for one sampling coordinate:
/// `T_base * T_sphere(phi, theta, r) * T_offset`.
///
/// With a zero-translation offset the result sits exactly at distance `r`
/// from the base origin, which is what pins the measurement radius.
pub fn final_pose(t_base: &Pose, s: SphericalCoord, t_offset: &Pose) -> Pose {
    t_base.compose(&sphere_transform(s)).compose(t_offset)
}

/// Angle between the probe's boresight (a unit axis in the end-effector
/// frame) and the ray from the probe origin to `target`, in [0, pi].
pub fn pointing_error(
    probe: &Pose,
    target: [f64; 3],
    boresight_axis: [f64; 3],
) -> Result<f64, GeomError> {
    let to_target = sub(target, probe.translation);
    let d = norm(to_target);
    if d < 1e-12 {
        return Err(GeomError::ZeroSeparation);
    }
    let look = probe.rotation.apply(boresight_axis);
    let c = dot(look, to_target) / (d * norm(look));
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Default probe boresight in the end-effector frame: -z, so the pole
/// pose (theta = 0) looks straight down at the device under test. A
/// defined convention of this simulator, not a hardware inference.
pub const DEFAULT_BORESIGHT: [f64; 3] = [0.0, 0.0, -1.0];
