//! SO(3)/SE(3) kernel: hat/vex, exponential and logarithm maps, adjoints.
//!
//! Twists are stacked angular-first, `[omega; nu]`, matching the body-frame
//! kinematics `g_dot = g * xi^`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle the trigonometric coefficients switch to Taylor series.
const SMALL_ANGLE: f64 = 1e-6;

/// Default absolute tolerance on `||S + S^T||` accepted by [`vex`].
pub const VEX_TOL: f64 = 1e-8;

/// Skew-symmetric cross-product matrix: `hat(v) * w == v x w`.
#[inline]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Fails with [`Error::NotSkew`] when the symmetric part
/// of `s` exceeds [`VEX_TOL`].
pub fn vex(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    vex_with_tol(s, VEX_TOL)
}

pub fn vex_with_tol(s: &Matrix3<f64>, tol: f64) -> Result<Vector3<f64>> {
    let residual = (s + s.transpose()).norm();
    if residual > tol {
        return Err(Error::NotSkew { residual, tol });
    }
    Ok(vex_unchecked(s))
}

/// Reads the axial vector of the skew part of `s` without checking symmetry.
#[inline]
pub(crate) fn vex_unchecked(s: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(
        s[(2, 1)] - s[(1, 2)],
        s[(0, 2)] - s[(2, 0)],
        s[(1, 0)] - s[(0, 1)],
    )
}

/// `sin(t)/t`, `(1 - cos t)/t^2` and `(t - sin t)/t^3`.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

/// A 3x3 rotation matrix (frame S to frame O for attitudes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix assumed to be in SO(3). No projection is applied.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rodrigues formula for the rotation vector `v`.
    pub fn exp(v: &Vector3<f64>) -> Self {
        let (a, b, _) = exp_coefficients(v.norm());
        let k = hat(v);
        Self(Matrix3::identity() + a * k + b * k * k)
    }

    /// Principal rotation vector, `|log| <= pi`.
    pub fn log(&self) -> Vector3<f64> {
        let r = &self.0;
        let theta = self.angle();
        let skew = vex_unchecked(r);
        if theta < SMALL_ANGLE {
            // theta / sin(theta) ~ 1 + theta^2 / 6
            return skew * (1.0 + theta * theta / 6.0);
        }
        if std::f64::consts::PI - theta > 1e-4 {
            return skew * (theta / theta.sin());
        }
        // Near pi: recover the axis from the symmetric part, fix the sign
        // with the (small) skew part.
        let sym = (r + r.transpose()) * 0.5;
        let b = (sym - Matrix3::identity() * theta.cos()) / (1.0 - theta.cos());
        let k = (0..3)
            .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
            .unwrap_or(0);
        let mut axis = b.column(k) / b[(k, k)].max(0.0).sqrt().max(f64::MIN_POSITIVE);
        axis.normalize_mut();
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        axis * theta
    }

    /// Principal angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        principal_angle(self)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// `max(||R^T R - I||_max, |det R - 1|)`.
    pub fn orthogonality_error(&self) -> f64 {
        let e = (self.0.transpose() * self.0 - Matrix3::identity()).amax();
        e.max((self.0.determinant() - 1.0).abs())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Rodrigues formula; see [`Rotation::exp`].
pub fn exp_so3(v: &Vector3<f64>) -> Rotation {
    Rotation::exp(v)
}

pub fn log_so3(r: &Rotation) -> Vector3<f64> {
    r.log()
}

/// `arccos(clamp((tr R - 1) / 2))`, evaluated as
/// `atan2(|vex(R - R^T)| / 2, (tr R - 1) / 2)` so that angles near 0 keep
/// full precision (plain `acos` bottoms out around 1.5e-8).
pub fn principal_angle(r: &Rotation) -> f64 {
    let s = 0.5 * vex_unchecked(&(r.0 - r.0.transpose())).norm();
    s.atan2((r.0.trace() - 1.0) * 0.5)
}

/// Rigid transformation `g = [R b; 0 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation, position: Vector3<f64>) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            position: -(rt.0 * self.position),
            rotation: rt,
        }
    }

    /// Maps a point expressed in the body frame to the reference frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.0 * p + self.position
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation.0);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Composition with the exponential of `dt * xi` on the right.
    pub fn retract(&self, xi: &Twist, dt: f64) -> Self {
        *self * exp_se3(xi, dt)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            position: self.rotation.0 * rhs.position + self.position,
        }
    }
}

/// Body-frame velocities `xi = [omega; nu]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub nu: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, nu: Vector3<f64>) -> Self {
        Self { omega, nu }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            omega: v.fixed_rows::<3>(0).into_owned(),
            nu: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.omega);
        v.fixed_rows_mut::<3>(3).copy_from(&self.nu);
        v
    }

    /// The 4x4 Lie algebra element `xi^`.
    pub fn to_algebra(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.omega));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.nu);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.omega
            .iter()
            .chain(self.nu.iter())
            .all(|x| x.is_finite())
    }
}

impl Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.omega + rhs.omega, self.nu + rhs.nu)
    }
}

impl Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.omega - rhs.omega, self.nu - rhs.nu)
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.omega, -self.nu)
    }
}

impl Mul<f64> for Twist {
    type Output = Twist;
    fn mul(self, rhs: f64) -> Twist {
        Twist::new(self.omega * rhs, self.nu * rhs)
    }
}

/// Closed-form exponential of `dt * xi^`: rotation `exp_so3(dt*omega)`,
/// translation `V(dt*omega) * dt*nu` with the left Jacobian `V`.
pub fn exp_se3(xi: &Twist, dt: f64) -> Pose {
    let w = xi.omega * dt;
    let u = xi.nu * dt;
    let (a, b, c) = exp_coefficients(w.norm());
    let k = hat(&w);
    let k2 = k * k;
    let rotation = Rotation(Matrix3::identity() + a * k + b * k2);
    let v = Matrix3::identity() + b * k + c * k2;
    Pose {
        rotation,
        position: v * u,
    }
}

/// `Ad_g = [R 0; b^ R  R]`.
pub fn adjoint(g: &Pose) -> Matrix6<f64> {
    let r = g.rotation.0;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(hat(&g.position) * r));
    m
}

/// `Ad_g * zeta` without forming the 6x6 matrix.
pub fn adjoint_apply(g: &Pose, zeta: &Twist) -> Twist {
    let w = g.rotation.0 * zeta.omega;
    Twist::new(w, g.position.cross(&w) + g.rotation.0 * zeta.nu)
}

/// `ad_zeta = [w^ 0; v^ w^]`.
pub fn ad(zeta: &Twist) -> Matrix6<f64> {
    let w = hat(&zeta.omega);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&zeta.nu));
    m
}

/// `ad*_zeta = ad_zeta^T`.
pub fn ad_star(zeta: &Twist) -> Matrix6<f64> {
    ad(zeta).transpose()
}

/// Lie bracket `[a, b] = ad_a b`.
pub fn bracket(a: &Twist, b: &Twist) -> Twist {
    Twist::new(
        a.omega.cross(&b.omega),
        a.omega.cross(&b.nu) + a.nu.cross(&b.omega),
    )
}
