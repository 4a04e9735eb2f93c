//! SO(3) and SE(3) primitives.
//!
//! Rotations are stored as 3x3 matrices. Tangent vectors are axis-angle
//! coordinates in the Lie algebra, and every exp/log pair uses the body-frame
//! convention `exp_R(v) = R * exp(v)`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Below this tangent norm `so3_exp` switches to its series expansion.
pub const EXP_SMALL_ANGLE: f64 = 1e-8;
/// Below this rotation angle `so3_log` switches to its series expansion.
pub const LOG_SMALL_ANGLE: f64 = 1e-6;
/// Rotations closer than this to an angle of π have no unique logarithm.
pub const ANTIPODAL_EPS: f64 = 1e-6;

// Above this angle the axis is recovered from the symmetric part of R.
const LOG_NEAR_PI: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("rotation angle {angle} is within {ANTIPODAL_EPS} of π; the logarithm is not unique")]
    NearAntipodal { angle: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix after checking orthonormality and determinant to `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, GeomError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeomError::InvalidArgument("non-finite rotation entry".into()));
        }
        let gram = m.transpose() * m - Matrix3::identity();
        if gram.amax() > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(GeomError::InvalidArgument(
                "matrix is not a proper rotation".into(),
            ));
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix that the caller guarantees is already a rotation.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Projects an arbitrary near-rotation matrix back onto SO(3) by
    /// Gram-Schmidt on its columns.
    pub fn orthonormalized(m: &Matrix3<f64>) -> Self {
        let c0 = m.column(0).into_owned();
        let c1 = m.column(1).into_owned();
        let e0 = c0.normalize();
        let e1 = (c1 - e0 * e0.dot(&c1)).normalize();
        let e2 = e0.cross(&e1);
        Rotation(Matrix3::from_columns(&[e0, e1, e2]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn rotate(&self, p: &Vec3) -> Vec3 {
        self.0 * p
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let (sin_half2, cos) = angle_parts(&self.0);
        sin_half2.atan2(cos)
    }

    /// Geodesic distance to `other` on SO(3).
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.transpose().compose(other).angle()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

// Returns (sin θ, cos θ) of the rotation angle, both from the matrix entries.
fn angle_parts(m: &Matrix3<f64>) -> (f64, f64) {
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = vee(&(m - m.transpose())).norm() / 2.0;
    (sin, cos)
}

/// An element of so(3) in axis-angle coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector(pub Vec3);

impl TangentVector {
    pub fn zero() -> Self {
        TangentVector(Vec3::zeros())
    }

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        TangentVector(Vec3::new(x, y, z))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        TangentVector(self.0 * s)
    }
}

pub fn hat(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Exponential map so(3) → SO(3) (Rodrigues).
pub fn so3_exp(v: &TangentVector) -> Result<Rotation, GeomError> {
    if !v.0.iter().all(|x| x.is_finite()) {
        return Err(GeomError::InvalidArgument("non-finite tangent vector".into()));
    }
    let theta = v.0.norm();
    let k = hat(&v.0);
    let k2 = k * k;
    let m = if theta < EXP_SMALL_ANGLE {
        Matrix3::identity() + k + k2 * 0.5
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Matrix3::identity() + k * a + k2 * b
    };
    Ok(Rotation(m))
}

/// Logarithm map SO(3) → so(3). Fails within [`ANTIPODAL_EPS`] of angle π.
pub fn so3_log(r: &Rotation) -> Result<TangentVector, GeomError> {
    let m = &r.0;
    let (sin, cos) = angle_parts(m);
    let theta = sin.atan2(cos);
    if theta >= std::f64::consts::PI - ANTIPODAL_EPS {
        return Err(GeomError::NearAntipodal { angle: theta });
    }
    let skew = vee(&(m - m.transpose()));
    if theta < LOG_SMALL_ANGLE {
        // θ / (2 sin θ) ≈ (1 + θ²/6) / 2
        return Ok(TangentVector(skew * (0.5 * (1.0 + theta * theta / 6.0))));
    }
    if theta > LOG_NEAR_PI {
        // (R + Rᵀ)/2 = cos θ I + (1 - cos θ) a aᵀ
        let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos;
        let scale = 1.0 - cos;
        let i = (0..3)
            .max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)]))
            .unwrap_or(0);
        let mut axis = sym.column(i).into_owned() / scale;
        axis /= axis.norm();
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        return Ok(TangentVector(axis * theta));
    }
    Ok(TangentVector(skew * (theta / (2.0 * sin))))
}

/// Point at fraction `s` along the geodesic from `r0` to `r1`:
/// `r0 * exp(s * log(r0ᵀ r1))`.
pub fn geodesic(r0: &Rotation, r1: &Rotation, s: f64) -> Result<Rotation, GeomError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(GeomError::InvalidArgument(format!(
            "geodesic parameter {s} outside [0, 1]"
        )));
    }
    let delta = so3_log(&r0.transpose().compose(r1))?;
    let step = so3_exp(&delta.scale(s))?;
    Ok(r0.compose(&step))
}

/// Body-frame logarithm `log(r0ᵀ r1)`, the tangent at `r0` pointing to `r1`.
pub fn log_at(r0: &Rotation, r1: &Rotation) -> Result<TangentVector, GeomError> {
    so3_log(&r0.transpose().compose(r1))
}

/// Row-major flattening of the rotation matrix.
pub fn mat2vec(r: &Rotation) -> [f64; 9] {
    let m = &r.0;
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// Uniformly distributed rotation (Shoemake's unit-quaternion method).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let tau = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    Rotation(quat_to_matrix(w, x, y, z))
}

fn quat_to_matrix(w: f64, x: f64, y: f64, z: f64) -> Matrix3<f64> {
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

/// A rigid motion `p ↦ R p + x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -rt.rotate(&self.translation))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(
            self.rotation.compose(&other.rotation),
            self.rotation.rotate(&other.translation) + self.translation,
        )
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, translation_scale: f64) -> Self {
        let rotation = random_rotation(rng);
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * translation_scale;
        Self::new(rotation, t)
    }
}

pub fn apply_frame(t: &RigidTransform, pts: &[Vec3]) -> Vec<Vec3> {
    pts.iter().map(|p| t.apply(p)).collect()
}
