//! Continuous flow matching on SE(3).
//!
//! Translations follow the straight-line interpolant with the linear field
//! `(x1 - xt) / (1 - t)`. Rotations follow SO(3) geodesics, either on the
//! linear schedule used for training or on the exponential schedule
//! `κ(t) = e^{-ct}` used at inference, whose field is `c * log_{Rt}(R1)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{
    geodesic, log_at, random_rotation, so3_exp, GeomError, RigidTransform, Rotation,
    TangentVector, Vec3,
};

/// Linear fields are undefined this close to `t = 1`.
pub const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time {t} is too close to 1 for the linear-schedule field")]
    TimeSingularity { t: f64 },
    #[error("residue {residue}: {source}")]
    Residue {
        residue: usize,
        #[source]
        source: GeomError,
    },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FlowError {
    /// Index of the residue whose rotation pair was near-antipodal, if any.
    pub fn antipodal_residue(&self) -> Option<usize> {
        match self {
            FlowError::Residue { residue, source: GeomError::NearAntipodal { .. } } => {
                Some(*residue)
            }
            _ => None,
        }
    }
}

/// Time reparameterization of the rotation interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleKind {
    Linear,
    Exponential { c: f64 },
}

impl Default for ScheduleKind {
    fn default() -> Self {
        ScheduleKind::Exponential { c: 10.0 }
    }
}

impl ScheduleKind {
    pub fn validate(&self) -> Result<(), FlowError> {
        match *self {
            ScheduleKind::Exponential { c } if !(c > 0.0 && c.is_finite()) => Err(
                FlowError::InvalidArgument(format!("exponential rate must be positive, got {c}")),
            ),
            _ => Ok(()),
        }
    }

    /// Fraction of the geodesic covered at time `t`.
    pub fn progress(&self, t: f64) -> f64 {
        match *self {
            ScheduleKind::Linear => t,
            ScheduleKind::Exponential { c } => 1.0 - (-c * t).exp(),
        }
    }
}

/// One rigid frame per residue.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSet(pub Vec<RigidTransform>);

impl FrameSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RigidTransform> {
        self.0.iter()
    }

    pub fn translations(&self) -> Vec<Vec3> {
        self.0.iter().map(|f| f.translation).collect()
    }

    /// Applies `t` on the left of every frame.
    pub fn transformed(&self, t: &RigidTransform) -> FrameSet {
        FrameSet(self.0.iter().map(|f| t.compose(f)).collect())
    }
}

impl From<Vec<RigidTransform>> for FrameSet {
    fn from(v: Vec<RigidTransform>) -> Self {
        FrameSet(v)
    }
}

impl std::ops::Index<usize> for FrameSet {
    type Output = RigidTransform;
    fn index(&self, i: usize) -> &RigidTransform {
        &self.0[i]
    }
}

pub fn interp_trans(x0: &Vec3, x1: &Vec3, t: f64) -> Vec3 {
    x0 * (1.0 - t) + x1 * t
}

pub fn interp_rot(
    r0: &Rotation,
    r1: &Rotation,
    t: f64,
    sched: ScheduleKind,
) -> Result<Rotation, FlowError> {
    Ok(geodesic(r0, r1, sched.progress(t))?)
}

pub fn vf_trans(xt: &Vec3, x1: &Vec3, t: f64) -> Result<Vec3, FlowError> {
    if t >= 1.0 - TIME_EPS {
        return Err(FlowError::TimeSingularity { t });
    }
    Ok((x1 - xt) / (1.0 - t))
}

/// Rotation field at `rt`, as a body-frame tangent.
pub fn vf_rot(
    rt: &Rotation,
    r1: &Rotation,
    t: f64,
    sched: ScheduleKind,
) -> Result<TangentVector, FlowError> {
    match sched {
        ScheduleKind::Linear => {
            if t >= 1.0 - TIME_EPS {
                return Err(FlowError::TimeSingularity { t });
            }
            Ok(log_at(rt, r1)?.scale(1.0 / (1.0 - t)))
        }
        ScheduleKind::Exponential { c } => Ok(log_at(rt, r1)?.scale(c)),
    }
}

/// Per-residue field magnitudes of one Euler step, for trajectory logging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub mean_trans_speed: f64,
    pub mean_rot_norm: f64,
}

/// One explicit Euler step toward `target_pred`.
///
/// Translations always use the linear field; rotations use `sched`. The
/// rotation update is `R ← R · exp(dt · v)` followed by re-orthonormalization.
pub fn euler_step(
    frames: &FrameSet,
    target_pred: &FrameSet,
    t: f64,
    dt: f64,
    sched: ScheduleKind,
) -> Result<FrameSet, FlowError> {
    euler_step_with_stats(frames, target_pred, t, dt, sched).map(|(f, _)| f)
}

pub fn euler_step_with_stats(
    frames: &FrameSet,
    target_pred: &FrameSet,
    t: f64,
    dt: f64,
    sched: ScheduleKind,
) -> Result<(FrameSet, StepStats), FlowError> {
    if frames.len() != target_pred.len() {
        return Err(FlowError::InvalidArgument(format!(
            "frame count {} does not match prediction count {}",
            frames.len(),
            target_pred.len()
        )));
    }
    if !(dt > 0.0) || t + dt > 1.0 + 1e-12 {
        return Err(FlowError::InvalidArgument(format!(
            "step from t={t} by dt={dt} leaves [0, 1]"
        )));
    }
    if t >= 1.0 - TIME_EPS {
        return Err(FlowError::TimeSingularity { t });
    }
    let ratio = dt / (1.0 - t);
    let mut out = Vec::with_capacity(frames.len());
    let mut stats = StepStats::default();
    for (i, (cur, tgt)) in frames.iter().zip(target_pred.iter()).enumerate() {
        let delta = tgt.translation - cur.translation;
        let x = cur.translation + delta * ratio;
        let v = vf_rot(&cur.rotation, &tgt.rotation, t, sched).map_err(|e| match e {
            FlowError::Geom(source) => FlowError::Residue { residue: i, source },
            other => other,
        })?;
        let step = so3_exp(&v.scale(dt))?;
        let r = Rotation::orthonormalized(cur.rotation.compose(&step).matrix());
        stats.mean_trans_speed += delta.norm() / (1.0 - t);
        stats.mean_rot_norm += v.norm();
        out.push(RigidTransform::new(r, x));
    }
    if !out.is_empty() {
        stats.mean_trans_speed /= out.len() as f64;
        stats.mean_rot_norm /= out.len() as f64;
    }
    Ok((FrameSet(out), stats))
}

/// Prior frames: uniform rotations and zero-centred isotropic Gaussian
/// translations with per-coordinate standard deviation `trans_std`.
pub fn sample_prior<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    trans_std: f64,
) -> Result<FrameSet, FlowError> {
    if n == 0 {
        return Err(FlowError::InvalidArgument("prior needs at least one residue".into()));
    }
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let rotation = random_rotation(rng);
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        frames.push(RigidTransform::new(rotation, Vec3::new(x, y, z) * trans_std));
    }
    let centroid = frames.iter().map(|f| f.translation).sum::<Vec3>() / n as f64;
    for f in &mut frames {
        f.translation -= centroid;
    }
    Ok(FrameSet(frames))
}
