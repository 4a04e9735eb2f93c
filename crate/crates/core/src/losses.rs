//! Loss evaluators for every training objective.
//!
//! These are plain functions of predictions and targets, with no gradients.
//! Residue-level terms average over residues; pair terms average over
//! ordered pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allatom::{AtomRecord, TorsionSet};
use crate::flowmatch::FrameSet;
use crate::geom3::{mat2vec, TangentVector, Vec3};
use crate::sampler::DenoiserOutput;
use crate::seqflow::{log_softmax20, Logits, Sequence, NUM_AA, VOCAB};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn same_len(what: &'static str, expected: usize, got: usize) -> Result<(), LossError> {
    if expected != got {
        return Err(LossError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Pseudo-Huber robustifier `sqrt(x² + c²) - c`.
pub fn pseudo_huber(x: f64, c: f64) -> f64 {
    // Written as x² / (sqrt(x² + c²) + c) to avoid cancellation for small x.
    let x2 = x * x;
    if x2 == 0.0 {
        return 0.0;
    }
    x2 / ((x2 + c * c).sqrt() + c)
}

/// Flow-matching regression on SE(3) vector fields.
pub fn loss_se3_fm(
    pred_trans: &[Vec3],
    true_trans: &[Vec3],
    pred_rot: &[TangentVector],
    true_rot: &[TangentVector],
) -> Result<f64, LossError> {
    let n = true_trans.len();
    same_len("predicted translation fields", n, pred_trans.len())?;
    same_len("predicted rotation fields", n, pred_rot.len())?;
    same_len("target rotation fields", n, true_rot.len())?;
    let trans: f64 = pred_trans.iter().zip(true_trans).map(|(a, b)| (a - b).norm_squared()).sum();
    let rot: f64 = pred_rot.iter().zip(true_rot).map(|(a, b)| (a.0 - b.0).norm_squared()).sum();
    Ok(mean(trans, n) + mean(rot, n))
}

/// Mean cross-entropy over `positions` against the clean tokens.
pub fn loss_discrete(logits: &Logits, s1: &Sequence, positions: &[usize]) -> Result<f64, LossError> {
    same_len("logit rows", s1.len(), logits.len())?;
    let mut total = 0.0;
    for &i in positions {
        let aa = s1
            .0
            .get(i)
            .ok_or_else(|| LossError::InvalidArgument(format!("position {i} out of range")))?
            .aa()
            .ok_or_else(|| LossError::InvalidArgument(format!("target is masked at position {i}")))?;
        total -= log_softmax20(&logits.0[i])[aa.index()];
    }
    Ok(mean(total, positions.len()))
}

/// Positions at which a corrupted sequence is masked; the usual scoring set.
pub fn masked_positions(st: &Sequence) -> Vec<usize> {
    st.0.iter().enumerate().filter(|(_, t)| t.is_mask()).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub coefficient: f64,
    /// Overrides the sequence comparison dimension (default `N * 21`).
    pub dim_s: Option<usize>,
    /// Overrides the structure comparison dimension (default `N * 12`).
    pub dim_t: Option<usize>,
    pub delta_t: f64,
    pub weight: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { coefficient: 0.00054, dim_s: None, dim_t: None, delta_t: 0.01, weight: 0.3 }
    }
}

impl ConsistencyConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.coefficient > 0.0) || self.dim_s == Some(0) || self.dim_t == Some(0) {
            return Err(LossError::InvalidArgument("consistency coefficient and dims must be positive".into()));
        }
        if !(self.delta_t > 0.0 && self.delta_t < 1.0) {
            return Err(LossError::InvalidArgument("consistency delta_t must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// `(c_S, c_T)` for a length-`n` prediction.
    pub fn constants(&self, n: usize) -> (f64, f64) {
        let ds = self.dim_s.unwrap_or(n * VOCAB) as f64;
        let dt = self.dim_t.unwrap_or(n * 12) as f64;
        (self.coefficient * ds.sqrt(), self.coefficient * dt.sqrt())
    }
}

/// Mean over positions of KL(teacher ‖ student) on the amino-acid classes.
pub fn sequence_kl(student: &Logits, teacher: &Logits) -> Result<f64, LossError> {
    same_len("teacher logit rows", student.len(), teacher.len())?;
    let total: f64 = student
        .0
        .iter()
        .zip(&teacher.0)
        .map(|(s, t)| {
            let (ls, lt) = (log_softmax20(s), log_softmax20(t));
            (0..NUM_AA).map(|k| lt[k].exp() * (lt[k] - ls[k])).sum::<f64>()
        })
        .sum();
    Ok(mean(total, student.len()))
}

/// Translation MSE plus flattened-rotation MSE, each a per-residue squared
/// norm averaged over residues.
pub fn frame_mse(a: &FrameSet, b: &FrameSet) -> Result<f64, LossError> {
    same_len("frames", a.len(), b.len())?;
    let mut total = 0.0;
    for (fa, fb) in a.iter().zip(b.iter()) {
        total += (fa.translation - fb.translation).norm_squared();
        let (ra, rb) = (mat2vec(&fa.rotation), mat2vec(&fb.rotation));
        total += ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    }
    Ok(mean(total, a.len()))
}

/// Consistency between a student prediction and a detached teacher made at
/// the next time step, scaled by `t²` per modality.
pub fn loss_consistency(
    pred: &DenoiserOutput,
    teacher: &DenoiserOutput,
    t_s: f64,
    t_t: f64,
    cfg: &ConsistencyConfig,
) -> Result<f64, LossError> {
    let n = pred.frames.len();
    same_len("student logit rows", n, pred.logits.len())?;
    let kl = sequence_kl(&pred.logits, &teacher.logits)?;
    let mse = frame_mse(&pred.frames, &teacher.frames)?;
    let (c_s, c_t) = cfg.constants(n);
    Ok(t_s * t_s * pseudo_huber(kl, c_s) + t_t * t_t * pseudo_huber(mse, c_t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FapeConfig {
    pub clamp: f64,
    pub length_scale: f64,
    pub backbone_only: bool,
}

impl Default for FapeConfig {
    fn default() -> Self {
        Self { clamp: 10.0, length_scale: 10.0, backbone_only: false }
    }
}

impl FapeConfig {
    pub fn backbone() -> Self {
        Self { backbone_only: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.clamp > 0.0 && self.length_scale > 0.0) {
            return Err(LossError::InvalidArgument("FAPE clamp and length scale must be positive".into()));
        }
        Ok(())
    }
}

/// Frame-aligned point error over every (frame, atom) pair.
pub fn loss_fape(
    pred_frames: &FrameSet,
    pred_atoms: &[Vec3],
    true_frames: &FrameSet,
    true_atoms: &[Vec3],
    cfg: &FapeConfig,
) -> Result<f64, LossError> {
    same_len("frames", true_frames.len(), pred_frames.len())?;
    same_len("atoms", true_atoms.len(), pred_atoms.len())?;
    let mut total = 0.0;
    for (fp, ft) in pred_frames.iter().zip(true_frames.iter()) {
        let (ip, it) = (fp.inverse(), ft.inverse());
        for (ap, at) in pred_atoms.iter().zip(true_atoms) {
            let d = (ip.apply(ap) - it.apply(at)).norm();
            total += d.min(cfg.clamp);
        }
    }
    Ok(mean(total, pred_frames.len() * pred_atoms.len()) / cfg.length_scale)
}

const BACKBONE_ATOMS: [&str; 4] = ["N", "CA", "C", "O"];

/// Pairs up atoms present in both structures, residue by residue, keeping
/// only backbone atoms when `backbone_only` is set.
pub fn matched_atoms(
    pred: &[Vec<AtomRecord>],
    truth: &[Vec<AtomRecord>],
    backbone_only: bool,
) -> Result<(Vec<Vec3>, Vec<Vec3>), LossError> {
    same_len("residues", truth.len(), pred.len())?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (rp, rt) in pred.iter().zip(truth) {
        for at in rt {
            if backbone_only && !BACKBONE_ATOMS.contains(&at.name.as_str()) {
                continue;
            }
            if let Some(ap) = rp.iter().find(|x| x.name == at.name) {
                a.push(ap.position);
                b.push(at.position);
            }
        }
    }
    Ok((a, b))
}

/// FAPE on per-residue atom lists, selecting atoms per `cfg.backbone_only`.
pub fn loss_fape_residues(
    pred_frames: &FrameSet,
    pred: &[Vec<AtomRecord>],
    true_frames: &FrameSet,
    truth: &[Vec<AtomRecord>],
    cfg: &FapeConfig,
) -> Result<f64, LossError> {
    let (a, b) = matched_atoms(pred, truth, cfg.backbone_only)?;
    loss_fape(pred_frames, &a, true_frames, &b, cfg)
}

/// Mean squared difference of pairwise distances over ordered pairs `i ≠ j`.
pub fn loss_distogram(pred: &[Vec3], truth: &[Vec3]) -> Result<f64, LossError> {
    same_len("coordinates", truth.len(), pred.len())?;
    let n = pred.len();
    if n < 2 {
        return Err(LossError::InvalidArgument("distogram needs at least two residues".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dp = (pred[i] - pred[j]).norm();
            let dt = (truth[i] - truth[j]).norm();
            total += (dp - dt).powi(2);
        }
    }
    // Each unordered pair stands for both orderings.
    Ok(2.0 * total / (n * (n - 1)) as f64)
}

/// Cross-entropy of the refined logits plus translation MSE plus squared
/// Frobenius rotation error, each averaged over residues.
pub fn loss_correction(
    refined_logits: &Logits,
    refined_frames: &FrameSet,
    s1: &Sequence,
    t1: &FrameSet,
) -> Result<f64, LossError> {
    let n = s1.len();
    same_len("refined frames", n, refined_frames.len())?;
    same_len("target frames", n, t1.len())?;
    let all: Vec<usize> = (0..n).collect();
    let ce = loss_discrete(refined_logits, s1, &all)?;
    let mut trans = 0.0;
    let mut rot = 0.0;
    for (a, b) in refined_frames.iter().zip(t1.iter()) {
        trans += (a.translation - b.translation).norm_squared();
        rot += (a.rotation.matrix() - b.rotation.matrix()).norm_squared();
    }
    Ok(ce + mean(trans, n) + mean(rot, n))
}

pub fn loss_refine_total(corr: f64, fape_bb: f64, dist: f64) -> f64 {
    corr + 0.25 * fape_bb + 0.25 * dist
}

/// Flow-matching loss plus the weighted consistency term.
pub fn loss_seqbb_total(flow_matching: f64, consistency: f64, cfg: &ConsistencyConfig) -> f64 {
    flow_matching + cfg.weight * consistency
}

/// Mean over defined chis of the squared chord `2 - 2 cos Δ` between
/// unit-circle embeddings, minimised over π-flips where `symmetry` allows.
pub fn loss_chi(pred: &TorsionSet, truth: &TorsionSet, symmetry: &[[bool; 4]]) -> Result<f64, LossError> {
    same_len("predicted torsion rows", truth.len(), pred.len())?;
    same_len("symmetry rows", truth.len(), symmetry.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, ((p, t), sym)) in pred.0.iter().zip(&truth.0).zip(symmetry).enumerate() {
        if p.mask() != t.mask() {
            return Err(LossError::InvalidArgument(format!("chi validity masks differ at residue {r}")));
        }
        for (k, &symmetric) in sym.iter().enumerate() {
            if let (Some(a), Some(b)) = (p.get(k), t.get(k)) {
                let chord = |d: f64| 2.0 - 2.0 * d.cos();
                let mut v = chord(a - b);
                if symmetric {
                    v = v.min(chord(a - b + std::f64::consts::PI));
                }
                total += v;
                count += 1;
            }
        }
    }
    Ok(mean(total, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allatom::{build_sidechain, AminoAcid, ChiAngles};
    use crate::geom3::{so3_exp, RigidTransform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rv(rng: &mut impl Rng, s: f64) -> Vec3 {
        Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn random_frames(n: usize, rng: &mut impl Rng) -> FrameSet {
        FrameSet((0..n).map(|_| RigidTransform::random(rng, 10.0)).collect())
    }

    fn random_logits(n: usize, rng: &mut impl Rng) -> Logits {
        Logits((0..n).map(|_| std::array::from_fn(|_| rng.random_range(-4.0..4.0))).collect())
    }

    fn random_seq(n: usize, rng: &mut impl Rng) -> Sequence {
        Sequence::from_residues(&(0..n).map(|_| AminoAcid::ALL[rng.random_range(0..20)]).collect::<Vec<_>>())
    }

    // Independent softmax: explicit exponentials, no max shift.
    fn oracle_ce(row: &[f64; VOCAB], k: usize) -> f64 {
        let z: f64 = row[..NUM_AA].iter().map(|x| x.exp()).sum();
        -(row[k].exp() / z).ln()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn se3_fm_cases() {
        let z = vec![Vec3::zeros()];
        let zr = vec![TangentVector::zero()];
        assert_eq!(loss_se3_fm(&z, &z, &zr, &zr).unwrap(), 0.0);
        assert_eq!(loss_se3_fm(&[Vec3::new(1.0, 0.0, 0.0)], &z, &zr, &zr).unwrap(), 1.0);
        assert!(loss_se3_fm(&z, &[], &zr, &zr).is_err());
    }

    #[test]
    fn se3_fm_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=8 {
            let pt: Vec<Vec3> = (0..n).map(|_| rv(&mut rng, 3.0)).collect();
            let tt: Vec<Vec3> = (0..n).map(|_| rv(&mut rng, 3.0)).collect();
            let pr: Vec<TangentVector> = (0..n).map(|_| TangentVector(rv(&mut rng, 2.0))).collect();
            let tr: Vec<TangentVector> = (0..n).map(|_| TangentVector(rv(&mut rng, 2.0))).collect();
            let mut a = 0.0;
            let mut b = 0.0;
            for i in 0..n {
                for k in 0..3 {
                    a += (pt[i][k] - tt[i][k]).powi(2);
                    b += (pr[i].0[k] - tr[i].0[k]).powi(2);
                }
            }
            let want = a / n as f64 + b / n as f64;
            assert!(close(loss_se3_fm(&pt, &tt, &pr, &tr).unwrap(), want));
        }
    }

    #[test]
    fn discrete_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_seq(6, &mut rng);
        let all: Vec<usize> = (0..6).collect();
        assert!(loss_discrete(&Logits::peaked(&s, 1e4), &s, &all).unwrap() < 1e-4);
        let v = loss_discrete(&Logits::zeros(6), &s, &all).unwrap();
        assert!((v - 20f64.ln()).abs() < 1e-12);
        assert!((v - 2.9957).abs() < 1e-4);
        let masked = Sequence::masked(6);
        assert!(loss_discrete(&Logits::zeros(6), &masked, &[0]).is_err());
        assert_eq!(loss_discrete(&Logits::zeros(6), &masked, &[]).unwrap(), 0.0);
    }

    #[test]
    fn discrete_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=8 {
            let l = random_logits(n, &mut rng);
            let s = random_seq(n, &mut rng);
            let pos: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            let want = if pos.is_empty() {
                0.0
            } else {
                pos.iter().map(|&i| oracle_ce(&l.0[i], s.0[i].index())).sum::<f64>() / pos.len() as f64
            };
            assert!(close(loss_discrete(&l, &s, &pos).unwrap(), want));
        }
    }

    fn output(logits: Logits, frames: FrameSet) -> DenoiserOutput {
        DenoiserOutput { logits, frames, torsions: None }
    }

    #[test]
    fn consistency_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ConsistencyConfig::default();
        let a = output(random_logits(3, &mut rng), random_frames(3, &mut rng));
        let b = output(random_logits(3, &mut rng), random_frames(3, &mut rng));
        assert_eq!(loss_consistency(&a, &a, 0.7, 0.9, &cfg).unwrap(), 0.0);
        assert_eq!(loss_consistency(&a, &b, 0.0, 0.0, &cfg).unwrap(), 0.0);

        let x = output(Logits::zeros(1), FrameSet(vec![RigidTransform::identity()]));
        let y = output(Logits::zeros(1), FrameSet(vec![RigidTransform::from_translation(Vec3::new(3.0, 4.0, 0.0))]));
        let v = loss_consistency(&x, &y, 1.0, 1.0, &cfg).unwrap();
        let c_t = 0.00054 * 12f64.sqrt();
        assert!((c_t - 0.0018706).abs() < 1e-7);
        assert!((v - ((625.0 + c_t * c_t).sqrt() - c_t)).abs() < 1e-12);
        assert!((v - 24.99813).abs() < 1e-5);
    }

    #[test]
    fn consistency_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ConsistencyConfig::default();
        for n in 1..=8 {
            let a = output(random_logits(n, &mut rng), random_frames(n, &mut rng));
            let b = output(random_logits(n, &mut rng), random_frames(n, &mut rng));
            let (ts, tt) = (rng.random::<f64>(), rng.random::<f64>());
            let mut kl = 0.0;
            for i in 0..n {
                let zs: f64 = a.logits.0[i][..20].iter().map(|x| x.exp()).sum();
                let zt: f64 = b.logits.0[i][..20].iter().map(|x| x.exp()).sum();
                for k in 0..20 {
                    let ps = a.logits.0[i][k].exp() / zs;
                    let pt = b.logits.0[i][k].exp() / zt;
                    kl += pt * (pt / ps).ln();
                }
            }
            kl /= n as f64;
            let mut mse = 0.0;
            for i in 0..n {
                let (fa, fb) = (&a.frames[i], &b.frames[i]);
                for r in 0..3 {
                    mse += (fa.translation[r] - fb.translation[r]).powi(2);
                    for c in 0..3 {
                        mse += (fa.rotation.matrix()[(r, c)] - fb.rotation.matrix()[(r, c)]).powi(2);
                    }
                }
            }
            mse /= n as f64;
            let cs = 0.00054 * ((21 * n) as f64).sqrt();
            let ct = 0.00054 * ((12 * n) as f64).sqrt();
            let want = ts * ts * ((kl * kl + cs * cs).sqrt() - cs) + tt * tt * ((mse * mse + ct * ct).sqrt() - ct);
            let got = loss_consistency(&a, &b, ts, tt, &cfg).unwrap();
            assert!((got - want).abs() < 1e-12 * (1.0 + want), "{got} {want}");
        }
    }

    #[test]
    fn consistency_grows_with_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = ConsistencyConfig::default();
        let a = output(random_logits(4, &mut rng), random_frames(4, &mut rng));
        let b = output(random_logits(4, &mut rng), random_frames(4, &mut rng));
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        for w in grid.windows(2) {
            assert!(loss_consistency(&a, &b, w[1], 0.5, &cfg).unwrap() >= loss_consistency(&a, &b, w[0], 0.5, &cfg).unwrap());
            assert!(loss_consistency(&a, &b, 0.5, w[1], &cfg).unwrap() >= loss_consistency(&a, &b, 0.5, w[0], &cfg).unwrap());
        }
    }

    #[test]
    fn pseudo_huber_is_stable_near_zero() {
        assert_eq!(pseudo_huber(0.0, 0.01), 0.0);
        let tiny = pseudo_huber(1e-9, 0.01);
        assert!(tiny > 0.0 && (tiny - 1e-18 / 0.02).abs() < 1e-24);
    }

    fn oracle_fape(pf: &FrameSet, pa: &[Vec3], tf: &FrameSet, ta: &[Vec3], clamp: f64, z: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..pf.len() {
            let (rp, rt) = (pf[i].rotation.matrix(), tf[i].rotation.matrix());
            for j in 0..pa.len() {
                let lp = rp.transpose() * (pa[j] - pf[i].translation);
                let lt = rt.transpose() * (ta[j] - tf[i].translation);
                s += (lp - lt).norm().min(clamp);
            }
        }
        s / (pf.len() * pa.len()) as f64 / z
    }

    #[test]
    fn fape_cases() {
        let cfg = FapeConfig::default();
        let f = FrameSet(vec![RigidTransform::identity()]);
        assert!((loss_fape(&f, &[Vec3::new(5.0, 0.0, 0.0)], &f, &[Vec3::zeros()], &cfg).unwrap() - 0.5).abs() < 1e-15);
        assert!((loss_fape(&f, &[Vec3::new(50.0, 0.0, 0.0)], &f, &[Vec3::zeros()], &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert!(loss_fape(&f, &[Vec3::zeros()], &f, &[], &cfg).is_err());
    }

    #[test]
    fn fape_matches_oracle_and_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = FapeConfig::default();
        for n in 1..=8 {
            let tf = random_frames(n, &mut rng);
            let ta: Vec<Vec3> = (0..2 * n).map(|_| rv(&mut rng, 10.0)).collect();
            let pf = FrameSet(tf.iter().map(|f| f.compose(&RigidTransform::random(&mut rng, 1.0))).collect());
            let pa: Vec<Vec3> = ta.iter().map(|a| a + rv(&mut rng, 3.0)).collect();
            let got = loss_fape(&pf, &pa, &tf, &ta, &cfg).unwrap();
            assert!(close(got, oracle_fape(&pf, &pa, &tf, &ta, 10.0, 10.0)));
            assert_eq!(loss_fape(&tf, &ta, &tf, &ta, &cfg).unwrap(), 0.0);
            let g = RigidTransform::random(&mut rng, 50.0);
            let moved: Vec<Vec3> = pa.iter().map(|p| g.apply(p)).collect();
            let after = loss_fape(&pf.transformed(&g), &moved, &tf, &ta, &cfg).unwrap();
            assert!((after - got).abs() < 1e-9);
        }
    }

    #[test]
    fn backbone_fape_uses_backbone_atoms_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let frames = random_frames(3, &mut rng);
        let chi = ChiAngles::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let truth: Vec<Vec<AtomRecord>> = frames.iter().map(|f| build_sidechain(AminoAcid::Lys, f, &chi).unwrap()).collect();
        let other = ChiAngles::from_slice(&[3.0, 1.0, 0.5, 2.0]);
        let pred: Vec<Vec<AtomRecord>> = frames.iter().map(|f| build_sidechain(AminoAcid::Lys, f, &other).unwrap()).collect();
        let bb = loss_fape_residues(&frames, &pred, &frames, &truth, &FapeConfig::backbone()).unwrap();
        let full = loss_fape_residues(&frames, &pred, &frames, &truth, &FapeConfig::default()).unwrap();
        assert!(bb < 1e-12);
        assert!(full > 0.01);
        let (a, _) = matched_atoms(&pred, &truth, true).unwrap();
        assert_eq!(a.len(), 12);
    }

    #[test]
    fn distogram_cases() {
        let t = [Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0)];
        let p = [Vec3::zeros(), Vec3::new(0.0, 5.0, 0.0)];
        assert!((loss_distogram(&p, &t).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(loss_distogram(&t, &t).unwrap(), 0.0);
        assert!(loss_distogram(&t[..1], &t[..1]).is_err());
    }

    #[test]
    fn distogram_matches_oracle_and_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..=8 {
            let p: Vec<Vec3> = (0..n).map(|_| rv(&mut rng, 10.0)).collect();
            let t: Vec<Vec3> = (0..n).map(|_| rv(&mut rng, 10.0)).collect();
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += ((p[i] - p[j]).norm() - (t[i] - t[j]).norm()).powi(2);
                    }
                }
            }
            let want = s / (n * (n - 1)) as f64;
            let got = loss_distogram(&p, &t).unwrap();
            assert!(close(got, want));
            let (g1, g2) = (RigidTransform::random(&mut rng, 30.0), RigidTransform::random(&mut rng, 30.0));
            let pm: Vec<Vec3> = p.iter().map(|x| g1.apply(x)).collect();
            let tm: Vec<Vec3> = t.iter().map(|x| g2.apply(x)).collect();
            assert!((loss_distogram(&pm, &tm).unwrap() - got).abs() < 1e-9);
        }
    }

    #[test]
    fn correction_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = random_seq(4, &mut rng);
        let f = random_frames(4, &mut rng);
        assert!(loss_correction(&Logits::peaked(&s, 1e4), &f, &s, &f).unwrap() < 1e-4);

        let one = random_seq(1, &mut rng);
        let peaked = Logits::peaked(&one, 1e4);
        let id = FrameSet(vec![RigidTransform::identity()]);
        let flip = FrameSet(vec![RigidTransform::new(so3_exp(&TangentVector::new(0.0, 0.0, PI)).unwrap(), Vec3::zeros())]);
        let v = loss_correction(&peaked, &flip, &one, &id).unwrap();
        assert!((v - 8.0).abs() < 1e-9);
    }

    #[test]
    fn correction_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            let l = random_logits(n, &mut rng);
            let s = random_seq(n, &mut rng);
            let a = random_frames(n, &mut rng);
            let b = random_frames(n, &mut rng);
            let mut ce = 0.0;
            let mut tr = 0.0;
            let mut rot = 0.0;
            for i in 0..n {
                ce += oracle_ce(&l.0[i], s.0[i].index());
                for r in 0..3 {
                    tr += (a[i].translation[r] - b[i].translation[r]).powi(2);
                    for c in 0..3 {
                        rot += (a[i].rotation.matrix()[(r, c)] - b[i].rotation.matrix()[(r, c)]).powi(2);
                    }
                }
            }
            let want = (ce + tr + rot) / n as f64;
            assert!(close(loss_correction(&l, &a, &s, &b).unwrap(), want));
        }
    }

    #[test]
    fn refine_total_cases() {
        assert_eq!(loss_refine_total(0.0, 0.0, 0.0), 0.0);
        assert_eq!(loss_refine_total(1.0, 2.0, 4.0), 2.5);
        let base = loss_refine_total(1.0, 2.0, 4.0);
        assert_eq!(loss_refine_total(2.0, 2.0, 4.0) - base, 1.0);
        assert_eq!(loss_refine_total(1.0, 6.0, 4.0) - base, 1.0);
        assert_eq!(loss_seqbb_total(1.0, 2.0, &ConsistencyConfig::default()), 1.6);
    }

    #[test]
    fn chi_cases() {
        let sym = AminoAcid::Phe.chi_symmetry();
        let t = TorsionSet(vec![ChiAngles::from_slice(&[1.0, 0.5])]);
        assert_eq!(loss_chi(&t, &t, &[sym]).unwrap(), 0.0);
        let flipped = TorsionSet(vec![ChiAngles::from_slice(&[1.0, 0.5 + PI])]);
        assert!(loss_chi(&flipped, &t, &[sym]).unwrap() < 1e-12);
        let lys = AminoAcid::Lys.chi_symmetry();
        let a = TorsionSet(vec![ChiAngles::from_slice(&[1.0, 1.0, 1.0, 1.0])]);
        let b = TorsionSet(vec![ChiAngles::from_slice(&[1.0 + FRAC_PI_2, 1.0, 1.0, 1.0])]);
        // One chi off by π/2 contributes 2.0, averaged over four defined chis.
        assert!((loss_chi(&b, &a, &[lys]).unwrap() - 0.5).abs() < 1e-12);
        let short = TorsionSet(vec![ChiAngles::from_slice(&[1.0])]);
        assert!(loss_chi(&short, &a, &[lys]).is_err());
    }

    #[test]
    fn chi_matches_sin_cos_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 1..=8 {
            let aas: Vec<AminoAcid> = (0..n).map(|_| AminoAcid::ALL[rng.random_range(0..20)]).collect();
            let mk = |rng: &mut ChaCha8Rng| {
                TorsionSet(aas.iter().map(|a| {
                    let v: Vec<f64> = (0..a.chi_count()).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                    ChiAngles::from_slice(&v)
                }).collect())
            };
            let (p, t) = (mk(&mut rng), mk(&mut rng));
            let sym: Vec<[bool; 4]> = aas.iter().map(|a| a.chi_symmetry()).collect();
            let mut s = 0.0;
            let mut c = 0;
            for i in 0..n {
                for k in 0..aas[i].chi_count() {
                    let (a, b) = (p.0[i].get(k).unwrap(), t.0[i].get(k).unwrap());
                    let gap = |b: f64| (a.sin() - b.sin()).powi(2) + (a.cos() - b.cos()).powi(2);
                    s += if sym[i][k] { gap(b).min(gap(b + PI)) } else { gap(b) };
                    c += 1;
                }
            }
            let want = if c == 0 { 0.0 } else { s / c as f64 };
            let got = loss_chi(&p, &t, &sym).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} {want}");
        }
    }
}
