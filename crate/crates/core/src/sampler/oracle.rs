//! Reference denoisers that know the answer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Denoiser, DenoiserInput, DenoiserOutput, Role, SamplerError};
use crate::allatom::{AminoAcid, TorsionSet};
use crate::flowmatch::FrameSet;
use crate::geom3::{so3_exp, RigidTransform, TangentVector, Vec3};
use crate::metrics::kabsch;
use crate::proteinio::{placeholder_torsions, Complex};
use crate::seqflow::{Logits, Sequence};

/// Logit margin of the target residue type over every other type.
pub const ORACLE_MARGIN: f64 = 20.0;

/// Returns the clean target whatever the input noise level.
///
/// The output covers the first `n` target residues for an `n`-residue
/// query. When the query holds fixed residues, the target is first moved
/// rigidly onto them, so conditional generation continues the fixed part.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthOracle {
    sequence: Vec<AminoAcid>,
    frames: FrameSet,
    torsions: TorsionSet,
}

pub fn make_ground_truth_oracle(target: &Complex) -> Result<GroundTruthOracle, SamplerError> {
    if target.is_empty() {
        return Err(SamplerError::IncompleteTarget("target has no residues".into()));
    }
    let sequence: Vec<AminoAcid> = target.residues().map(|r| r.aa).collect();
    let torsions = target.torsions();
    for (i, (aa, chi)) in sequence.iter().zip(&torsions.0).enumerate() {
        if chi.defined_count() != aa.chi_count() {
            return Err(SamplerError::IncompleteTarget(format!("residue {i} ({aa}) lacks chi angles")));
        }
    }
    Ok(GroundTruthOracle { sequence, frames: target.frames(), torsions })
}

impl GroundTruthOracle {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    fn alignment(&self, input: &DenoiserInput<'_>) -> RigidTransform {
        let idx: Vec<usize> = (0..input.fixed.len()).filter(|&i| input.fixed[i]).collect();
        if idx.is_empty() {
            return RigidTransform::identity();
        }
        let from: Vec<Vec3> = idx.iter().map(|&i| self.frames[i].translation).collect();
        let to: Vec<Vec3> = idx.iter().map(|&i| input.frames[i].translation).collect();
        match kabsch(&from, &to) {
            Ok(s) => s.transform,
            // Too few or collinear anchors: match the first fixed frame exactly.
            Err(_) => input.frames[idx[0]].compose(&self.frames[idx[0]].inverse()),
        }
    }
}

impl Denoiser for GroundTruthOracle {
    fn denoise(&self, input: &DenoiserInput<'_>) -> Result<DenoiserOutput, SamplerError> {
        let n = input.sequence.len();
        if n > self.len() || input.frames.len() != n || input.fixed.len() != n {
            return Err(SamplerError::Contract(format!("oracle holds {} residues, query has {n}", self.len())));
        }
        let motion = self.alignment(input);
        let frames = FrameSet(self.frames.0[..n].iter().map(|f| motion.compose(f)).collect());
        Ok(DenoiserOutput {
            logits: Logits::peaked(&Sequence::from_residues(&self.sequence[..n]), ORACLE_MARGIN),
            frames,
            torsions: Some(TorsionSet(self.torsions.0[..n].to_vec())),
        })
    }
}

/// Ground truth for the refine role, a deterministically perturbed target
/// for the sequence-and-backbone role.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedOracle {
    inner: GroundTruthOracle,
    noise_scale: f64,
    seed: u64,
}

/// # Panics
/// When `target` is incomplete or `noise_scale` is negative.
pub fn make_perturbed_oracle(target: &Complex, noise_scale: f64, seed: u64) -> PerturbedOracle {
    assert!(noise_scale >= 0.0, "noise scale must be non-negative");
    let inner = make_ground_truth_oracle(target).expect("perturbed oracle needs a complete target");
    PerturbedOracle { inner, noise_scale, seed }
}

impl PerturbedOracle {
    fn stream(&self, input: &DenoiserInput<'_>) -> ChaCha8Rng {
        let mix = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ input.t_s.to_bits().rotate_left(17)
            ^ input.t_t.to_bits().rotate_left(41)
            ^ input.sequence.len() as u64;
        ChaCha8Rng::seed_from_u64(mix)
    }
}

impl Denoiser for PerturbedOracle {
    fn denoise(&self, input: &DenoiserInput<'_>) -> Result<DenoiserOutput, SamplerError> {
        let mut out = self.inner.denoise(input)?;
        if input.role != Role::SeqBb || self.noise_scale == 0.0 {
            return Ok(out);
        }
        let mut rng = self.stream(input);
        let s = self.noise_scale;
        let mut normal = move || -> f64 { rng.sample(StandardNormal) };
        for (i, f) in out.frames.0.iter_mut().enumerate() {
            let dx = Vec3::new(normal(), normal(), normal()) * s;
            let dr = TangentVector::new(normal(), normal(), normal()).scale(0.05 * s);
            if input.fixed[i] {
                continue;
            }
            f.translation += dx;
            f.rotation = f.rotation.compose(&so3_exp(&dr).expect("small rotation"));
        }
        for (i, row) in out.logits.0.iter_mut().enumerate() {
            for v in row.iter_mut() {
                let e = normal() * s;
                if !input.fixed[i] {
                    *v += e;
                }
            }
        }
        Ok(out)
    }
}

/// Knows nothing: predicts the current frames, echoes decoded tokens and
/// gives masked positions weak position-hashed logits. Sampling with it
/// yields an arbitrary sequence on prior-distributed frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NullDenoiser;

const NULL_ECHO_MARGIN: f64 = 5.0;

fn position_logits(i: usize) -> [f64; crate::seqflow::VOCAB] {
    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
    let mut row = [0.0; crate::seqflow::VOCAB];
    for v in row.iter_mut().take(crate::seqflow::NUM_AA) {
        *v = rng.random::<f64>();
    }
    row
}

impl Denoiser for NullDenoiser {
    fn denoise(&self, input: &DenoiserInput<'_>) -> Result<DenoiserOutput, SamplerError> {
        let aas: Vec<AminoAcid> = input.sequence.0.iter().map(|t| t.aa().unwrap_or(AminoAcid::Gly)).collect();
        let logits = input
            .sequence
            .0
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = position_logits(i);
                if let Some(aa) = t.aa() {
                    row[aa.index()] += NULL_ECHO_MARGIN;
                }
                row
            })
            .collect();
        Ok(DenoiserOutput {
            logits: Logits(logits),
            frames: input.frames.clone(),
            torsions: Some(placeholder_torsions(&aas)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn query<'a>(role: Role, seq: &'a Sequence, frames: &'a FrameSet, fixed: &'a [bool], t: f64) -> DenoiserInput<'a> {
        DenoiserInput { role, sequence: seq, frames, torsions: None, t_s: t, t_t: t, chain_lengths: &[], fixed }
    }

    #[test]
    fn oracle_ignores_noise_level_and_role() {
        let t = synthetic::random_complex(&[9], &mut ChaCha8Rng::seed_from_u64(1));
        let o = make_ground_truth_oracle(&t).unwrap();
        let seq = Sequence::masked(9);
        let frames = FrameSet(vec![RigidTransform::identity(); 9]);
        let fixed = [false; 9];
        let a = o.denoise(&query(Role::SeqBb, &seq, &frames, &fixed, 0.1)).unwrap();
        let b = o.denoise(&query(Role::Refine, &seq, &frames, &fixed, 0.9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames, t.frames());
    }

    #[test]
    fn incomplete_target_is_rejected() {
        let mut t = synthetic::random_complex(&[5], &mut ChaCha8Rng::seed_from_u64(2));
        let i = t.chains[0].residues.iter().position(|r| r.aa.chi_count() > 0).unwrap();
        t.chains[0].torsions.0[i] = crate::allatom::ChiAngles::none();
        assert!(matches!(make_ground_truth_oracle(&t), Err(SamplerError::IncompleteTarget(_))));
    }

    #[test]
    fn fixed_residues_anchor_the_target() {
        let t = synthetic::random_complex(&[6, 4], &mut ChaCha8Rng::seed_from_u64(3));
        let o = make_ground_truth_oracle(&t).unwrap();
        let motion = RigidTransform::random(&mut ChaCha8Rng::seed_from_u64(4), 20.0);
        let moved = t.frames().transformed(&motion);
        let fixed: Vec<bool> = (0..10).map(|i| i < 6).collect();
        let seq = Sequence::masked(10);
        let out = o.denoise(&query(Role::SeqBb, &seq, &moved, &fixed, 0.5)).unwrap();
        for i in 0..10 {
            assert!((out.frames[i].translation - moved[i].translation).norm() < 1e-9);
        }
    }

    #[test]
    fn perturbation_is_deterministic_and_spares_refine() {
        let t = synthetic::random_complex(&[8], &mut ChaCha8Rng::seed_from_u64(5));
        let p = make_perturbed_oracle(&t, 1.0, 9);
        let seq = Sequence::masked(8);
        let frames = t.frames();
        let fixed = [false; 8];
        let a = p.denoise(&query(Role::SeqBb, &seq, &frames, &fixed, 0.3)).unwrap();
        assert_eq!(a, p.denoise(&query(Role::SeqBb, &seq, &frames, &fixed, 0.3)).unwrap());
        assert_ne!(a.frames, t.frames());
        let r = p.denoise(&query(Role::Refine, &seq, &frames, &fixed, 0.3)).unwrap();
        assert_eq!(r.frames, t.frames());
        let zero = make_perturbed_oracle(&t, 0.0, 9);
        assert_eq!(zero.denoise(&query(Role::SeqBb, &seq, &frames, &fixed, 0.3)).unwrap(), r);
    }
}
