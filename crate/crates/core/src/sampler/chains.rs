//! Chain-by-chain complex generation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run_conditional, Condition, Denoiser, LogRecord, SamplerConfig, SamplerError, SamplingResult};
use crate::geom3::{RigidTransform, Vec3};

/// How the generated part was moved before the next chain was added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Index of the chain generated after this placement.
    pub chain: usize,
    /// Rank of the binding-site residue by distance to the centroid.
    pub rank: usize,
    pub residue: usize,
    /// Unit direction of the applied translation.
    pub direction: [f64; 3],
    pub shift: f64,
    /// CA of the binding-site residue after placement.
    pub position: [f64; 3],
}

/// Picks a residue whose CA rank by distance to the CA centroid falls in
/// `[ceil(lo·n), floor(hi·n))`. Returns `(rank, residue index)`.
pub fn choose_binding_residue<R: Rng + ?Sized>(ca: &[Vec3], window: [f64; 2], rng: &mut R) -> (usize, usize) {
    let n = ca.len();
    assert!(n > 0, "binding-site choice needs residues");
    let centroid = ca.iter().sum::<Vec3>() / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| (ca[i] - centroid).norm().total_cmp(&(ca[j] - centroid).norm()).then(i.cmp(&j)));
    let lo = ((window[0] * n as f64).ceil() as usize).min(n - 1);
    let hi = ((window[1] * n as f64).floor() as usize).min(n);
    let rank = if hi > lo { rng.random_range(lo..hi) } else { lo };
    (rank, order[rank])
}

/// Generates chains one at a time. Before each new chain the generated part
/// is translated so that a mid-ranked residue sits `binding_shift` Å from
/// the origin, where the new chain's prior is centred, and then held fixed.
pub fn chain_by_chain<D, R>(denoiser: &D, lengths: &[usize], cfg: &SamplerConfig, rng: &mut R) -> Result<SamplingResult, SamplerError>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    if lengths.len() < 2 {
        return Err(SamplerError::TooFewChains(lengths.len()));
    }
    let mut result = run_conditional(denoiser, &lengths[..1], None, cfg, rng)?;
    let mut log = result.log.clone();
    for c in 1..lengths.len() {
        let ca = result.frames.translations();
        let (rank, residue) = choose_binding_residue(&ca, cfg.binding_window, rng);
        let p = ca[residue];
        let direction = if p.norm() > 1e-12 { -p / p.norm() } else { Vec3::new(1.0, 0.0, 0.0) };
        let motion = RigidTransform::from_translation(-p + direction * cfg.binding_shift);
        let condition = Condition {
            sequence: result.sequence.clone(),
            frames: result.frames.transformed(&motion),
            torsions: result.torsions.clone(),
        };
        let placed = condition.frames[residue].translation;
        log.push(LogRecord::Placement(Placement {
            chain: c,
            rank,
            residue,
            direction: direction.into(),
            shift: cfg.binding_shift,
            position: placed.into(),
        }));
        result = run_conditional(denoiser, &lengths[..=c], Some(&condition), cfg, rng)?;
        log.extend(result.log.iter().map(|r| match r {
            LogRecord::Step(s) => LogRecord::Step(super::StepRecord { stage: c, ..s.clone() }),
            other => other.clone(),
        }));
    }
    result.log = log;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::kabsch_rmsd;
    use crate::sampler::make_ground_truth_oracle;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_stays_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 3, 10, 37, 100] {
            let ca: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 20.0).collect();
            let lo = ((0.33 * n as f64).ceil() as usize).min(n - 1);
            let hi = ((0.66 * n as f64).floor() as usize).max(lo);
            for _ in 0..1000 {
                let (rank, _) = choose_binding_residue(&ca, [0.33, 0.66], &mut rng);
                assert!(rank >= lo && rank <= hi, "n={n} rank={rank}");
            }
        }
    }

    #[test]
    fn two_chains_follow_the_oracle() {
        let target = synthetic::interface_complex(&[14, 10], &mut ChaCha8Rng::seed_from_u64(2));
        let oracle = make_ground_truth_oracle(&target).unwrap();
        let r = chain_by_chain(&oracle, &[14, 10], &SamplerConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(r.complex.chain_lengths(), vec![14, 10]);
        assert_eq!(r.complex.sequence(), target.sequence());
        assert!(kabsch_rmsd(&r.complex.ca_positions(), &target.ca_positions()).unwrap() < 1e-6);
        let placement = r.log.iter().find_map(|l| match l {
            LogRecord::Placement(p) => Some(*p),
            _ => None,
        });
        let p = placement.expect("placement recorded");
        let pos = Vec3::from(p.position);
        let dir = Vec3::from(p.direction);
        assert!((pos.norm() - 1.0).abs() < 1e-12);
        assert!((pos - dir).norm() < 1e-12);
        // The first chain keeps its placed coordinates in the final complex.
        let final_ca = r.complex.ca_positions()[p.residue];
        assert!((final_ca - pos).norm() < 1e-9);
    }

    #[test]
    fn single_chain_is_rejected() {
        let target = synthetic::random_complex(&[5], &mut ChaCha8Rng::seed_from_u64(4));
        let oracle = make_ground_truth_oracle(&target).unwrap();
        let err = chain_by_chain(&oracle, &[5], &SamplerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(SamplerError::TooFewChains(1))));
    }
}
