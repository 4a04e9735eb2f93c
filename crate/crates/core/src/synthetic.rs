//! Synthetic complexes for fixtures, examples and oracle targets.
//!
//! Chains are ideal α-helices with random residue types and chi angles. The
//! geometry is plausible at the backbone level only; sidechains may clash.

use std::f64::consts::TAU;

use nalgebra::Matrix3;
use rand::Rng;

use crate::allatom::{AminoAcid, ChiAngles, TorsionSet};
use crate::flowmatch::FrameSet;
use crate::geom3::{RigidTransform, Rotation, Vec3};
use crate::proteinio::{chain_letter, Chain, Complex};

const HELIX_RADIUS: f64 = 2.3;
const HELIX_RISE: f64 = 1.5;
const HELIX_TWIST: f64 = 100.0;

/// Frames along an α-helix whose axis runs along +z through `axis_origin`.
pub fn helix_frames(n: usize, axis_origin: Vec3, phase: f64) -> FrameSet {
    let w = HELIX_TWIST.to_radians();
    let ca = |i: f64| {
        let a = phase + i * w;
        axis_origin + Vec3::new(HELIX_RADIUS * a.cos(), HELIX_RADIUS * a.sin(), i * HELIX_RISE)
    };
    FrameSet(
        (0..n)
            .map(|i| {
                let x = i as f64;
                let tangent = (ca(x + 1.0) - ca(x - 1.0)).normalize();
                let radial = {
                    let a = phase + x * w;
                    Vec3::new(a.cos(), a.sin(), 0.0)
                };
                let m = Matrix3::from_columns(&[tangent, radial, tangent.cross(&radial)]);
                RigidTransform::new(Rotation::orthonormalized(&m), ca(x))
            })
            .collect(),
    )
}

pub fn random_residues<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<AminoAcid> {
    (0..n).map(|_| AminoAcid::ALL[rng.random_range(0..AminoAcid::ALL.len())]).collect()
}

pub fn random_torsions<R: Rng + ?Sized>(aas: &[AminoAcid], rng: &mut R) -> TorsionSet {
    TorsionSet(
        aas.iter()
            .map(|a| {
                let v: Vec<f64> = (0..a.chi_count()).map(|_| rng.random_range(0.0..TAU)).collect();
                ChiAngles::from_slice(&v)
            })
            .collect(),
    )
}

fn build(lengths: &[usize], axes: &[Vec3], rng: &mut (impl Rng + ?Sized)) -> Complex {
    let chains = lengths
        .iter()
        .zip(axes)
        .enumerate()
        .map(|(k, (&n, &axis))| {
            let aas = random_residues(n, rng);
            let chi = random_torsions(&aas, rng);
            let phase = rng.random_range(0.0..TAU);
            Chain::build(chain_letter(k), &aas, &helix_frames(n, axis, phase), &chi)
                .expect("helix frames and generated chis are consistent")
        })
        .collect();
    Complex::new(chains)
}

/// Helical chains whose axes are 40 Å apart, so chains do not touch.
pub fn random_complex<R: Rng + ?Sized>(lengths: &[usize], rng: &mut R) -> Complex {
    let axes: Vec<Vec3> = (0..lengths.len()).map(|k| Vec3::new(40.0 * k as f64, 0.0, 0.0)).collect();
    build(lengths, &axes, rng)
}

/// Parallel helical chains packed around a common centre with about 10 Å
/// between neighbouring axes, giving a dense inter-chain interface.
pub fn interface_complex<R: Rng + ?Sized>(lengths: &[usize], rng: &mut R) -> Complex {
    let k = lengths.len().max(1) as f64;
    let ring = if lengths.len() <= 1 { 0.0 } else { 5.0 / (std::f64::consts::PI / k).sin() };
    let axes: Vec<Vec3> = (0..lengths.len())
        .map(|i| {
            let a = TAU * i as f64 / k;
            Vec3::new(ring * a.cos(), ring * a.sin(), 0.0)
        })
        .collect();
    build(lengths, &axes, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allatom::frames_from_backbone;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn helix_has_expected_ca_spacing() {
        let f = helix_frames(20, Vec3::zeros(), 0.3);
        for w in f.0.windows(2) {
            let d = (w[1].translation - w[0].translation).norm();
            assert!((d - 3.8).abs() < 0.1, "{d}");
        }
    }

    #[test]
    fn built_atoms_reproduce_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_complex(&[8, 6], &mut rng);
        for ch in &c.chains {
            for (r, f) in ch.residues.iter().zip(ch.frames.iter()) {
                let g = frames_from_backbone(&r.atoms[0].position, &r.atoms[1].position, &r.atoms[2].position).unwrap();
                assert!((g.rotation.matrix() - f.rotation.matrix()).amax() < 1e-9);
                assert!((g.translation - f.translation).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn neighbouring_axes_are_ten_angstrom_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for lens in [vec![5, 5], vec![5, 5, 5]] {
            let c = interface_complex(&lens, &mut rng);
            let a = c.chains[0].frames[0].translation;
            let b = c.chains[1].frames[0].translation;
            let axis_gap = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            assert!(axis_gap > 10.0 - 2.0 * HELIX_RADIUS - 1e-9 && axis_gap < 10.0 + 2.0 * HELIX_RADIUS + 1e-9);
        }
    }
}
