//! Build side chains from chi angles, then measure the angles back.

use std::f64::consts::PI;

use protgen::allatom::{build_sidechain, canonicalize_chi, extract_torsions, AminoAcid, ChiAngles};
use protgen::geom3::RigidTransform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for aa in [AminoAcid::Ser, AminoAcid::Phe, AminoAcid::Lys, AminoAcid::Arg, AminoAcid::Asp] {
        let chi: Vec<f64> = (0..aa.chi_count()).map(|_| rng.random_range(-PI..PI)).collect();
        let chi = ChiAngles::from_slice(&chi);
        let frame = RigidTransform::random(&mut rng, 10.0);
        let atoms = build_sidechain(aa, &frame, &chi)?;
        let measured = extract_torsions(&atoms, aa)?;
        let names: Vec<&str> = atoms.iter().map(|a| a.name.as_str()).collect();
        println!("{} atoms [{}]", aa.three(), names.join(" "));
        for k in 0..aa.chi_count() {
            let (want, got) = (canonicalize_chi(aa, &chi).get(k).unwrap(), canonicalize_chi(aa, &measured).get(k).unwrap());
            let sym = if aa.chi_symmetry()[k] { " (π-symmetric)" } else { "" };
            println!("  chi{} set {:+.4}  measured {:+.4}{sym}", k + 1, want, got);
        }
    }
    Ok(())
}
