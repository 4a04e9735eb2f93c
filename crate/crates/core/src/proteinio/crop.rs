//! Interface detection and interface-centred cropping.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Complex, ProteinIoError};
use crate::geom3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropSpec {
    pub max_residues: usize,
    /// Contact cutoff in Å between CB atoms (CA when CB is absent).
    pub interface_cutoff: f64,
}

impl Default for CropSpec {
    fn default() -> Self {
        Self { max_residues: 384, interface_cutoff: 8.0 }
    }
}

impl CropSpec {
    pub fn validate(&self) -> Result<(), ProteinIoError> {
        if self.max_residues == 0 || !(self.interface_cutoff > 0.0) {
            return Err(ProteinIoError::InvalidArgument("crop budget and cutoff must be positive".into()));
        }
        Ok(())
    }
}

/// Position of a residue as (chain index, residue index within chain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResidueRef {
    pub chain: usize,
    pub residue: usize,
}

/// Inter-chain contact with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfacePair {
    pub a: ResidueRef,
    pub b: ResidueRef,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub pair: InterfacePair,
    pub original_len: usize,
    /// Kept residues in the parent complex, in output order.
    pub kept: Vec<ResidueRef>,
}

fn refs(c: &Complex) -> Vec<ResidueRef> {
    c.chains
        .iter()
        .enumerate()
        .flat_map(|(ci, ch)| (0..ch.len()).map(move |ri| ResidueRef { chain: ci, residue: ri }))
        .collect()
}

/// All inter-chain residue pairs whose representative atoms lie within
/// `cutoff`, sorted lexicographically.
pub fn find_interface_pairs(c: &Complex, cutoff: f64) -> Result<Vec<InterfacePair>, ProteinIoError> {
    if c.chains.len() < 2 {
        return Err(ProteinIoError::SingleChain);
    }
    if !(cutoff > 0.0) {
        return Err(ProteinIoError::InvalidArgument("interface cutoff must be positive".into()));
    }
    let ids = refs(c);
    let points: Vec<Vec3> = c
        .residues()
        .map(|r| r.representative().expect("parsed residues carry CA"))
        .collect();
    let cell = |p: &Vec3| -> (i64, i64, i64) {
        ((p.x / cutoff).floor() as i64, (p.y / cutoff).floor() as i64, (p.z / cutoff).floor() as i64)
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &j in bucket {
                        if j <= i || ids[j].chain == ids[i].chain {
                            continue;
                        }
                        let d = (points[j] - p).norm();
                        if d <= cutoff {
                            pairs.push(InterfacePair { a: ids[i], b: ids[j], distance: d });
                        }
                    }
                }
            }
        }
    }
    pairs.sort_by_key(|x| (x.a, x.b));
    Ok(pairs)
}

/// Keeps the `max_residues` residues whose CA lies nearest the midpoint of a
/// randomly chosen interface pair. Complexes within budget are returned
/// unchanged.
pub fn crop_interface<R: Rng + ?Sized>(c: &Complex, spec: &CropSpec, rng: &mut R) -> Result<Complex, ProteinIoError> {
    spec.validate()?;
    let n = c.len();
    if n <= spec.max_residues {
        return Ok(c.clone());
    }
    let pairs = find_interface_pairs(c, spec.interface_cutoff)?;
    if pairs.is_empty() {
        return Err(ProteinIoError::NoInterface);
    }
    let pair = pairs[rng.random_range(0..pairs.len())];
    let ids = refs(c);
    let ca = c.ca_positions();
    let global = |r: ResidueRef| ids.iter().position(|x| *x == r).expect("pair refers to an existing residue");
    let (ga, gb) = (global(pair.a), global(pair.b));
    let mid = (ca[ga] + ca[gb]) / 2.0;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| (ca[i] - mid).norm().total_cmp(&(ca[j] - mid).norm()).then(i.cmp(&j)));
    let mut chosen: Vec<usize> = order[..spec.max_residues].to_vec();
    // Guarantee the anchoring pair survives even under distance ties.
    for g in [ga, gb] {
        if !chosen.contains(&g) {
            let slot = chosen.iter().rposition(|&x| x != ga && x != gb).expect("budget holds the pair");
            chosen[slot] = g;
        }
    }
    chosen.sort_unstable();

    let mut chains = Vec::new();
    let mut kept = Vec::with_capacity(chosen.len());
    for (ci, ch) in c.chains.iter().enumerate() {
        let keep: Vec<usize> = chosen.iter().filter(|&&g| ids[g].chain == ci).map(|&g| ids[g].residue).collect();
        if keep.is_empty() {
            continue;
        }
        kept.extend(keep.iter().map(|&r| ResidueRef { chain: ci, residue: r }));
        chains.push(ch.select(&keep));
    }
    let mut out = Complex::new(chains);
    out.metadata = c.metadata.clone();
    out.metadata.plddt = c.metadata.plddt.as_ref().map(|v| chosen.iter().map(|&g| v[g]).collect());
    out.metadata.parent_sequences = Some(c.chains.iter().map(|ch| (ch.id, ch.sequence().to_string())).collect());
    out.metadata.crop = Some(CropRecord { pair, original_len: n, kept });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::RigidTransform;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(c: &Complex, cutoff: f64) -> Vec<(ResidueRef, ResidueRef)> {
        let mut out = Vec::new();
        for (ci, a) in c.chains.iter().enumerate() {
            for (cj, b) in c.chains.iter().enumerate().skip(ci + 1) {
                for (ri, x) in a.residues.iter().enumerate() {
                    for (rj, y) in b.residues.iter().enumerate() {
                        let px = x.atom("CB").or(x.atom("CA")).unwrap().position;
                        let py = y.atom("CB").or(y.atom("CA")).unwrap().position;
                        if (px - py).norm() <= cutoff {
                            out.push((ResidueRef { chain: ci, residue: ri }, ResidueRef { chain: cj, residue: rj }));
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn distant_chains_have_no_interface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = synthetic::random_complex(&[10, 10], &mut rng);
        c.chains[1].transform(&RigidTransform::from_translation(Vec3::new(100.0, 0.0, 0.0)));
        assert!(find_interface_pairs(&c, 8.0).unwrap().is_empty());
        let single = synthetic::random_complex(&[10], &mut rng);
        assert_eq!(find_interface_pairs(&single, 8.0), Err(ProteinIoError::SingleChain));
    }

    #[test]
    fn single_contact_fixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = synthetic::random_complex(&[1, 1], &mut rng);
        let a = c.chains[0].residues[0].representative().unwrap();
        let b = c.chains[1].residues[0].representative().unwrap();
        let dir = Vec3::new(1.0, 0.0, 0.0);
        c.chains[1].transform(&RigidTransform::from_translation(a + dir * 7.9 - b));
        let pairs = find_interface_pairs(&c, 8.0).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].distance - 7.9).abs() < 1e-9);
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let c = synthetic::interface_complex(&[40, 35, 30], &mut rng);
            for cutoff in [4.0, 8.0, 12.0] {
                let fast: Vec<_> = find_interface_pairs(&c, cutoff).unwrap().iter().map(|p| (p.a, p.b)).collect();
                assert_eq!(fast, brute_force(&c, cutoff));
            }
        }
    }

    #[test]
    fn within_budget_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = synthetic::interface_complex(&[200, 184], &mut rng);
        assert_eq!(crop_interface(&c, &CropSpec::default(), &mut rng).unwrap(), c);
    }

    #[test]
    fn crop_keeps_budget_and_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = synthetic::interface_complex(&[250, 250], &mut rng);
        for seed in 0..100 {
            let out = crop_interface(&c, &CropSpec::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(out.len(), 384);
            let rec = out.metadata.crop.as_ref().unwrap();
            assert!(rec.kept.contains(&rec.pair.a) && rec.kept.contains(&rec.pair.b));
            // Per-chain order is preserved.
            assert!(rec.kept.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(out.metadata.parent_sequences.as_ref().unwrap()[0].1.len(), 250);
        }
    }

    #[test]
    fn crop_is_seed_deterministic_and_needs_interface() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = synthetic::interface_complex(&[250, 250], &mut rng);
        let a = crop_interface(&c, &CropSpec::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = crop_interface(&c, &CropSpec::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let mut apart = c.clone();
        apart.chains[1].transform(&RigidTransform::from_translation(Vec3::new(500.0, 0.0, 0.0)));
        assert_eq!(crop_interface(&apart, &CropSpec::default(), &mut rng), Err(ProteinIoError::NoInterface));
    }
}
