//! Multi-chain complexes: PDB input/output, curation and cropping.

mod crop;
mod curate;
mod pdb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allatom::{
    build_sidechain, extract_torsions_lenient, frames_from_backbone, AllAtomError, AminoAcid,
    AtomRecord, ChiAngles, TorsionSet,
};
use crate::flowmatch::FrameSet;
use crate::geom3::{RigidTransform, Vec3};
use crate::seqflow::Sequence;

pub use crop::{crop_interface, find_interface_pairs, CropRecord, CropSpec, InterfacePair, ResidueRef};
pub use curate::{curate, CurationItem, CurationPolicy, CurationRecord, DropReason, SourceTag, Verdict};
pub use pdb::{parse_pdb, write_pdb, ParseWarning, Parsed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProteinIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no valid chains in structure")]
    EmptyComplex,
    #[error("unknown source tag {0:?}")]
    UnknownSource(String),
    #[error("interface search needs at least two chains")]
    SingleChain,
    #[error("no inter-chain residue pair within the interface cutoff")]
    NoInterface,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    AllAtom(#[from] AllAtomError),
}

/// One residue of a chain: its type, PDB numbering and heavy atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub aa: AminoAcid,
    pub number: i32,
    pub insertion: char,
    pub atoms: Vec<AtomRecord>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<&AtomRecord> {
        self.atoms.iter().find(|a| a.name == name)
    }

    pub fn ca(&self) -> Option<Vec3> {
        self.atom("CA").map(|a| a.position)
    }

    /// CB, or CA for glycine and residues missing CB.
    pub fn representative(&self) -> Option<Vec3> {
        self.atom("CB").or_else(|| self.atom("CA")).map(|a| a.position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub id: char,
    pub residues: Vec<Residue>,
    pub frames: FrameSet,
    pub torsions: TorsionSet,
}

impl Chain {
    /// Derives frames and torsions from residue atoms. Every residue must
    /// carry N, CA and C; chis with missing atoms are left undefined.
    pub fn from_residues(id: char, residues: Vec<Residue>) -> Result<Self, ProteinIoError> {
        let mut frames = Vec::with_capacity(residues.len());
        let mut torsions = Vec::with_capacity(residues.len());
        for r in &residues {
            let get = |n: &str| {
                r.atom(n).map(|a| a.position).ok_or_else(|| AllAtomError::MissingAtom {
                    residue: r.aa.three().into(),
                    atom: n.into(),
                })
            };
            frames.push(frames_from_backbone(&get("N")?, &get("CA")?, &get("C")?)?);
            torsions.push(extract_torsions_lenient(&r.atoms, r.aa).0);
        }
        Ok(Chain { id, residues, frames: FrameSet(frames), torsions: TorsionSet(torsions) })
    }

    /// Builds all heavy atoms from residue types, frames and chi angles.
    pub fn build(
        id: char,
        residues: &[AminoAcid],
        frames: &FrameSet,
        torsions: &TorsionSet,
    ) -> Result<Self, ProteinIoError> {
        if residues.len() != frames.len() || residues.len() != torsions.len() {
            return Err(ProteinIoError::InvalidArgument(format!(
                "chain {id}: {} residues, {} frames, {} torsion rows",
                residues.len(),
                frames.len(),
                torsions.len()
            )));
        }
        let mut out = Vec::with_capacity(residues.len());
        for (i, ((&aa, f), chi)) in residues.iter().zip(frames.iter()).zip(&torsions.0).enumerate() {
            let mut atoms = build_sidechain(aa, f, chi)?;
            for a in &mut atoms {
                a.residue_index = i;
                a.chain_id = id;
            }
            out.push(Residue { aa, number: i as i32 + 1, insertion: ' ', atoms });
        }
        Ok(Chain { id, residues: out, frames: frames.clone(), torsions: torsions.clone() })
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn sequence(&self) -> Sequence {
        Sequence::from_residues(&self.aas())
    }

    pub fn aas(&self) -> Vec<AminoAcid> {
        self.residues.iter().map(|r| r.aa).collect()
    }

    /// Residues restricted to `keep` (sorted indices).
    fn select(&self, keep: &[usize]) -> Chain {
        let mut residues: Vec<Residue> = keep.iter().map(|&i| self.residues[i].clone()).collect();
        for (j, r) in residues.iter_mut().enumerate() {
            for a in &mut r.atoms {
                a.residue_index = j;
            }
        }
        Chain {
            id: self.id,
            residues,
            frames: FrameSet(keep.iter().map(|&i| self.frames[i]).collect()),
            torsions: TorsionSet(keep.iter().map(|&i| self.torsions.0[i]).collect()),
        }
    }

    /// Applies a rigid motion to atoms and frames.
    pub fn transform(&mut self, t: &RigidTransform) {
        for r in &mut self.residues {
            for a in &mut r.atoms {
                a.position = t.apply(&a.position);
            }
        }
        self.frames = self.frames.transformed(t);
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    pub source_id: String,
    /// Per-residue confidence, concatenated over chains.
    pub plddt: Option<Vec<f64>>,
    pub cluster_id: Option<String>,
    /// Full-length chain sequences before cropping, as `(chain id, sequence)`.
    pub parent_sequences: Option<Vec<(char, String)>>,
    pub crop: Option<CropRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Complex {
    pub chains: Vec<Chain>,
    pub metadata: Metadata,
}

impl Complex {
    pub fn new(chains: Vec<Chain>) -> Self {
        Complex { chains, metadata: Metadata::default() }
    }

    /// Total residue count.
    pub fn len(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn chain_lengths(&self) -> Vec<usize> {
        self.chains.iter().map(Chain::len).collect()
    }

    pub fn residues(&self) -> impl Iterator<Item = &Residue> {
        self.chains.iter().flat_map(|c| c.residues.iter())
    }

    pub fn sequence(&self) -> Sequence {
        Sequence(self.chains.iter().flat_map(|c| c.sequence().0).collect())
    }

    pub fn frames(&self) -> FrameSet {
        FrameSet(self.chains.iter().flat_map(|c| c.frames.0.iter().copied()).collect())
    }

    pub fn torsions(&self) -> TorsionSet {
        TorsionSet(self.chains.iter().flat_map(|c| c.torsions.0.iter().copied()).collect())
    }

    /// CA positions from the residue frames, concatenated over chains.
    pub fn ca_positions(&self) -> Vec<Vec3> {
        self.frames().translations()
    }

    /// Atom lists per residue, concatenated over chains.
    pub fn residue_atoms(&self) -> Vec<Vec<AtomRecord>> {
        self.residues().map(|r| r.atoms.clone()).collect()
    }

    /// Builds an all-atom complex from per-residue predictions, splitting
    /// them into chains `A`, `B`, ... of the given lengths.
    pub fn assemble(
        lengths: &[usize],
        residues: &[AminoAcid],
        frames: &FrameSet,
        torsions: &TorsionSet,
    ) -> Result<Self, ProteinIoError> {
        let total: usize = lengths.iter().sum();
        if residues.len() != total || frames.len() != total || torsions.len() != total {
            return Err(ProteinIoError::InvalidArgument("prediction size does not match chain lengths".into()));
        }
        let mut chains = Vec::with_capacity(lengths.len());
        let mut start = 0;
        for (k, &n) in lengths.iter().enumerate() {
            let id = chain_letter(k);
            let range = start..start + n;
            chains.push(Chain::build(
                id,
                &residues[range.clone()],
                &FrameSet(frames.0[range.clone()].to_vec()),
                &TorsionSet(torsions.0[range].to_vec()),
            )?);
            start += n;
        }
        Ok(Complex::new(chains))
    }

    pub fn transform(&mut self, t: &RigidTransform) {
        for c in &mut self.chains {
            c.transform(t);
        }
    }

    /// Mean of the per-residue confidence values, if present.
    pub fn mean_plddt(&self) -> Option<f64> {
        self.metadata
            .plddt
            .as_ref()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-residue CA B-factors, the conventional home of predicted-structure
    /// confidence.
    pub fn ca_b_factors(&self) -> Vec<f64> {
        self.residues().map(|r| r.atom("CA").map_or(0.0, |a| a.b_factor)).collect()
    }
}

/// Chain identifiers `A`..`Z`, then `a`..`z`, then digits.
pub fn chain_letter(k: usize) -> char {
    const IDS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    IDS[k % IDS.len()] as char
}

/// Default chi angles for residues whose torsions are unknown.
pub fn placeholder_torsions(aas: &[AminoAcid]) -> TorsionSet {
    TorsionSet(
        aas.iter()
            .map(|a| ChiAngles::from_slice(&vec![std::f64::consts::PI; a.chi_count()]))
            .collect(),
    )
}
