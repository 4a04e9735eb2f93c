//! Residue chemistry, backbone frames and sidechain torsions.
//!
//! A residue is fully described by its amino-acid type, its backbone frame
//! and up to four chi angles. [`build_sidechain`] places heavy atoms from
//! that description by chaining the rigid groups of the bundled template
//! table; [`extract_torsions`] reads the chi angles back off atom
//! coordinates.

mod template;

use std::f64::consts::{PI, TAU};
use std::fmt;

use thiserror::Error;

use crate::geom3::{RigidTransform, Rotation, Vec3};

pub use template::{
    templates, AtomSpec, BackboneGeometry, ChiDef, ResidueTemplate, TemplateTable, Torsion,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllAtomError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("missing atom {atom} in {residue}")]
    MissingAtom { residue: String, atom: String },
    #[error("{residue} needs {expected} defined chi angles")]
    ChiArity { residue: String, expected: usize },
    #[error("residue template table: {0}")]
    Template(String),
}

/// The 20 standard amino acids, in the conventional `ARNDCQEGHILKMFPSTWYV`
/// order used for logits columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AminoAcid {
    Ala,
    Arg,
    Asn,
    Asp,
    Cys,
    Gln,
    Glu,
    Gly,
    His,
    Ile,
    Leu,
    Lys,
    Met,
    Phe,
    Pro,
    Ser,
    Thr,
    Trp,
    Tyr,
    Val,
}

const ONE_LETTER: &[u8; 20] = b"ARNDCQEGHILKMFPSTWYV";
const THREE_LETTER: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

impl AminoAcid {
    pub const ALL: [AminoAcid; 20] = [
        AminoAcid::Ala,
        AminoAcid::Arg,
        AminoAcid::Asn,
        AminoAcid::Asp,
        AminoAcid::Cys,
        AminoAcid::Gln,
        AminoAcid::Glu,
        AminoAcid::Gly,
        AminoAcid::His,
        AminoAcid::Ile,
        AminoAcid::Leu,
        AminoAcid::Lys,
        AminoAcid::Met,
        AminoAcid::Phe,
        AminoAcid::Pro,
        AminoAcid::Ser,
        AminoAcid::Thr,
        AminoAcid::Trp,
        AminoAcid::Tyr,
        AminoAcid::Val,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn one(self) -> char {
        ONE_LETTER[self.index()] as char
    }

    pub fn three(self) -> &'static str {
        THREE_LETTER[self.index()]
    }

    pub fn from_one(c: char) -> Option<Self> {
        ONE_LETTER
            .iter()
            .position(|&b| b as char == c.to_ascii_uppercase())
            .and_then(Self::from_index)
    }

    pub fn from_three(s: &str) -> Option<Self> {
        THREE_LETTER
            .iter()
            .position(|&t| t.eq_ignore_ascii_case(s.trim()))
            .and_then(Self::from_index)
    }

    pub fn template(self) -> &'static ResidueTemplate {
        templates().get(self)
    }

    pub fn chi_count(self) -> usize {
        self.template().chi_count()
    }

    /// π-periodic flags for each chi slot.
    pub fn chi_symmetry(self) -> [bool; 4] {
        self.template().symmetry()
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.three())
    }
}

/// One heavy atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub name: String,
    pub element: String,
    pub position: Vec3,
    /// Ordinal of the residue within its chain.
    pub residue_index: usize,
    pub chain_id: char,
    pub b_factor: f64,
}

/// Chi angles of one residue in `[0, 2π)`; `None` marks an undefined slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChiAngles(pub [Option<f64>; 4]);

impl ChiAngles {
    pub fn none() -> Self {
        ChiAngles([None; 4])
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut out = [None; 4];
        for (slot, v) in out.iter_mut().zip(values) {
            *slot = Some(wrap_angle(*v));
        }
        ChiAngles(out)
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.0.get(k).copied().flatten()
    }

    pub fn defined_count(&self) -> usize {
        self.0.iter().filter(|c| c.is_some()).count()
    }

    pub fn mask(&self) -> [bool; 4] {
        self.0.map(|c| c.is_some())
    }
}

/// Per-residue chi angles for a chain or complex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TorsionSet(pub Vec<ChiAngles>);

impl TorsionSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two angles, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

/// Residue frame with origin at CA, x-axis toward C and N in the xy-plane.
pub fn frames_from_backbone(n: &Vec3, ca: &Vec3, c: &Vec3) -> Result<RigidTransform, AllAtomError> {
    if ![n, ca, c].iter().all(|p| p.iter().all(|x| x.is_finite())) {
        return Err(AllAtomError::Degenerate("non-finite backbone coordinate".into()));
    }
    let x = c - ca;
    let u = n - ca;
    let xn = x.norm();
    let un = u.norm();
    if xn < 1e-6 || un < 1e-6 {
        return Err(AllAtomError::Degenerate("coincident backbone atoms".into()));
    }
    let e1 = x / xn;
    let perp = u - e1 * e1.dot(&u);
    if perp.norm() < 1e-6 * un {
        return Err(AllAtomError::Degenerate("collinear N, CA, C".into()));
    }
    let e2 = perp.normalize();
    let e3 = e1.cross(&e2);
    let rot = Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[e1, e2, e3]));
    Ok(RigidTransform::new(rot, *ca))
}

/// Signed torsion about the p2-p3 bond, wrapped to `[0, 2π)`.
pub fn dihedral(p1: &Vec3, p2: &Vec3, p3: &Vec3, p4: &Vec3) -> Result<f64, AllAtomError> {
    let b1 = p2 - p1;
    let b2 = p3 - p2;
    let b3 = p4 - p3;
    let scale = b1.norm().max(b2.norm()).max(b3.norm());
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    let tol = 1e-10 * scale * scale;
    if b2.norm() < 1e-10 * scale.max(1e-300) || n1.norm() <= tol || n2.norm() <= tol {
        return Err(AllAtomError::Degenerate("dihedral with collinear or coincident points".into()));
    }
    let y = b2.norm() * b1.dot(&n2);
    let x = n1.dot(&n2);
    Ok(wrap_angle(y.atan2(x)))
}

// Places d at `length` from c with angle b-c-d and dihedral a-b-c-d.
fn place_atom(a: &Vec3, b: &Vec3, c: &Vec3, length: f64, angle: f64, torsion: f64) -> Vec3 {
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let local = Vec3::new(
        -length * angle.cos(),
        length * angle.sin() * torsion.cos(),
        length * angle.sin() * torsion.sin(),
    );
    c + bc * local.x + m * local.y + n * local.z
}

fn find<'a>(atoms: &'a [AtomRecord], name: &str) -> Option<&'a AtomRecord> {
    atoms.iter().find(|a| a.name == name)
}

/// Chi angles over the template quadruples. Fails on the first missing atom.
pub fn extract_torsions(atoms: &[AtomRecord], aa: AminoAcid) -> Result<ChiAngles, AllAtomError> {
    let mut out = ChiAngles::none();
    for (k, chi) in aa.template().chis.iter().enumerate() {
        let mut pts = [Vec3::zeros(); 4];
        for (p, name) in pts.iter_mut().zip(&chi.atoms) {
            *p = find(atoms, name)
                .ok_or_else(|| AllAtomError::MissingAtom {
                    residue: aa.three().to_string(),
                    atom: name.clone(),
                })?
                .position;
        }
        out.0[k] = Some(dihedral(&pts[0], &pts[1], &pts[2], &pts[3])?);
    }
    Ok(out)
}

/// Like [`extract_torsions`] but leaves chis with missing or degenerate atoms
/// undefined, returning the names of the atoms that were missing.
pub fn extract_torsions_lenient(atoms: &[AtomRecord], aa: AminoAcid) -> (ChiAngles, Vec<String>) {
    let mut out = ChiAngles::none();
    let mut missing = Vec::new();
    for (k, chi) in aa.template().chis.iter().enumerate() {
        let pts: Vec<Option<Vec3>> =
            chi.atoms.iter().map(|n| find(atoms, n).map(|a| a.position)).collect();
        if pts.iter().all(Option::is_some) {
            let p: Vec<Vec3> = pts.into_iter().flatten().collect();
            out.0[k] = dihedral(&p[0], &p[1], &p[2], &p[3]).ok();
        } else {
            for (name, p) in chi.atoms.iter().zip(&pts) {
                if p.is_none() && !missing.contains(name) {
                    missing.push(name.clone());
                }
            }
        }
    }
    (out, missing)
}

/// Places every heavy atom of residue `aa` from its frame and chi angles.
///
/// Atoms are positioned in the local frame by chaining template internal
/// coordinates, so each chi rotates its rigid group about the preceding bond,
/// and then mapped through `frame`. Output order is N, CA, C, O followed by
/// the sidechain in template order. Chi slots beyond the residue's chi count
/// are ignored.
pub fn build_sidechain(
    aa: AminoAcid,
    frame: &RigidTransform,
    chi: &ChiAngles,
) -> Result<Vec<AtomRecord>, AllAtomError> {
    let table = templates();
    let tpl = table.get(aa);
    let nchi = tpl.chi_count();
    if (0..nchi).any(|k| chi.get(k).is_none()) {
        return Err(AllAtomError::ChiArity { residue: aa.three().into(), expected: nchi });
    }
    let bb = &table.backbone;
    let [n, ca, c] = bb.local_n_ca_c();
    let o = place_atom(&n, &ca, &c, bb.c_o, bb.ca_c_o, bb.n_ca_c_o);

    let mut names: Vec<&str> = vec!["N", "CA", "C", "O"];
    let mut elements: Vec<&str> = vec!["N", "C", "C", "O"];
    let mut local: Vec<Vec3> = vec![n, ca, c, o];
    for spec in &tpl.atoms {
        let lookup = |name: &str| -> Vec3 {
            // Parents are validated to precede the atom when the table loads.
            local[names.iter().position(|&x| x == name).expect("validated parent")]
        };
        let (pa, pb, pc) = (lookup(&spec.parents[0]), lookup(&spec.parents[1]), lookup(&spec.parents[2]));
        let torsion = match spec.torsion {
            Torsion::Fixed(v) => v,
            Torsion::Chi { index, offset } => chi.get(index).unwrap_or(0.0) + offset,
        };
        local.push(place_atom(&pa, &pb, &pc, spec.length, spec.angle, torsion));
        names.push(&spec.name);
        elements.push(&spec.element);
    }

    Ok(names
        .iter()
        .zip(elements)
        .zip(local)
        .map(|((name, element), p)| AtomRecord {
            name: name.to_string(),
            element: element.to_string(),
            position: frame.apply(&p),
            residue_index: 0,
            chain_id: 'A',
            b_factor: 0.0,
        })
        .collect())
}

/// One frame per chi rigid group: origin at the third quadruple atom, x-axis
/// along the rotatable bond and the xy-plane containing the fourth atom, so
/// each frame moves with its group.
pub fn chi_group_frames(aa: AminoAcid, atoms: &[AtomRecord]) -> Result<Vec<RigidTransform>, AllAtomError> {
    let mut frames = Vec::new();
    for chi in &aa.template().chis {
        let get = |name: &str| {
            find(atoms, name).map(|a| a.position).ok_or_else(|| AllAtomError::MissingAtom {
                residue: aa.three().into(),
                atom: name.into(),
            })
        };
        let (b, c, d) = (get(&chi.atoms[1])?, get(&chi.atoms[2])?, get(&chi.atoms[3])?);
        // frames_from_backbone(n=d, ca=c, c=c + (c - b)) yields exactly this frame.
        frames.push(frames_from_backbone(&d, &c, &(c + (c - b)))?);
    }
    Ok(frames)
}

/// Maps π-periodic chis into `[0, π)`; other chis are returned unchanged.
pub fn canonicalize_chi(aa: AminoAcid, chi: &ChiAngles) -> ChiAngles {
    let sym = aa.chi_symmetry();
    let mut out = *chi;
    for (k, slot) in out.0.iter_mut().enumerate() {
        if let (Some(v), true) = (*slot, sym[k]) {
            let w = v.rem_euclid(PI);
            *slot = Some(if w >= PI { 0.0 } else { w });
        }
    }
    out
}
