//! Loader for the bundled residue template table (`data/residue_templates.txt`).

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{AllAtomError, AminoAcid};
use crate::geom3::Vec3;

const TEMPLATE_TEXT: &str = include_str!("../../data/residue_templates.txt");

/// Dihedral source for a placed atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Torsion {
    Fixed(f64),
    /// `chi[index] + offset`, in radians.
    Chi { index: usize, offset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomSpec {
    pub name: String,
    pub element: String,
    pub parents: [String; 3],
    pub length: f64,
    /// Bond angle in radians.
    pub angle: f64,
    pub torsion: Torsion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiDef {
    pub atoms: [String; 4],
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGeometry {
    pub n_ca: f64,
    pub ca_c: f64,
    pub n_ca_c: f64,
    pub c_o: f64,
    pub ca_c_o: f64,
    pub n_ca_c_o: f64,
}

impl BackboneGeometry {
    /// N, CA, C in the local residue frame.
    pub fn local_n_ca_c(&self) -> [Vec3; 3] {
        let n = Vec3::new(self.n_ca_c.cos(), self.n_ca_c.sin(), 0.0) * self.n_ca;
        [n, Vec3::zeros(), Vec3::new(self.ca_c, 0.0, 0.0)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidueTemplate {
    pub aa: AminoAcid,
    /// Sidechain atoms in placement order (CB first). Backbone atoms are
    /// shared and live in [`TemplateTable::backbone`].
    pub atoms: Vec<AtomSpec>,
    pub chis: Vec<ChiDef>,
}

impl ResidueTemplate {
    pub fn chi_count(&self) -> usize {
        self.chis.len()
    }

    pub fn symmetry(&self) -> [bool; 4] {
        let mut flags = [false; 4];
        for (i, c) in self.chis.iter().enumerate() {
            flags[i] = c.periodic;
        }
        flags
    }

    /// Heavy-atom names including the backbone, in output order.
    pub fn atom_names(&self) -> Vec<&str> {
        let mut names = vec!["N", "CA", "C", "O"];
        names.extend(self.atoms.iter().map(|a| a.name.as_str()));
        names
    }
}

#[derive(Debug, Clone)]
pub struct TemplateTable {
    pub backbone: BackboneGeometry,
    residues: Vec<ResidueTemplate>,
}

impl TemplateTable {
    pub fn get(&self, aa: AminoAcid) -> &ResidueTemplate {
        &self.residues[aa.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ResidueTemplate> {
        self.residues.iter()
    }

    pub fn parse(text: &str) -> Result<Self, AllAtomError> {
        let bad = |line: usize, msg: &str| AllAtomError::Template(format!("line {line}: {msg}"));
        let mut backbone = None;
        let mut residues: HashMap<AminoAcid, ResidueTemplate> = HashMap::new();
        let mut current: Option<ResidueTemplate> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<f64, AllAtomError> {
                s.parse::<f64>().map_err(|_| bad(line_no, &format!("bad number {s:?}")))
            };
            match fields[0] {
                "BACKBONE" => {
                    if fields.len() != 7 {
                        return Err(bad(line_no, "BACKBONE takes 6 values"));
                    }
                    backbone = Some(BackboneGeometry {
                        n_ca: num(fields[1])?,
                        ca_c: num(fields[2])?,
                        n_ca_c: num(fields[3])?.to_radians(),
                        c_o: num(fields[4])?,
                        ca_c_o: num(fields[5])?.to_radians(),
                        n_ca_c_o: num(fields[6])?.to_radians(),
                    });
                }
                "RESIDUE" => {
                    if current.is_some() {
                        return Err(bad(line_no, "nested RESIDUE"));
                    }
                    let aa = fields
                        .get(1)
                        .and_then(|s| AminoAcid::from_three(s))
                        .ok_or_else(|| bad(line_no, "unknown residue"))?;
                    current = Some(ResidueTemplate { aa, atoms: Vec::new(), chis: Vec::new() });
                }
                "ATOM" => {
                    let res = current.as_mut().ok_or_else(|| bad(line_no, "ATOM outside RESIDUE"))?;
                    if fields.len() != 9 {
                        return Err(bad(line_no, "ATOM takes 8 values"));
                    }
                    let torsion = parse_torsion(fields[8]).ok_or_else(|| bad(line_no, "bad torsion"))?;
                    res.atoms.push(AtomSpec {
                        name: fields[1].to_string(),
                        element: fields[2].to_string(),
                        parents: [fields[3].into(), fields[4].into(), fields[5].into()],
                        length: num(fields[6])?,
                        angle: num(fields[7])?.to_radians(),
                        torsion,
                    });
                }
                "CHI" => {
                    let res = current.as_mut().ok_or_else(|| bad(line_no, "CHI outside RESIDUE"))?;
                    if !(fields.len() == 6 || (fields.len() == 7 && fields[6] == "periodic")) {
                        return Err(bad(line_no, "CHI takes an index, 4 atoms and an optional `periodic`"));
                    }
                    let k: usize = fields[1].parse().map_err(|_| bad(line_no, "bad chi index"))?;
                    if k != res.chis.len() + 1 {
                        return Err(bad(line_no, "chis must be listed in order"));
                    }
                    res.chis.push(ChiDef {
                        atoms: [fields[2].into(), fields[3].into(), fields[4].into(), fields[5].into()],
                        periodic: fields.len() == 7,
                    });
                }
                "END" => {
                    let res = current.take().ok_or_else(|| bad(line_no, "END without RESIDUE"))?;
                    validate(&res).map_err(|m| bad(line_no, &m))?;
                    if residues.insert(res.aa, res).is_some() {
                        return Err(bad(line_no, "duplicate residue"));
                    }
                }
                other => return Err(bad(line_no, &format!("unknown record {other}"))),
            }
        }
        if current.is_some() {
            return Err(AllAtomError::Template("unterminated RESIDUE block".into()));
        }
        let backbone = backbone.ok_or_else(|| AllAtomError::Template("missing BACKBONE".into()))?;
        let mut ordered = Vec::with_capacity(20);
        for aa in AminoAcid::ALL {
            ordered.push(
                residues
                    .remove(&aa)
                    .ok_or_else(|| AllAtomError::Template(format!("missing residue {}", aa.three())))?,
            );
        }
        Ok(TemplateTable { backbone, residues: ordered })
    }
}

fn parse_torsion(s: &str) -> Option<Torsion> {
    if let Some(rest) = s.strip_prefix("chi") {
        let (idx, offset) = match rest.find(['+', '-']) {
            Some(p) => (&rest[..p], rest[p..].parse::<f64>().ok()?),
            None => (rest, 0.0),
        };
        let k: usize = idx.parse().ok()?;
        if !(1..=4).contains(&k) {
            return None;
        }
        Some(Torsion::Chi { index: k - 1, offset: offset.to_radians() })
    } else {
        s.parse::<f64>().ok().map(|d| Torsion::Fixed(d.to_radians()))
    }
}

fn validate(res: &ResidueTemplate) -> Result<(), String> {
    let mut placed: Vec<&str> = vec!["N", "CA", "C", "O"];
    for a in &res.atoms {
        for p in &a.parents {
            if !placed.contains(&p.as_str()) {
                return Err(format!("{}: parent {p} not yet placed", a.name));
            }
        }
        if let Torsion::Chi { index, .. } = a.torsion {
            let chi = res
                .chis
                .get(index)
                .ok_or_else(|| format!("{} references undefined chi{}", a.name, index + 1))?;
            if a.parents[1] != chi.atoms[1] || a.parents[2] != chi.atoms[2] {
                return Err(format!("{} does not rotate about the chi{} axis", a.name, index + 1));
            }
        }
        placed.push(&a.name);
    }
    for (k, chi) in res.chis.iter().enumerate() {
        for name in &chi.atoms {
            if !placed.contains(&name.as_str()) {
                return Err(format!("chi{} references missing atom {name}", k + 1));
            }
        }
        let d = res
            .atoms
            .iter()
            .find(|a| a.name == chi.atoms[3])
            .ok_or_else(|| format!("chi{} end atom is a backbone atom", k + 1))?;
        let ok = d.parents[..] == chi.atoms[..3]
            && d.torsion == Torsion::Chi { index: k, offset: 0.0 };
        if !ok {
            return Err(format!("{} must be placed from the chi{} quadruple with torsion chi{}", d.name, k + 1, k + 1));
        }
    }
    Ok(())
}

static TABLE: OnceLock<TemplateTable> = OnceLock::new();

/// The bundled template table, parsed on first use.
pub fn templates() -> &'static TemplateTable {
    TABLE.get_or_init(|| {
        TemplateTable::parse(TEMPLATE_TEXT).expect("bundled residue template table is valid")
    })
}
