//! Fixed-column PDB `ATOM` records.

use std::fmt::Write as _;

use super::{Chain, Complex, ProteinIoError, Residue};
use crate::allatom::{AminoAcid, AtomRecord};
use crate::geom3::Vec3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: Option<usize>,
    pub chain: char,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub complex: Complex,
    pub warnings: Vec<ParseWarning>,
}

struct RawResidue {
    name: String,
    number: i32,
    insertion: char,
    line: usize,
    atoms: Vec<AtomRecord>,
}

struct RawChain {
    id: char,
    residues: Vec<RawResidue>,
    nonstandard: Option<(String, usize)>,
}

fn column(line: &str, range: std::ops::Range<usize>) -> &str {
    let end = range.end.min(line.len());
    if range.start >= end {
        ""
    } else {
        &line[range.start..end]
    }
}

fn char_at(line: &str, i: usize) -> char {
    line.as_bytes().get(i).map_or(' ', |&b| b as char)
}

/// Parses the first model of a PDB file.
///
/// Only `ATOM` records are read; `HETATM` ligands and waters are ignored.
/// Alternate locations other than blank or `A` are skipped. Residues lacking
/// any of N, CA, C and whole chains containing non-standard residue names
/// are dropped with a warning.
pub fn parse_pdb(text: &str) -> Result<Parsed, ProteinIoError> {
    let mut chains: Vec<RawChain> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| ProteinIoError::Parse { line: line_no, message };
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") {
            continue;
        }
        if !line.is_ascii() {
            return Err(err("non-ASCII characters in ATOM record".into()));
        }
        if line.len() < 54 {
            return Err(err("ATOM record shorter than the coordinate columns".into()));
        }
        let altloc = char_at(line, 16);
        if altloc != ' ' && altloc != 'A' {
            continue;
        }
        let name = column(line, 12..16).trim().to_string();
        let res_name = column(line, 17..20).trim().to_string();
        let chain_id = char_at(line, 21);
        let number: i32 = column(line, 22..26)
            .trim()
            .parse()
            .map_err(|_| err(format!("bad residue number {:?}", column(line, 22..26))))?;
        let insertion = char_at(line, 26);
        let coord = |r: std::ops::Range<usize>| -> Result<f64, ProteinIoError> {
            let s = column(line, r).trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad coordinate {s:?}")))
        };
        let position = Vec3::new(coord(30..38)?, coord(38..46)?, coord(46..54)?);
        let b_text = column(line, 60..66).trim();
        let b_factor = if b_text.is_empty() {
            0.0
        } else {
            b_text.parse().map_err(|_| err(format!("bad B-factor {b_text:?}")))?
        };
        let mut element = column(line, 76..78).trim().to_string();
        if element.is_empty() {
            element = name.chars().find(|c| c.is_ascii_alphabetic()).map(String::from).unwrap_or_default();
        }
        if name.is_empty() || res_name.is_empty() {
            return Err(err("missing atom or residue name".into()));
        }

        let ci = match chains.iter().position(|c| c.id == chain_id) {
            Some(i) => i,
            None => {
                chains.push(RawChain { id: chain_id, residues: Vec::new(), nonstandard: None });
                chains.len() - 1
            }
        };
        let chain = &mut chains[ci];
        if AminoAcid::from_three(&res_name).is_none() && chain.nonstandard.is_none() {
            chain.nonstandard = Some((res_name.clone(), line_no));
        }
        let new_residue = chain.residues.last().is_none_or(|r| {
            r.number != number || r.insertion != insertion || r.name != res_name
        });
        if new_residue {
            chain.residues.push(RawResidue { name: res_name, number, insertion, line: line_no, atoms: Vec::new() });
        }
        let res = chain.residues.last_mut().expect("residue just ensured");
        if res.atoms.iter().all(|a| a.name != name) {
            res.atoms.push(AtomRecord { name, element, position, residue_index: 0, chain_id, b_factor });
        }
    }

    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for raw in chains {
        if let Some((name, line)) = raw.nonstandard {
            warnings.push(ParseWarning {
                line: Some(line),
                chain: raw.id,
                message: format!("chain {} dropped: non-standard residue {name}", raw.id),
            });
            continue;
        }
        let mut residues = Vec::new();
        for r in raw.residues {
            let missing: Vec<&str> =
                ["N", "CA", "C"].into_iter().filter(|n| r.atoms.iter().all(|a| a.name != *n)).collect();
            if !missing.is_empty() {
                warnings.push(ParseWarning {
                    line: Some(r.line),
                    chain: raw.id,
                    message: format!("residue {} {}{} dropped: missing {}", r.name, r.number, r.insertion, missing.join(",")).replace("  ", " "),
                });
                continue;
            }
            let aa = AminoAcid::from_three(&r.name).expect("standard residue checked above");
            let index = residues.len();
            let mut atoms = r.atoms;
            for a in &mut atoms {
                a.residue_index = index;
            }
            residues.push(Residue { aa, number: r.number, insertion: r.insertion, atoms });
        }
        if residues.is_empty() {
            warnings.push(ParseWarning { line: None, chain: raw.id, message: format!("chain {} has no complete residues", raw.id) });
            continue;
        }
        match Chain::from_residues(raw.id, residues) {
            Ok(c) => out.push(c),
            Err(e) => warnings.push(ParseWarning { line: None, chain: raw.id, message: format!("chain {} dropped: {e}", raw.id) }),
        }
    }
    if out.is_empty() {
        return Err(ProteinIoError::EmptyComplex);
    }
    Ok(Parsed { complex: Complex::new(out), warnings })
}

fn atom_name_field(name: &str, element: &str) -> String {
    if name.len() < 4 && element.len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

/// Writes `ATOM` records with a `TER` after each chain and a final `END`.
pub fn write_pdb(c: &Complex) -> String {
    let mut out = String::new();
    let mut serial = 1usize;
    for chain in &c.chains {
        let mut last: Option<&Residue> = None;
        for r in &chain.residues {
            for a in &r.atoms {
                let _ = writeln!(
                    out,
                    "ATOM  {:>5} {} {:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
                    serial % 100_000,
                    atom_name_field(&a.name, &a.element),
                    r.aa.three(),
                    chain.id,
                    r.number,
                    r.insertion,
                    a.position.x,
                    a.position.y,
                    a.position.z,
                    1.0,
                    a.b_factor,
                    a.element,
                );
                serial += 1;
            }
            last = Some(r);
        }
        if let Some(r) = last {
            let _ = writeln!(out, "TER   {:>5}      {:>3} {}{:>4}{}", serial % 100_000, r.aa.three(), chain.id, r.number, r.insertion);
            serial += 1;
        }
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> Complex {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        synthetic::random_complex(&[5, 7], &mut rng)
    }

    #[test]
    fn two_chain_fixture_counts() {
        let text = write_pdb(&fixture());
        let p = parse_pdb(&text).unwrap();
        assert_eq!(p.complex.chains.len(), 2);
        assert_eq!(p.complex.len(), 12);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn roundtrip_is_a_fixed_point() {
        let first = parse_pdb(&write_pdb(&fixture())).unwrap().complex;
        let second = parse_pdb(&write_pdb(&first)).unwrap().complex;
        assert_eq!(first, second);
        assert_eq!(write_pdb(&first), write_pdb(&second));
        let ids: Vec<char> = second.chains.iter().map(|c| c.id).collect();
        assert_eq!(ids, ['A', 'B']);
    }

    #[test]
    fn coordinates_round_to_three_decimals() {
        let mut c = fixture();
        c.chains[0].residues[0].atoms[0].position = Vec3::new(1.23456, -0.5, 10.0);
        let text = write_pdb(&c);
        let first = text.lines().next().unwrap();
        assert_eq!(&first[30..38], "   1.235");
        assert_eq!(&first[38..46], "  -0.500");
        assert_eq!(&first[12..16], " N  ");
        assert_eq!(&first[17..20], c.chains[0].residues[0].aa.three());
        assert!(text.ends_with("END\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("TER")).count(), 2);
    }

    #[test]
    fn ca_only_residues_are_dropped() {
        let text = write_pdb(&fixture());
        let filtered: String = text
            .lines()
            .filter(|l| {
                // Strip everything but CA from the first two residues of chain A.
                !(l.starts_with("ATOM") && &l[21..22] == "A" && ["   1", "   2"].contains(&&l[22..26]) && &l[12..16] != " CA ")
            })
            .map(|l| format!("{l}\n"))
            .collect();
        let p = parse_pdb(&filtered).unwrap();
        assert_eq!(p.complex.len(), 10);
        assert_eq!(p.warnings.len(), 2);
        assert!(p.warnings[0].message.contains("missing N,C"));
    }

    #[test]
    fn nonstandard_chain_is_dropped_and_altlocs_filtered() {
        let mut text = write_pdb(&fixture());
        let line = "ATOM    999  CA  MSE C   1       0.000   0.000   0.000  1.00  0.00           C\n";
        text = text.replace("END\n", line) + "END\n";
        let alt_b = text.lines().next().unwrap().to_string();
        let mut alt = alt_b.clone().into_bytes();
        alt[16] = b'B';
        alt[31] = b'9';
        text = format!("{}\n{}", String::from_utf8(alt).unwrap(), text);
        let p = parse_pdb(&text).unwrap();
        assert_eq!(p.complex.chains.len(), 2);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].message.contains("MSE"));
        assert_eq!(p.complex, parse_pdb(&write_pdb(&fixture())).unwrap().complex);
    }

    #[test]
    fn only_first_model_is_read() {
        let body = write_pdb(&fixture()).replace("END\n", "");
        let text = format!("MODEL        1\n{body}ENDMDL\nMODEL        2\nATOM      1  N   GLY Z   1       0.000   0.000   0.000\nENDMDL\nEND\n");
        let p = parse_pdb(&text).unwrap();
        assert_eq!(p.complex.chains.len(), 2);
    }

    #[test]
    fn malformed_records_report_line_numbers() {
        let text = "HEADER    TEST\nATOM      1  N   GLY A   1       0.000   abc     0.000\n";
        match parse_pdb(text) {
            Err(ProteinIoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_pdb("HEADER    EMPTY\nEND\n"), Err(ProteinIoError::EmptyComplex));
    }
}
