//! Structure and sequence recovery metrics and chi-angle statistics.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::allatom::{extract_torsions_lenient, AminoAcid, ChiAngles};
use crate::geom3::{RigidTransform, Rotation, Vec3};
use crate::proteinio::Complex;
use crate::seqflow::Sequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("superposition needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point set is rank-deficient (collinear or coincident)")]
    RankDeficient,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superposition {
    pub rmsd: f64,
    /// Rigid motion taking the first point set onto the second.
    pub transform: RigidTransform,
}

fn centroid(p: &[Vec3]) -> Vec3 {
    p.iter().sum::<Vec3>() / p.len() as f64
}

fn check_rank(centered: &[Vec3]) -> Result<(), MetricError> {
    let scatter: Matrix3<f64> = centered.iter().map(|p| p * p.transpose()).sum();
    let mut ev: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 1e-18 || ev[1] <= 1e-10 * ev[0] {
        return Err(MetricError::RankDeficient);
    }
    Ok(())
}

/// Optimal rigid superposition of `a` onto `b` (Kabsch, with reflection
/// correction). The RMSD is measured on the superposed coordinates.
pub fn kabsch(a: &[Vec3], b: &[Vec3]) -> Result<Superposition, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(MetricError::TooFewPoints(a.len()));
    }
    let (ca, cb) = (centroid(a), centroid(b));
    let pa: Vec<Vec3> = a.iter().map(|p| p - ca).collect();
    let pb: Vec<Vec3> = b.iter().map(|p| p - cb).collect();
    check_rank(&pa)?;
    check_rank(&pb)?;
    let h: Matrix3<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y.transpose()).sum();
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let r = v_t.transpose() * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = Rotation::orthonormalized(&r);
    let transform = RigidTransform::new(rotation, cb - rotation.rotate(&ca));
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (transform.apply(x) - y).norm_squared()).sum();
    Ok(Superposition { rmsd: (sq / a.len() as f64).sqrt(), transform })
}

pub fn kabsch_rmsd(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricError> {
    kabsch(a, b).map(|s| s.rmsd)
}

/// Fraction of positions with identical residue types.
pub fn aar(pred: &Sequence, truth: &Sequence) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::InvalidArgument("empty sequences".into()));
    }
    if pred.mask_count() + truth.mask_count() > 0 {
        return Err(MetricError::InvalidArgument("sequences must not contain MASK".into()));
    }
    let same = pred.0.iter().zip(&truth.0).filter(|(a, b)| a == b).count();
    Ok(same as f64 / pred.len() as f64)
}

pub const DEFAULT_BINS: usize = 72;
const EDGE_SNAP: f64 = 1e-9;

/// Per-type, per-chi angular histograms over `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiHistogram {
    bins: usize,
    counts: BTreeMap<(AminoAcid, usize), Vec<u64>>,
}

impl ChiHistogram {
    pub fn new(bins: usize) -> Result<Self, MetricError> {
        if bins < 2 {
            return Err(MetricError::InvalidArgument("need at least 2 bins".into()));
        }
        let mut counts = BTreeMap::new();
        for aa in AminoAcid::ALL {
            for k in 0..aa.chi_count() {
                counts.insert((aa, k), vec![0; bins]);
            }
        }
        Ok(ChiHistogram { bins, counts })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        TAU / self.bins as f64
    }

    /// Bin holding `angle` (in `[0, 2π)`). Angles within `EDGE_SNAP` bin
    /// widths of an edge count as lying on it, so values that only differ
    /// by rounding noise share a bin.
    pub fn bin_of(&self, angle: f64) -> usize {
        let x = angle / self.width();
        let nearest = x.round();
        let i = if (x - nearest).abs() < EDGE_SNAP { nearest } else { x.floor() };
        (i.max(0.0) as usize) % self.bins
    }

    pub fn add(&mut self, aa: AminoAcid, chi: &ChiAngles) {
        for k in 0..aa.chi_count() {
            if let Some(v) = chi.get(k) {
                let b = self.bin_of(v);
                self.counts.get_mut(&(aa, k)).expect("every chi slot is allocated")[b] += 1;
            }
        }
    }

    pub fn counts(&self, aa: AminoAcid, chi: usize) -> Option<&[u64]> {
        self.counts.get(&(aa, chi)).map(Vec::as_slice)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flatten().sum()
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &ChiHistogram) -> Result<(), MetricError> {
        if other.bins != self.bins {
            return Err(MetricError::InvalidArgument("bin counts differ".into()));
        }
        for (key, src) in &other.counts {
            for (d, s) in self.counts.get_mut(key).expect("same layout").iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(())
    }

    /// Tab-separated rows `residue, chi (1-based), bin left edge (rad), count`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("residue\tchi\tbin_left\tcount\n");
        for ((aa, k), counts) in &self.counts {
            for (b, c) in counts.iter().enumerate() {
                let _ = writeln!(out, "{}\t{}\t{:.6}\t{}", aa.three(), k + 1, b as f64 * self.width(), c);
            }
        }
        out
    }
}

/// Histograms of chi angles extracted from the atoms of every residue.
/// Chis with missing atoms are skipped.
pub fn chi_histograms(dataset: &[Complex], bins: usize) -> Result<ChiHistogram, MetricError> {
    let mut h = ChiHistogram::new(bins)?;
    for c in dataset {
        for r in c.residues() {
            h.add(r.aa, &extract_torsions_lenient(&r.atoms, r.aa).0);
        }
    }
    Ok(h)
}
