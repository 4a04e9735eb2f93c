//! Masked discrete flow over residue tokens and the iterative decoder.
//!
//! The interpolant keeps each clean token with probability `t` and replaces
//! it with `MASK` otherwise. Decoding resamples every position from the
//! predicted logits, scores the choices by log-probability plus annealed
//! Gumbel noise and keeps only the `floor(t_next * N)` best for the next step.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allatom::AminoAcid;

/// Number of amino-acid classes.
pub const NUM_AA: usize = 20;
/// Logit columns: the amino acids followed by the mask class.
pub const VOCAB: usize = 21;
pub const MASK_INDEX: usize = 20;

// Guards `floor(t * N)` against grid values such as 0.29 * 100 = 28.999...
const COUNT_EPS: f64 = 1e-9;
const GUMBEL_CLAMP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected} rows, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("unknown residue symbol {0:?}")]
    UnknownSymbol(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Aa(AminoAcid),
    Mask,
}

impl Token {
    pub fn index(self) -> usize {
        match self {
            Token::Aa(a) => a.index(),
            Token::Mask => MASK_INDEX,
        }
    }

    pub fn is_mask(self) -> bool {
        matches!(self, Token::Mask)
    }

    pub fn aa(self) -> Option<AminoAcid> {
        match self {
            Token::Aa(a) => Some(a),
            Token::Mask => None,
        }
    }

    /// One-letter code, `-` for the mask.
    pub fn symbol(self) -> char {
        match self {
            Token::Aa(a) => a.one(),
            Token::Mask => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sequence(pub Vec<Token>);

impl Sequence {
    pub fn masked(n: usize) -> Self {
        Sequence(vec![Token::Mask; n])
    }

    pub fn from_residues(aas: &[AminoAcid]) -> Self {
        Sequence(aas.iter().map(|&a| Token::Aa(a)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mask_count(&self) -> usize {
        self.0.iter().filter(|t| t.is_mask()).count()
    }

    /// Residue types, or `None` if any position is masked.
    pub fn residues(&self) -> Option<Vec<AminoAcid>> {
        self.0.iter().map(|t| t.aa()).collect()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|t| write!(f, "{}", t.symbol()))
    }
}

impl FromStr for Sequence {
    type Err = SeqError;

    fn from_str(s: &str) -> Result<Self, SeqError> {
        s.chars()
            .map(|c| match c {
                '-' => Ok(Token::Mask),
                _ => AminoAcid::from_one(c).map(Token::Aa).ok_or(SeqError::UnknownSymbol(c)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Sequence)
    }
}

/// Per-residue scores over the 20 amino acids and the mask class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Logits(pub Vec<[f64; VOCAB]>);

impl Logits {
    pub fn zeros(n: usize) -> Self {
        Logits(vec![[0.0; VOCAB]; n])
    }

    /// Rows with `margin` on the true class and 0 elsewhere; masked
    /// positions get a uniform row.
    pub fn peaked(seq: &Sequence, margin: f64) -> Self {
        Logits(
            seq.0
                .iter()
                .map(|t| {
                    let mut row = [0.0; VOCAB];
                    if let Token::Aa(a) = t {
                        row[a.index()] = margin;
                    }
                    row
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|r| r.iter().all(|x| x.is_finite()))
    }

    fn check_len(&self, n: usize) -> Result<(), SeqError> {
        if self.len() != n {
            return Err(SeqError::ShapeMismatch { expected: n, got: self.len() });
        }
        Ok(())
    }
}

/// Log-softmax over the amino-acid columns; the mask column is ignored.
pub fn log_softmax20(row: &[f64; VOCAB]) -> [f64; NUM_AA] {
    let aa = &row[..NUM_AA];
    let m = aa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + aa.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    let mut out = [0.0; NUM_AA];
    for (o, x) in out.iter_mut().zip(aa) {
        *o = x - lse;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub t_max: f64,
    pub lambda: f64,
    pub argmax_threshold: f64,
    pub blend_threshold: f64,
    pub blend_weights: [f64; 2],
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            t_max: 30.0,
            lambda: 30.0,
            argmax_threshold: 0.85,
            blend_threshold: 0.8,
            blend_weights: [0.8, 0.2],
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let [a, b] = self.blend_weights;
        let problem = if !(self.t_max > 0.0) {
            Some("t_max must be positive")
        } else if !(self.lambda >= 0.0) {
            Some("lambda must be non-negative")
        } else if !unit(self.argmax_threshold) || !unit(self.blend_threshold) {
            Some("thresholds must lie in [0, 1]")
        } else if !(a >= 0.0 && b >= 0.0 && (a + b - 1.0).abs() < 1e-9) {
            Some("blend weights must be non-negative and sum to 1")
        } else {
            None
        };
        problem.map_or(Ok(()), |m| Err(SeqError::InvalidArgument(m.into())))
    }
}

/// Number of positions kept at time `t` for a length-`n` sequence.
pub fn kept_count(t: f64, n: usize) -> usize {
    ((t * n as f64 + COUNT_EPS).floor().max(0.0) as usize).min(n)
}

pub fn corrupt_sequence<R: Rng + ?Sized>(s1: &Sequence, t: f64, rng: &mut R) -> Result<Sequence, SeqError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SeqError::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    if s1.0.iter().any(|x| x.is_mask()) {
        return Err(SeqError::InvalidArgument("clean sequence contains MASK".into()));
    }
    Ok(Sequence(
        s1.0.iter().map(|&tok| if rng.random::<f64>() < t { tok } else { Token::Mask }).collect(),
    ))
}

pub fn blend_logits(seqbb: &Logits, refine: &Logits, t_s: f64, cfg: &DecodeConfig) -> Result<Logits, SeqError> {
    refine.check_len(seqbb.len())?;
    if t_s < cfg.blend_threshold {
        return Ok(seqbb.clone());
    }
    let [wa, wb] = cfg.blend_weights;
    Ok(Logits(
        seqbb
            .0
            .iter()
            .zip(&refine.0)
            .map(|(a, b)| std::array::from_fn(|k| wa * a[k] + wb * b[k]))
            .collect(),
    ))
}

pub fn temperature(t_s: f64, cfg: &DecodeConfig) -> f64 {
    cfg.t_max * (-cfg.lambda * t_s).exp()
}

fn argmax20(row: &[f64; VOCAB]) -> usize {
    // First maximum wins, so ties go to the lower index.
    (1..NUM_AA).fold(0, |best, k| if row[k] > row[best] { k } else { best })
}

pub fn sample_tokens<R: Rng + ?Sized>(
    logits: &Logits,
    t_s: f64,
    cfg: &DecodeConfig,
    rng: &mut R,
) -> Result<Sequence, SeqError> {
    if !logits.is_finite() {
        return Err(SeqError::InvalidArgument("non-finite logits".into()));
    }
    if t_s >= cfg.argmax_threshold {
        return Ok(Sequence(
            logits.0.iter().map(|r| Token::Aa(AminoAcid::ALL[argmax20(r)])).collect(),
        ));
    }
    let temp = temperature(t_s, cfg);
    let mut out = Vec::with_capacity(logits.len());
    for row in &logits.0 {
        let scaled: [f64; VOCAB] = std::array::from_fn(|k| row[k] / temp);
        let weights = log_softmax20(&scaled).map(f64::exp);
        let dist = WeightedIndex::new(weights)
            .map_err(|e| SeqError::InvalidArgument(format!("degenerate token distribution: {e}")))?;
        out.push(Token::Aa(AminoAcid::ALL[dist.sample(rng)]));
    }
    Ok(Sequence(out))
}

/// Standard Gumbel draw from a clamped uniform.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().clamp(GUMBEL_CLAMP, 1.0 - GUMBEL_CLAMP);
    -(-u.ln()).ln()
}

/// Confidence of each chosen token: its log-probability plus `(1 - t_s)`
/// times a Gumbel perturbation.
pub fn score_positions<R: Rng + ?Sized>(
    logits: &Logits,
    chosen: &Sequence,
    t_s: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SeqError> {
    logits.check_len(chosen.len())?;
    let w = 1.0 - t_s;
    logits
        .0
        .iter()
        .zip(&chosen.0)
        .map(|(row, tok)| {
            let aa = tok
                .aa()
                .ok_or_else(|| SeqError::InvalidArgument("cannot score a MASK token".into()))?;
            let g = gumbel(rng);
            Ok(log_softmax20(row)[aa.index()] + w * g)
        })
        .collect()
}

/// Keeps the `floor(t_next * N)` highest-scoring tokens and masks the rest.
pub fn remask_topk(chosen: &Sequence, scores: &[f64], t_next: f64) -> Result<Sequence, SeqError> {
    if scores.len() != chosen.len() {
        return Err(SeqError::ShapeMismatch { expected: chosen.len(), got: scores.len() });
    }
    let k = kept_count(t_next, chosen.len());
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = Sequence::masked(chosen.len());
    for &i in &order[..k] {
        out.0[i] = chosen.0[i];
    }
    Ok(out)
}

/// Result of one decoding round.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeStep {
    /// Fully resampled prediction of the clean sequence.
    pub predicted: Sequence,
    /// Partially masked sequence fed to the next step.
    pub next: Sequence,
}

/// Blend (when a refine prediction is supplied), sample, score, remask.
pub fn decode_step<R: Rng + ?Sized>(
    seqbb: &Logits,
    refine: Option<&Logits>,
    t_s: f64,
    t_next: f64,
    cfg: &DecodeConfig,
    rng: &mut R,
) -> Result<DecodeStep, SeqError> {
    let blended;
    let logits = match refine {
        Some(r) => {
            blended = blend_logits(seqbb, r, t_s, cfg)?;
            &blended
        }
        None => seqbb,
    };
    let predicted = sample_tokens(logits, t_s, cfg, rng)?;
    let scores = score_positions(logits, &predicted, t_s, rng)?;
    let next = remask_topk(&predicted, &scores, t_next)?;
    Ok(DecodeStep { predicted, next })
}
