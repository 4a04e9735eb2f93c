//! Staged sampling with pluggable denoisers.
//!
//! Each step queries the sequence-and-backbone module, and once `t ≥ 𝒯`
//! also the sidechain and refine modules. Their predictions drive one
//! decoding round for the sequence and one Euler step for the frames. The
//! sampler's output is the last prediction, not the last Euler state.

mod chains;
mod oracle;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allatom::{AminoAcid, TorsionSet};
use crate::flowmatch::{euler_step_with_stats, sample_prior, FlowError, FrameSet, ScheduleKind};
use crate::geom3::{so3_exp, TangentVector};
use crate::proteinio::{Complex, ProteinIoError};
use crate::seqflow::{blend_logits, decode_step, DecodeConfig, Logits, SeqError, Sequence, Token, NUM_AA};

pub use chains::{chain_by_chain, choose_binding_residue, Placement};
pub use oracle::{make_ground_truth_oracle, make_perturbed_oracle, GroundTruthOracle, NullDenoiser, PerturbedOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("denoiser contract violated: {0}")]
    Contract(String),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("incomplete target: {0}")]
    IncompleteTarget(String),
    #[error("chain-by-chain generation needs at least two chains, got {0}")]
    TooFewChains(usize),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Io(#[from] ProteinIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    SeqBb,
    Sidechain,
    Refine,
}

/// One denoiser query. Residues flagged in `fixed` are presented clean.
#[derive(Debug, Clone, Copy)]
pub struct DenoiserInput<'a> {
    pub role: Role,
    pub sequence: &'a Sequence,
    pub frames: &'a FrameSet,
    /// Torsions from the sidechain module, supplied to the refine role.
    pub torsions: Option<&'a TorsionSet>,
    pub t_s: f64,
    pub t_t: f64,
    pub chain_lengths: &'a [usize],
    pub fixed: &'a [bool],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserOutput {
    pub logits: Logits,
    pub frames: FrameSet,
    pub torsions: Option<TorsionSet>,
}

/// A denoising module. Implementations must be deterministic in their input.
pub trait Denoiser {
    fn denoise(&self, input: &DenoiserInput<'_>) -> Result<DenoiserOutput, SamplerError>;

    /// Whether concurrent trajectories may share this denoiser.
    fn concurrent(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub steps: usize,
    /// Time from which the sidechain and refine modules take part.
    pub activation_threshold: f64,
    pub schedule: ScheduleKind,
    pub decode: DecodeConfig,
    pub trans_std: f64,
    pub seed: u64,
    /// Sequence time lags structure time: `t_s = max(0, (t - d) / (1 - d))`.
    pub seq_delay: f64,
    pub binding_shift: f64,
    pub binding_window: [f64; 2],
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            activation_threshold: 0.8,
            schedule: ScheduleKind::default(),
            decode: DecodeConfig::default(),
            trans_std: 10.0,
            seed: 0,
            seq_delay: 0.0,
            binding_shift: 1.0,
            binding_window: [0.33, 0.66],
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Config(m.into()));
        if self.steps < 2 {
            return bad("steps must be at least 2");
        }
        // 𝒯 = 1 is accepted: it disables the refine path entirely.
        if !(self.activation_threshold > 0.0 && self.activation_threshold <= 1.0) {
            return bad("activation_threshold must lie in (0, 1]");
        }
        if !(self.trans_std > 0.0) {
            return bad("trans_std must be positive");
        }
        if !(0.0..1.0).contains(&self.seq_delay) {
            return bad("seq_delay must lie in [0, 1)");
        }
        if !(self.binding_shift >= 0.0) {
            return bad("binding_shift must be non-negative");
        }
        let [lo, hi] = self.binding_window;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return bad("binding_window must satisfy 0 <= lo < hi <= 1");
        }
        self.schedule.validate()?;
        self.decode.validate()?;
        Ok(())
    }

    fn grid(&self, k: usize) -> (f64, f64) {
        let t = k as f64 / self.steps as f64;
        let d = self.seq_delay;
        ((t - d).max(0.0) / (1.0 - d), t)
    }
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Chain being generated (0 outside chain-by-chain mode).
    pub stage: usize,
    pub step: usize,
    pub t_s: f64,
    pub t_t: f64,
    /// MASK tokens entering the next step.
    pub masked: usize,
    /// Sequence entering the next step, `-` for MASK.
    pub sequence: String,
    pub mean_trans_speed: f64,
    pub mean_rot_norm: f64,
    pub refine_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogRecord {
    Step(StepRecord),
    Placement(Placement),
}

/// Line-delimited JSON, one record per line.
pub fn trajectory_jsonl(records: &[LogRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingResult {
    pub complex: Complex,
    pub sequence: Vec<AminoAcid>,
    pub frames: FrameSet,
    pub torsions: TorsionSet,
    pub log: Vec<LogRecord>,
    /// Euler states at every grid time, from the prior to `t = 1`.
    pub states: Vec<FrameSet>,
}

impl SamplingResult {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.log.iter().filter_map(|r| match r {
            LogRecord::Step(s) => Some(s),
            LogRecord::Placement(_) => None,
        })
    }
}

/// Clean residues held fixed at the start of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub sequence: Vec<AminoAcid>,
    pub frames: FrameSet,
    pub torsions: TorsionSet,
}

impl Condition {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

struct Query<'a, D: ?Sized> {
    denoiser: &'a D,
    lengths: &'a [usize],
    fixed: &'a [bool],
    n: usize,
}

impl<D: Denoiser + ?Sized> Query<'_, D> {
    fn call(
        &self,
        role: Role,
        sequence: &Sequence,
        frames: &FrameSet,
        torsions: Option<&TorsionSet>,
        t_s: f64,
        t_t: f64,
    ) -> Result<DenoiserOutput, SamplerError> {
        let input = DenoiserInput { role, sequence, frames, torsions, t_s, t_t, chain_lengths: self.lengths, fixed: self.fixed };
        let out = self.denoiser.denoise(&input)?;
        let n = self.n;
        if out.logits.len() != n || out.frames.len() != n {
            return Err(SamplerError::Contract(format!(
                "{role:?} returned {} logits and {} frames for {n} residues",
                out.logits.len(),
                out.frames.len()
            )));
        }
        if !out.logits.is_finite() {
            return Err(SamplerError::Contract(format!("{role:?} returned non-finite logits")));
        }
        if out.frames.iter().any(|f| !f.translation.iter().all(|x| x.is_finite())) {
            return Err(SamplerError::Contract(format!("{role:?} returned non-finite frames")));
        }
        match &out.torsions {
            Some(t) if t.len() != n => {
                return Err(SamplerError::Contract(format!("{role:?} returned {} torsion rows for {n} residues", t.len())))
            }
            None if role == Role::Sidechain => {
                return Err(SamplerError::Contract("sidechain role returned no torsions".into()))
            }
            _ => {}
        }
        Ok(out)
    }
}

fn argmax_sequence(logits: &Logits) -> Vec<AminoAcid> {
    logits
        .0
        .iter()
        .map(|row| {
            let best = (1..NUM_AA).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            AminoAcid::ALL[best]
        })
        .collect()
}

/// Unconditional sampling of a complex with the given chain lengths.
pub fn run_sampling<D, R>(denoiser: &D, lengths: &[usize], cfg: &SamplerConfig, rng: &mut R) -> Result<SamplingResult, SamplerError>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    run_conditional(denoiser, lengths, None, cfg, rng)
}

/// Sampling with the first `condition.len()` residues held at their clean
/// state. New residues start from the prior.
pub fn run_conditional<D, R>(
    denoiser: &D,
    lengths: &[usize],
    condition: Option<&Condition>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SamplingResult, SamplerError>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(SamplerError::Config("every chain needs at least one residue".into()));
    }
    let n: usize = lengths.iter().sum();
    let m = condition.map_or(0, Condition::len);
    if let Some(c) = condition {
        if c.frames.len() != m || c.torsions.len() != m {
            return Err(SamplerError::Config("condition sequence, frames and torsions differ in length".into()));
        }
    }
    if m >= n {
        return Err(SamplerError::Config("condition leaves no residues to generate".into()));
    }
    let fixed: Vec<bool> = (0..n).map(|i| i < m).collect();
    let clamp_seq = |s: &mut Sequence| {
        if let Some(c) = condition {
            for (i, aa) in c.sequence.iter().enumerate() {
                s.0[i] = Token::Aa(*aa);
            }
        }
    };
    let clamp_frames = |f: &mut FrameSet| {
        if let Some(c) = condition {
            f.0[..m].copy_from_slice(&c.frames.0);
        }
    };

    let q = Query { denoiser, lengths, fixed: &fixed, n };
    let mut seq = Sequence::masked(n);
    clamp_seq(&mut seq);
    let mut frames = FrameSet(Vec::with_capacity(n));
    if let Some(c) = condition {
        frames.0.extend_from_slice(&c.frames.0);
    }
    frames.0.extend(sample_prior(n - m, rng, cfg.trans_std)?.0);

    let mut states = vec![frames.clone()];
    let mut log = Vec::with_capacity(cfg.steps);
    let mut last_logits = None;
    let mut last_frames = None;
    for k in 0..cfg.steps {
        let (t_s, t_t) = cfg.grid(k);
        let (t_s_next, t_t_next) = cfg.grid(k + 1);
        let base = q.call(Role::SeqBb, &seq, &frames, None, t_s, t_t)?;
        let refine_active = t_t >= cfg.activation_threshold;
        let (refine_logits, mut pred_frames) = if refine_active {
            let draft = Sequence::from_residues(&argmax_sequence(&base.logits));
            let chi = q.call(Role::Sidechain, &draft, &base.frames, None, t_s, t_t)?;
            let torsions = chi.torsions.expect("validated by Query::call");
            let refined = q.call(Role::Refine, &draft, &base.frames, Some(&torsions), t_s, t_t)?;
            (Some(refined.logits), refined.frames)
        } else {
            (None, base.frames.clone())
        };
        clamp_frames(&mut pred_frames);

        let step = decode_step(&base.logits, refine_logits.as_ref(), t_s, t_s_next, &cfg.decode, rng)?;
        seq = step.next;
        clamp_seq(&mut seq);

        let dt = t_t_next - t_t;
        let (next, stats) = advance(&frames, &pred_frames, t_t, dt, cfg.schedule)?;
        frames = next;
        clamp_frames(&mut frames);
        states.push(frames.clone());

        log.push(LogRecord::Step(StepRecord {
            stage: 0,
            step: k,
            t_s,
            t_t,
            masked: seq.mask_count(),
            sequence: seq.to_string(),
            mean_trans_speed: stats.mean_trans_speed,
            mean_rot_norm: stats.mean_rot_norm,
            refine_active,
        }));
        last_logits = Some(match refine_logits {
            Some(r) => blend_logits(&base.logits, &r, t_s, &cfg.decode)?,
            None => base.logits,
        });
        last_frames = Some(pred_frames);
    }

    let mut sequence = argmax_sequence(&last_logits.expect("at least two steps"));
    let frames_out = last_frames.expect("at least two steps");
    if let Some(c) = condition {
        sequence[..m].copy_from_slice(&c.sequence);
    }
    let final_seq = Sequence::from_residues(&sequence);
    let chi = q.call(Role::Sidechain, &final_seq, &frames_out, None, 1.0, 1.0)?;
    let mut torsions = chi.torsions.expect("validated by Query::call");
    if let Some(c) = condition {
        torsions.0[..m].clone_from_slice(&c.torsions.0);
    }
    let complex = Complex::assemble(lengths, &sequence, &frames_out, &torsions)?;
    Ok(SamplingResult { complex, sequence, frames: frames_out, torsions, log, states })
}

/// Euler step that nudges any residue caught at a near-antipodal rotation
/// pair off the cut locus and retries.
fn advance(
    frames: &FrameSet,
    pred: &FrameSet,
    t: f64,
    dt: f64,
    schedule: ScheduleKind,
) -> Result<(FrameSet, crate::flowmatch::StepStats), SamplerError> {
    let mut current = frames.clone();
    for _ in 0..=frames.len() + 3 {
        match euler_step_with_stats(&current, pred, t, dt, schedule) {
            Err(e) => match e.antipodal_residue() {
                Some(i) => {
                    let nudge = so3_exp(&TangentVector::new(1e-3, 0.0, 0.0)).expect("small rotation");
                    current.0[i].rotation = current.0[i].rotation.compose(&nudge);
                }
                None => return Err(e.into()),
            },
            ok => return Ok(ok?),
        }
    }
    Err(SamplerError::Contract("prediction stays antipodal to the current state".into()))
}

/// Independent trajectories, one per seed. Runs them on scoped threads when
/// the denoiser allows concurrent use, sequentially otherwise.
pub fn sample_many<D>(denoiser: &D, lengths: &[usize], cfg: &SamplerConfig, seeds: &[u64]) -> Vec<Result<SamplingResult, SamplerError>>
where
    D: Denoiser + Sync + ?Sized,
{
    let one = |seed: u64| run_sampling(denoiser, lengths, cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    if !denoiser.concurrent() {
        return seeds.iter().map(|&s| one(s)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds.iter().map(|&s| scope.spawn(move || one(s))).collect();
        handles.into_iter().map(|h| h.join().expect("sampling thread panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::{geodesic, Vec3};
    use crate::metrics::kabsch_rmsd;
    use crate::synthetic;

    fn target(lengths: &[usize], seed: u64) -> Complex {
        synthetic::random_complex(lengths, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn run(d: &impl Denoiser, lengths: &[usize], cfg: &SamplerConfig, seed: u64) -> SamplingResult {
        run_sampling(d, lengths, cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn oracle_recovers_target() {
        let t = target(&[12, 9], 1);
        let oracle = make_ground_truth_oracle(&t).unwrap();
        for tau in [0.8, 1.0] {
            let cfg = SamplerConfig { activation_threshold: tau, ..Default::default() };
            let r = run(&oracle, &[12, 9], &cfg, 3);
            assert_eq!(r.complex.sequence(), t.sequence());
            assert!(kabsch_rmsd(&r.complex.ca_positions(), &t.ca_positions()).unwrap() < 1e-9);
            assert_eq!(r.complex.chain_lengths(), vec![12, 9]);
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let t = target(&[10], 2);
        let oracle = make_perturbed_oracle(&t, 0.5, 7);
        let a = run(&oracle, &[10], &SamplerConfig::default(), 11);
        let b = run(&oracle, &[10], &SamplerConfig::default(), 11);
        assert_eq!(a, b);
        assert_eq!(trajectory_jsonl(&a.log), trajectory_jsonl(&b.log));
    }

    #[test]
    fn masks_never_increase_and_shapes_hold() {
        let t = target(&[15, 6], 3);
        let r = run(&make_ground_truth_oracle(&t).unwrap(), &[15, 6], &SamplerConfig::default(), 4);
        let masked: Vec<usize> = r.steps().map(|s| s.masked).collect();
        assert_eq!(masked.len(), 100);
        assert!(masked.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*masked.last().unwrap(), 0);
        assert!(r.states.iter().all(|s| s.len() == 21));
        assert_eq!(r.steps().filter(|s| s.refine_active).count(), 20);
    }

    #[test]
    fn oracle_trajectory_is_linear_and_exponential() {
        let t = target(&[6], 5);
        let r = run(&make_ground_truth_oracle(&t).unwrap(), &[6], &SamplerConfig::default(), 6);
        let truth = t.frames();
        let x0 = &r.states[0];
        for (k, state) in r.states.iter().enumerate() {
            let tk = k as f64 / 100.0;
            for i in 0..6 {
                let a = x0[i].translation;
                let b = truth[i].translation;
                let p = state[i].translation;
                // Collinearity residual of x_t on the segment x0 -> x1, and its parameter.
                let dir = (b - a).normalize();
                let along = (p - a).dot(&dir);
                let residual = ((p - a) - dir * along).norm();
                assert!(residual < 1e-9, "{residual}");
                assert!((along / (b - a).norm() - tk).abs() < 1e-9);
                // Each Euler step closes a fraction c·dt of the remaining
                // geodesic, the discrete form of 1 - e^{-10 t}.
                let expected = geodesic(&x0[i].rotation, &truth[i].rotation, 1.0 - 0.9f64.powi(k as i32)).unwrap();
                let dev = (state[i].rotation.matrix() - expected.matrix()).amax();
                assert!(dev < 1e-6, "step {k} residue {i}: {dev}");
            }
        }
    }

    struct Broken;
    impl Denoiser for Broken {
        fn denoise(&self, input: &DenoiserInput<'_>) -> Result<DenoiserOutput, SamplerError> {
            let n = input.sequence.len() - 1;
            Ok(DenoiserOutput { logits: Logits::zeros(n), frames: FrameSet(input.frames.0[..n].to_vec()), torsions: None })
        }
    }

    #[test]
    fn shape_violation_is_a_contract_error() {
        let err = run_sampling(&Broken, &[4], &SamplerConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, SamplerError::Contract(_)));
    }

    #[test]
    fn config_is_validated() {
        let d = NullDenoiser;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for cfg in [
            SamplerConfig { steps: 1, ..Default::default() },
            SamplerConfig { activation_threshold: 0.0, ..Default::default() },
            SamplerConfig { activation_threshold: 1.2, ..Default::default() },
            SamplerConfig { binding_window: [0.7, 0.3], ..Default::default() },
        ] {
            assert!(matches!(run_sampling(&d, &[3], &cfg, &mut rng), Err(SamplerError::Config(_))));
        }
        assert!(run_sampling(&d, &[], &SamplerConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn null_denoiser_produces_a_valid_complex() {
        let r = run(&NullDenoiser, &[7, 5], &SamplerConfig::default(), 9);
        assert_eq!(r.complex.len(), 12);
        assert!(r.complex.ca_positions().iter().all(|p: &Vec3| p.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn parallel_trajectories_match_sequential_ones() {
        let t = target(&[8], 8);
        let oracle = make_perturbed_oracle(&t, 1.0, 3);
        let cfg = SamplerConfig { steps: 20, ..Default::default() };
        let many = sample_many(&oracle, &[8], &cfg, &[1, 2, 3]);
        for (seed, r) in [1u64, 2, 3].into_iter().zip(many) {
            assert_eq!(r.unwrap(), run(&oracle, &[8], &cfg, seed));
        }
    }

    #[test]
    fn delayed_sequence_clock_still_unmasks() {
        let t = target(&[10], 9);
        let cfg = SamplerConfig { seq_delay: 0.3, ..Default::default() };
        let r = run(&make_ground_truth_oracle(&t).unwrap(), &[10], &cfg, 1);
        let first = r.steps().next().unwrap();
        assert_eq!(first.t_s, 0.0);
        assert_eq!(r.complex.sequence(), t.sequence());
    }
}
