//! Command-line interface.
//!
//! Every subcommand prints a single JSON summary line on stdout. Exit codes:
//! 0 success, 2 bad input or configuration, 3 a domain precondition failed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::allatom::extract_torsions_lenient;
use crate::config::Config;
use crate::flowmatch::{interp_rot, interp_trans, sample_prior, vf_rot, vf_trans, ScheduleKind};
use crate::losses::{
    loss_chi, loss_correction, loss_discrete, loss_distogram, loss_fape_residues, loss_refine_total, loss_se3_fm,
    FapeConfig,
};
use crate::metrics::{aar, chi_histograms, kabsch_rmsd};
use crate::proteinio::{
    crop_interface, curate, parse_pdb, write_pdb, Complex, CurationItem, ProteinIoError, SourceTag,
};
use crate::sampler::{
    chain_by_chain, make_ground_truth_oracle, make_perturbed_oracle, run_sampling, trajectory_jsonl, Denoiser,
    NullDenoiser, SamplerError, SamplingResult,
};
use crate::seqflow::{Logits, Sequence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Logit margin used to turn a structure's sequence into a prediction.
const PEAK_MARGIN: f64 = 20.0;

#[derive(Debug, Parser)]
#[command(name = "protgen", version, about = "All-atom protein flow matching toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a directory of PDB files and report per-item verdicts.
    Curate(CurateArgs),
    /// Crop a complex to the residues nearest a random interface contact.
    Crop(CropArgs),
    /// Sample a complex with a reference denoiser.
    Sample(SampleArgs),
    /// Tabulate per-residue chi angles of one structure.
    Torsions(TorsionArgs),
    /// Aggregate chi-angle histograms over a directory of structures.
    Hist(HistArgs),
    /// Evaluate the loss suite between a predicted and a true structure.
    Losses(LossArgs),
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSONL report, one record per input file.
    #[arg(long)]
    pub report: PathBuf,
    /// Optional list of kept identifiers, one per line.
    #[arg(long)]
    pub kept: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Comma-separated chain lengths; defaults to the target's chains.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Structure the reference denoiser reproduces. Without one, a
    /// denoiser that knows nothing is used.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Perturb the target's sequence-and-backbone predictions by this many Å.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
    /// Trajectory log; defaults to the output path with a `.jsonl` suffix.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub chain_by_chain: bool,
}

#[derive(Debug, Args)]
pub struct TorsionArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the shared noisy state for the flow-matching term.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure with its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self { code: EXIT_DOMAIN, message: message.into() }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<ProteinIoError> for CliError {
    fn from(e: ProteinIoError) -> Self {
        match e {
            ProteinIoError::SingleChain | ProteinIoError::NoInterface => CliError::domain(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Config(_) | SamplerError::IncompleteTarget(_) | SamplerError::Io(_) => {
                CliError::input(e.to_string())
            }
            other => CliError::domain(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(Value::Null) => EXIT_OK,
        Ok(summary) => {
            let _ = writeln!(out, "{summary}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            let _ = writeln!(out, "{}", json!({"status": "error", "code": e.code, "message": e.message}));
            e.code
        }
    }
}

pub fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<Value, CliError> {
    match cmd {
        Command::Curate(a) => cmd_curate(a, err),
        Command::Crop(a) => cmd_crop(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Torsions(a) => cmd_torsions(a, err),
        Command::Hist(a) => cmd_hist(a, err),
        Command::Losses(a) => cmd_losses(a, out),
        Command::Config => {
            // The TOML itself is the output, so it stays pipeable into a file.
            let _ = write!(out, "{}", Config::default().to_toml_string());
            Ok(Value::Null)
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn read_structure(path: &Path, err: &mut dyn Write) -> Result<Complex, CliError> {
    let parsed = parse_pdb(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        let _ = writeln!(err, "warning: {}: {}", path.display(), w.message);
    }
    Ok(parsed.complex)
}

/// `.pdb` files of a directory in name order.
fn pdb_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pdb")))
        .collect();
    files.sort();
    Ok(files)
}

/// One line of an optional `manifest.jsonl` next to the curated files.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    file: String,
    source: SourceTag,
    #[serde(default)]
    cluster_id: Option<String>,
}

fn cmd_curate(a: &CurateArgs, err: &mut dyn Write) -> Result<Value, CliError> {
    let cfg = Config::load_or_default(a.config.as_deref())?;
    let manifest_path = a.input.join("manifest.jsonl");
    let mut manifest = std::collections::HashMap::new();
    if manifest_path.exists() {
        for (i, line) in read_text(&manifest_path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: ManifestEntry = serde_json::from_str(line)
                .map_err(|e| CliError::input(format!("manifest.jsonl line {}: {e}", i + 1)))?;
            manifest.insert(e.file.clone(), e);
        }
    }
    let mut items = Vec::new();
    for path in pdb_files(&a.input)? {
        let mut complex = read_structure(&path, err)?;
        let name = path.file_name().expect("listed file").to_string_lossy().to_string();
        let id = path.file_stem().expect("listed file").to_string_lossy().to_string();
        let entry = manifest.get(&name);
        let source = entry.map(|e| e.source).unwrap_or(if complex.chains.len() > 1 {
            SourceTag::PdbMultichain
        } else {
            SourceTag::PdbSinglechain
        });
        complex.metadata.source_id = id.clone();
        complex.metadata.cluster_id = entry.and_then(|e| e.cluster_id.clone());
        // Predicted structures carry per-residue confidence in the CA B-factor.
        if matches!(source, SourceTag::Swissprot | SourceTag::Afdb) {
            complex.metadata.plddt = Some(complex.ca_b_factors());
        }
        items.push(CurationItem { id, source, complex });
    }
    let (kept, records) = curate(&items, &cfg.curation);
    let report: String =
        records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect();
    write_text(&a.report, &report)?;
    if let Some(path) = &a.kept {
        write_text(path, &kept.iter().map(|k| format!("{k}\n")).collect::<String>())?;
    }
    Ok(json!({
        "status": "ok",
        "command": "curate",
        "items": records.len(),
        "kept": kept.len(),
        "dropped": records.len() - kept.len(),
    }))
}

fn cmd_crop(a: &CropArgs) -> Result<Value, CliError> {
    let cfg = Config::load_or_default(a.config.as_deref())?;
    let complex = read_structure(&a.input, &mut std::io::sink())?;
    // Checked up front: inputs within budget would otherwise pass unchanged.
    if complex.chains.len() < 2 {
        return Err(ProteinIoError::SingleChain.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let cropped = crop_interface(&complex, &cfg.crop, &mut rng)?;
    write_text(&a.output, &write_pdb(&cropped))?;
    let pair = cropped.metadata.crop.as_ref().map(|r| {
        let label = |x: crate::proteinio::ResidueRef| {
            let ch = &complex.chains[x.chain];
            json!({"chain": ch.id.to_string(), "number": ch.residues[x.residue].number})
        };
        json!({"a": label(r.pair.a), "b": label(r.pair.b), "distance": r.pair.distance})
    });
    Ok(json!({
        "status": "ok",
        "command": "crop",
        "before": complex.len(),
        "after": cropped.len(),
        "pair": pair,
    }))
}

fn cmd_sample(a: &SampleArgs) -> Result<Value, CliError> {
    let mut cfg = Config::load_or_default(a.config.as_deref())?.sampler;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let target = a.target.as_deref().map(|p| read_structure(p, &mut std::io::sink())).transpose()?;
    let lengths = match (&target, a.lengths.is_empty()) {
        (Some(t), true) => t.chain_lengths(),
        (_, false) => a.lengths.clone(),
        (None, true) => return Err(CliError::input("--lengths is required without --target")),
    };
    if lengths.contains(&0) {
        return Err(CliError::input("chain lengths must be positive"));
    }
    if let Some(t) = &target {
        if lengths.iter().sum::<usize>() != t.len() {
            return Err(CliError::input(format!(
                "lengths sum to {} but the target has {} residues",
                lengths.iter().sum::<usize>(),
                t.len()
            )));
        }
    }
    if a.noise.is_some_and(|s| !(s >= 0.0)) {
        return Err(CliError::input("--noise must be non-negative"));
    }
    if a.noise.is_some() && target.is_none() {
        return Err(CliError::input("--noise needs --target"));
    }
    let denoiser: Box<dyn Denoiser> = match (&target, a.noise) {
        (Some(t), Some(s)) => {
            make_ground_truth_oracle(t)?;
            Box::new(make_perturbed_oracle(t, s, cfg.seed))
        }
        (Some(t), None) => Box::new(make_ground_truth_oracle(t)?),
        (None, _) => Box::new(NullDenoiser),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let result: SamplingResult = if a.chain_by_chain {
        chain_by_chain(denoiser.as_ref(), &lengths, &cfg, &mut rng)?
    } else {
        run_sampling(denoiser.as_ref(), &lengths, &cfg, &mut rng)?
    };
    write_text(&a.output, &write_pdb(&result.complex))?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".jsonl");
        PathBuf::from(p)
    });
    write_text(&log_path, &trajectory_jsonl(&result.log))?;

    let mut summary = json!({
        "status": "ok",
        "command": "sample",
        "lengths": lengths,
        "seed": cfg.seed,
        "steps": cfg.steps,
        "sequence": result.complex.sequence().to_string(),
        "log": log_path.display().to_string(),
    });
    if let Some(t) = &target {
        let rmsd = kabsch_rmsd(&result.complex.ca_positions(), &t.ca_positions())
            .map_err(|e| CliError::domain(e.to_string()))?;
        let recovery = aar(&result.complex.sequence(), &t.sequence()).map_err(|e| CliError::domain(e.to_string()))?;
        summary["rmsd"] = json!(rmsd);
        summary["aar"] = json!(recovery);
    }
    Ok(summary)
}

fn chi_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn cmd_torsions(a: &TorsionArgs, err: &mut dyn Write) -> Result<Value, CliError> {
    let complex = read_structure(&a.input, err)?;
    let mut table = String::from("chain\tnumber\tresidue\tchi1\tchi2\tchi3\tchi4\n");
    let mut rows = 0usize;
    let mut warnings = 0usize;
    for ch in &complex.chains {
        for r in &ch.residues {
            if r.aa.chi_count() == 0 {
                continue;
            }
            let (chi, missing) = extract_torsions_lenient(&r.atoms, r.aa);
            for m in &missing {
                let _ = writeln!(err, "warning: {} {}{}: {m}", ch.id, r.aa, r.number);
            }
            warnings += missing.len();
            let _ = writeln!(
                table,
                "{}\t{}{}\t{}\t{}\t{}\t{}\t{}",
                ch.id,
                r.number,
                r.insertion.to_string().trim(),
                r.aa.three(),
                chi_cell(chi.get(0)),
                chi_cell(chi.get(1)),
                chi_cell(chi.get(2)),
                chi_cell(chi.get(3)),
            );
            rows += 1;
        }
    }
    write_text(&a.output, &table)?;
    Ok(json!({"status": "ok", "command": "torsions", "residues": rows, "warnings": warnings}))
}

fn cmd_hist(a: &HistArgs, err: &mut dyn Write) -> Result<Value, CliError> {
    let mut data = Vec::new();
    let mut warnings = 0usize;
    for path in pdb_files(&a.input)? {
        let c = read_structure(&path, err)?;
        warnings += c.residues().map(|r| extract_torsions_lenient(&r.atoms, r.aa).1.len()).sum::<usize>();
        data.push(c);
    }
    let h = chi_histograms(&data, a.bins).map_err(|e| CliError::input(e.to_string()))?;
    write_text(&a.output, &h.to_tsv())?;
    Ok(json!({
        "status": "ok",
        "command": "hist",
        "structures": data.len(),
        "bins": a.bins,
        "total": h.total(),
        "warnings": warnings,
    }))
}

/// Loss terms between two structures of equal size, in print order.
pub fn loss_report(pred: &Complex, truth: &Complex, fape: &FapeConfig, seed: u64) -> Result<Vec<(&'static str, Option<f64>)>, CliError> {
    if pred.len() != truth.len() {
        return Err(CliError::input(format!("residue counts differ: {} vs {}", pred.len(), truth.len())));
    }
    let lossy = |e: crate::losses::LossError| CliError::input(e.to_string());
    let (pf, tf) = (pred.frames(), truth.frames());
    let n = truth.len();

    // Fields at a shared noisy state, toward each structure.
    let x0 = sample_prior(n, &mut ChaCha8Rng::seed_from_u64(seed), 10.0).map_err(|e| CliError::domain(e.to_string()))?;
    let t = 0.5;
    let mut fields = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let xt = interp_trans(&x0[i].translation, &tf[i].translation, t);
        let rt = interp_rot(&x0[i].rotation, &tf[i].rotation, t, ScheduleKind::Linear)
            .map_err(|e| CliError::domain(e.to_string()))?;
        let field = |target: &crate::geom3::RigidTransform| -> Result<_, CliError> {
            let v = vf_trans(&xt, &target.translation, t).map_err(|e| CliError::domain(e.to_string()))?;
            let w = vf_rot(&rt, &target.rotation, t, ScheduleKind::Linear).map_err(|e| CliError::domain(e.to_string()))?;
            Ok((v, w))
        };
        let (pv, pw) = field(&pf[i])?;
        let (tv, tw) = field(&tf[i])?;
        fields.0.push(pv);
        fields.1.push(tv);
        fields.2.push(pw);
        fields.3.push(tw);
    }
    let se3 = loss_se3_fm(&fields.0, &fields.1, &fields.2, &fields.3).map_err(lossy)?;

    let s_true: Sequence = truth.sequence();
    let logits = Logits::peaked(&pred.sequence(), PEAK_MARGIN);
    let all: Vec<usize> = (0..n).collect();
    let discrete = loss_discrete(&logits, &s_true, &all).map_err(lossy)?;
    let (pa, ta) = (pred.residue_atoms(), truth.residue_atoms());
    let fape_all = loss_fape_residues(&pf, &pa, &tf, &ta, fape).map_err(lossy)?;
    let fape_bb = loss_fape_residues(&pf, &pa, &tf, &ta, &FapeConfig { backbone_only: true, ..*fape }).map_err(lossy)?;
    let dist = loss_distogram(&pred.ca_positions(), &truth.ca_positions()).map_err(lossy)?;
    // Chi angles only compare between identical residue types.
    let chi = if pred.sequence() == s_true {
        let symmetry: Vec<[bool; 4]> = truth.residues().map(|r| r.aa.chi_symmetry()).collect();
        Some(loss_chi(&pred.torsions(), &truth.torsions(), &symmetry).map_err(lossy)?)
    } else {
        None
    };
    let corr = loss_correction(&logits, &pf, &s_true, &tf).map_err(lossy)?;
    Ok(vec![
        ("se3-fm", Some(se3)),
        ("discrete", Some(discrete)),
        ("consistency", None),
        ("fape", Some(fape_all)),
        ("fape-backbone", Some(fape_bb)),
        ("distogram", Some(dist)),
        ("chi", chi),
        ("correction", Some(corr)),
        ("refine-total", Some(loss_refine_total(corr, fape_bb, dist))),
    ])
}

fn cmd_losses(a: &LossArgs, out: &mut dyn Write) -> Result<Value, CliError> {
    let cfg = Config::load_or_default(a.config.as_deref())?;
    let pred = read_structure(&a.pred, &mut std::io::sink())?;
    let truth = read_structure(&a.truth, &mut std::io::sink())?;
    let report = loss_report(&pred, &truth, &cfg.fape, a.seed)?;
    let mut summary = json!({"status": "ok", "command": "losses", "residues": truth.len()});
    for (label, value) in &report {
        match value {
            Some(v) => {
                let _ = writeln!(out, "{label:<14}{v:.9}");
                summary[*label] = json!(v);
            }
            None => {
                let _ = writeln!(out, "{label:<14}n/a");
                summary[*label] = Value::Null;
            }
        }
    }
    Ok(summary)
}
