//! The `rotormap` command line.
//!
//! Every JSON document carries `schema_version` and the parsed `run_config`,
//! and all randomness derives from `--seed`, so a run is reproduced
//! byte-for-byte from its own output. CSV headers name their units.
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::angular::{self, Variant};
use crate::auth::{self, AuthConfig, Encoder, ShotModel};
use crate::calib::{self, PairScorer, RopeScorer};
use crate::lev;
use crate::rng;
use crate::rope::{self, RopeParams};
use crate::rotormap::{self, Location};
use crate::seqio::{self, DnaSequence, FastaRecord, IupacMode};
use crate::stats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug, Serialize)]
#[command(name = "rotormap", version, about = "RoPE fingerprints of DNA: correlation, mapping, circuits and authentication")]
pub struct Cli {
    /// Worker threads (default: all cores); results do not depend on it.
    #[arg(long, global = true, env = "RDNA_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fidelity against mutation rate: scatter, fitted curve and RMSE table.
    Correlate(CorrelateArgs),
    /// Fit correlation curves or per-fragment thresholds.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Encode the first FASTA record into an RDNA1 file.
    Encode(EncodeArgs),
    /// Build an RMIX1 fragment index of a reference.
    Index(IndexArgs),
    /// Map reads against an index.
    Map(MapArgs),
    /// Angular circuits from RDNA1 encodings.
    #[command(subcommand)]
    Angular(AngularCommand),
    /// The DNA authentication protocol.
    #[command(subcommand)]
    Auth(AuthCommand),
    /// Levenshtein distance between two strings.
    Lev(LevArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IupacArg {
    Strict,
    Probabilistic,
    Randomize,
}

fn iupac_mode(arg: IupacArg, seed: u64) -> IupacMode {
    match arg {
        IupacArg::Strict => IupacMode::Strict,
        IupacArg::Probabilistic => IupacMode::Probabilistic,
        IupacArg::Randomize => IupacMode::Randomize { seed },
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerArg {
    Rope,
    Angular,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Standard,
    Compact,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Compact => Variant::Compact,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ScorerOpts {
    /// Compare RoPE vectors directly or through Angular circuits.
    #[arg(long, value_enum, default_value = "rope")]
    pub scorer: ScorerArg,
    /// Circuit width for the angular scorer.
    #[arg(long, default_value_t = 14)]
    pub qubits: usize,
    /// Angular circuit layout.
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    /// Multiplier applied to circuit parameters.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

impl ScorerOpts {
    fn scorer(&self, rope: RopeParams) -> Box<dyn PairScorer> {
        match self.scorer {
            ScorerArg::Rope => Box::new(RopeScorer(rope)),
            ScorerArg::Angular => Box::new(angular::AngularScorer { rope, qubits: self.qubits, variant: self.variant.into(), scale: self.scale }),
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CorrelateArgs {
    /// Sequence length.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// RoPE parameters, e.g. `s=5,m=4` or `s=8,m=4,t=4,fine`.
    #[arg(long, default_value = "s=5,m=4")]
    pub rope: RopeParams,
    #[command(flatten)]
    pub scorer: ScorerOpts,
    /// Scatter pairs, with rates uniform in [rate-min, rate-max).
    #[arg(long, default_value_t = 2000)]
    pub pairs: usize,
    /// Lowest scatter mutation rate.
    #[arg(long, default_value_t = 0.0)]
    pub rate_min: f64,
    /// Upper end (exclusive) of the scatter mutation rate.
    #[arg(long, default_value_t = 0.5)]
    pub rate_max: f64,
    /// Curve grid as `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.01:0.49:0.01")]
    pub grid: String,
    /// Pairs drawn per curve knot.
    #[arg(long, default_value_t = 40)]
    pub samples_per_knot: usize,
    /// RMSE evaluation rates, same syntax as `--grid`.
    #[arg(long, default_value = "0.02:0.24:0.02")]
    pub rmse_rates: String,
    /// Pairs drawn per RMSE rate.
    #[arg(long, default_value_t = 50)]
    pub rmse_samples: usize,
    /// Also compute the exact Levenshtein distance of each scatter pair.
    #[arg(long)]
    pub with_lev: bool,
    /// Directory for scatter.csv, curve.csv, curve.json and rmse.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrateCommand {
    /// Fit a fidelity-to-rate curve.
    Curve(CurveArgs),
    /// Attach per-fragment fidelity thresholds to an index.
    Thresholds(ThresholdArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct CurveArgs {
    /// Sequence length.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// RoPE parameters.
    #[arg(long, default_value = "s=5,m=4")]
    pub rope: RopeParams,
    #[command(flatten)]
    pub scorer: ScorerOpts,
    /// Knot rates as `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.01:0.49:0.01")]
    pub grid: String,
    /// Pairs drawn per knot.
    #[arg(long, default_value_t = 40)]
    pub samples_per_knot: usize,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct ThresholdArgs {
    /// RMIX1 index to calibrate.
    #[arg(long)]
    pub index: PathBuf,
    /// Reference FASTA the index was built from.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Mutation rate the thresholds should still accept.
    #[arg(long, default_value_t = 0.2)]
    pub rate: f64,
    /// Mutated samples per fragment.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Threshold is mean − z·stddev.
    #[arg(long, default_value_t = 2.0)]
    pub z: f64,
    /// Output index; defaults to rewriting `--index`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EncodeArgs {
    /// FASTA or FASTQ input.
    #[arg(long)]
    pub input: PathBuf,
    /// RoPE parameters.
    #[arg(long, default_value = "s=8,m=4,t=4,fine")]
    pub rope: RopeParams,
    /// Handling of ambiguity codes.
    #[arg(long, value_enum, default_value = "strict")]
    pub iupac: IupacArg,
    /// Record to encode instead of the first.
    #[arg(long)]
    pub record: Option<String>,
    /// RDNA1 output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct IndexArgs {
    /// Reference FASTA; the first record is indexed.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Fragment length N.
    #[arg(long, default_value_t = 20_000)]
    pub window: usize,
    /// Offset between consecutive fragments.
    #[arg(long, default_value_t = 1250)]
    pub step: usize,
    /// RoPE parameters.
    #[arg(long, default_value = "s=8,m=4,t=4,fine")]
    pub rope: RopeParams,
    /// Handling of ambiguity codes.
    #[arg(long, value_enum, default_value = "strict")]
    pub iupac: IupacArg,
    /// RMIX1 output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RegimeArg {
    Top1,
    Threshold,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StrandsArg {
    Both,
    Forward,
}

#[derive(Args, Debug, Serialize)]
pub struct MapArgs {
    /// RMIX1 index.
    #[arg(long)]
    pub index: PathBuf,
    /// FASTA or FASTQ reads.
    #[arg(long)]
    pub reads: PathBuf,
    /// Best fragment only, or every fragment above its threshold.
    #[arg(long, value_enum, default_value = "top1")]
    pub regime: RegimeArg,
    /// Also try the reverse complement of each read.
    #[arg(long, value_enum, default_value = "both")]
    pub strands: StrandsArg,
    /// Slide ±RADIUS bases around each best hit; needs `--ref`.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Reference FASTA for refinement.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Handling of ambiguity codes in reads.
    #[arg(long, value_enum, default_value = "strict")]
    pub iupac: IupacArg,
    /// Results JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularCommand {
    /// Write the circuit for an encoding as JSON.
    Build(CircuitArgs),
    /// Simulate the circuit and sample its return to |0…0⟩.
    Simulate(CircuitArgs),
    /// Mirror fidelity between the circuits of two encodings.
    Mirror(MirrorArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct CircuitOpts {
    /// Circuit width.
    #[arg(long, default_value_t = 14)]
    pub qubits: usize,
    /// Circuit layout.
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    /// Multiplier applied to circuit parameters.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Measurement shots to sample.
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct CircuitArgs {
    /// RDNA1 encoding.
    #[arg(long)]
    pub rope_file: PathBuf,
    #[command(flatten)]
    pub circuit: CircuitOpts,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct MirrorArgs {
    /// RDNA1 encoding prepared by the first circuit.
    #[arg(long)]
    pub rope_file: PathBuf,
    /// RDNA1 encoding whose circuit is inverted.
    #[arg(long)]
    pub rope_file_b: PathBuf,
    #[command(flatten)]
    pub circuit: CircuitOpts,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthCommand {
    /// Simulate protocol rounds and report error rates and qubit cost.
    Simulate(AuthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AuthModeArg {
    Ideal,
    Angular,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ShotModelArg {
    Sampled,
    Exact,
}

#[derive(Args, Debug, Serialize)]
pub struct AuthArgs {
    /// Sequence length.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Honest mutation rate a/N.
    #[arg(long, default_value_t = 0.1)]
    pub a_rate: f64,
    /// Impostor mutation rate b/N.
    #[arg(long, default_value_t = 0.3)]
    pub b_rate: f64,
    /// Target bound on both error rates.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Ideal RoPE fidelities or Angular circuit fidelities.
    #[arg(long, value_enum, default_value = "ideal")]
    pub mode: AuthModeArg,
    /// Ideal mode: RoPE qubits (picks `--rope` when absent). Angular mode: circuit width.
    #[arg(long, default_value_t = 12)]
    pub qubits: usize,
    /// RoPE parameters (angular mode default: `s=4,m=2`).
    #[arg(long)]
    pub rope: Option<RopeParams>,
    /// Angular circuit layout.
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    /// Angular parameter multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Protocol rounds; even rounds are honest.
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Pairs per rate when calibrating f_a and f_b.
    #[arg(long, default_value_t = 100)]
    pub calib_samples: usize,
    /// Multiply all return probabilities (hardware-noise stand-in).
    #[arg(long)]
    pub noise_factor: Option<f64>,
    /// Sample shot counts or use the exact return probability.
    #[arg(long, value_enum, default_value = "sampled")]
    pub shot_model: ShotModelArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LevArgs {
    /// First string.
    #[arg(long)]
    pub a: String,
    /// Second string.
    #[arg(long)]
    pub b: String,
    /// Band half-width; exact when the distance fits.
    #[arg(long)]
    pub band: Option<usize>,
    /// Print a JSON document instead of the bare distance (`>BAND` when the
    /// band was exhausted).
    #[arg(long)]
    pub json: bool,
}

/// `(2^q)`-dimensional RoPE parameters: `s = (q−2)/2, m = 4` for even `q`
/// and `s = (q−1)/2, m = 2` for odd `q`.
pub fn rope_for_qubits(q: usize) -> anyhow::Result<RopeParams> {
    if q < 3 {
        bail!("need at least 3 qubits for a RoPE encoding");
    }
    let p = if q.is_multiple_of(2) { RopeParams::new((q - 2) / 2, 4) } else { RopeParams::new((q - 1) / 2, 2) };
    p.validate()?;
    Ok(p)
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or `a,b,c`.
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let [a, b, s] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<f64>());
        let (a, b, s) = (a?, b?, s?);
        if s <= 0.0 || b < a {
            bail!("grid {text:?} needs start ≤ stop and a positive step");
        }
        let count = ((b - a) / s + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| ((a + i as f64 * s) * 1e12).round() / 1e12).collect());
    }
    text.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value {v:?}"))).collect()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    run_config: &'a Cli,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(cli: &Cli, body: T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope { schema_version: SCHEMA_VERSION, run_config: cli, body })? + "\n")
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_records(path: &Path, mode: IupacMode) -> anyhow::Result<Vec<FastaRecord>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    seqio::parse_reads(&bytes, mode).with_context(|| format!("parsing {}", path.display()))
}

fn first_record(path: &Path, mode: IupacMode, name: Option<&str>) -> anyhow::Result<FastaRecord> {
    let records = read_records(path, mode)?;
    match name {
        Some(n) => records.into_iter().find(|r| r.name == n).with_context(|| format!("no record named {n:?}")),
        None => records.into_iter().next().with_context(|| format!("{} holds no records", path.display())),
    }
}

fn read_encoding(path: &Path) -> anyhow::Result<rope::RopeEncoding> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    rope::read_encoding(&mut bytes.as_slice()).with_context(|| format!("parsing {}", path.display()))
}

fn read_index(path: &Path) -> anyhow::Result<rotormap::FragmentIndex> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    rotormap::read_index(&mut bytes.as_slice()).with_context(|| format!("parsing {}", path.display()))
}

fn write_index(path: &Path, index: &rotormap::FragmentIndex) -> anyhow::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    rotormap::write_index(&mut w, index)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_correlate(cli: &Cli, args: &CorrelateArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&args.grid)?;
    let eval = parse_grid(&args.rmse_rates)?;
    let scorer = args.scorer.scorer(args.rope);
    let rates = calib::uniform_rates(args.pairs, args.rate_min, args.rate_max, rng::child_seed(cli.seed, 1));
    let points = calib::scatter(scorer.as_ref(), args.n, &rates, rng::child_seed(cli.seed, 2), args.with_lev)?;
    let curve = calib::fit_curve_with(scorer.as_ref(), args.n, &grid, args.samples_per_knot, rng::child_seed(cli.seed, 3))?;
    let table = calib::rmse_with(&curve, scorer.as_ref(), &eval, args.rmse_samples, rng::child_seed(cli.seed, 4))?;

    fs::create_dir_all(&args.out_dir)?;
    let mut scatter = String::from("mutation_rate[edits/base],edits[count],levenshtein[edits],fidelity[1],predicted_rate[edits/base]\n");
    for p in &points {
        let lev = p.levenshtein.map(|d| d.to_string()).unwrap_or_default();
        scatter.push_str(&format!("{},{},{},{},{}\n", p.rate, p.edits, lev, p.fidelity, calib::predict_rate(&curve, p.fidelity)));
    }
    fs::write(args.out_dir.join("scatter.csv"), scatter)?;
    fs::write(args.out_dir.join("curve.csv"), curve.to_csv())?;
    fs::write(args.out_dir.join("curve.json"), json(cli, &curve)?)?;
    fs::write(args.out_dir.join("rmse.csv"), table.to_csv())?;

    let fids: Vec<f64> = points.iter().map(|p| p.fidelity).collect();
    #[derive(Serialize)]
    struct Summary {
        pairs: usize,
        spearman_rate_fidelity: f64,
        pooled_rmse_below_0_25: Option<f64>,
        redrawn: usize,
    }
    let summary = Summary {
        pairs: points.len(),
        spearman_rate_fidelity: stats::spearman(&rates, &fids),
        pooled_rmse_below_0_25: table.pooled_below(0.25),
        redrawn: curve.meta.redrawn,
    };
    emit(None, &json(cli, summary)?)
}

pub fn cmd_calibrate(cli: &Cli, cmd: &CalibrateCommand) -> anyhow::Result<()> {
    match cmd {
        CalibrateCommand::Curve(a) => {
            let scorer = a.scorer.scorer(a.rope);
            let curve = calib::fit_curve_with(scorer.as_ref(), a.n, &parse_grid(&a.grid)?, a.samples_per_knot, cli.seed)?;
            let text = match a.format {
                FormatArg::Json => json(cli, &curve)?,
                FormatArg::Csv => curve.to_csv(),
            };
            emit(Some(&a.out), &text)
        }
        CalibrateCommand::Thresholds(a) => {
            let mut index = read_index(&a.index)?;
            let reference = first_record(&a.reference, IupacMode::Strict, Some(&index.ref_id))
                .or_else(|_| first_record(&a.reference, IupacMode::Strict, None))?;
            let report = calib::estimate_thresholds(&index, &reference.seq, a.rate, a.samples, a.z, cli.seed)?;
            index.set_thresholds(report.thresholds.clone())?;
            write_index(a.out.as_ref().unwrap_or(&a.index), &index)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                fragments: usize,
                flagged: &'a [usize],
                mean_threshold: f64,
            }
            let finite: Vec<f64> = report.thresholds.iter().filter(|t| t.is_finite()).map(|&t| f64::from(t)).collect();
            emit(None, &json(cli, Summary { fragments: index.len(), flagged: &report.flagged, mean_threshold: stats::mean(&finite) })?)
        }
    }
}

pub fn cmd_encode(cli: &Cli, a: &EncodeArgs) -> anyhow::Result<()> {
    let rec = first_record(&a.input, iupac_mode(a.iupac, cli.seed), a.record.as_deref())?;
    let enc = rope::encode(&rec.seq, &a.rope)?;
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    rope::write_encoding(&mut w, &enc)?;
    w.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        record: &'a str,
        length: usize,
        dim: usize,
        qubits: usize,
        degenerate: bool,
    }
    emit(None, &json(cli, Summary { record: &rec.name, length: rec.seq.len(), dim: enc.dim(), qubits: a.rope.qubits(), degenerate: enc.is_degenerate() })?)
}

pub fn cmd_index(cli: &Cli, a: &IndexArgs) -> anyhow::Result<()> {
    let rec = first_record(&a.reference, iupac_mode(a.iupac, cli.seed), None)?;
    let index = rotormap::build_index(&rec.seq, &rec.name, a.window, a.step, &a.rope)?;
    write_index(&a.out, &index)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        ref_id: &'a str,
        reference_length: usize,
        fragments: usize,
        degenerate_fragments: usize,
        dim: usize,
    }
    emit(
        None,
        &json(cli, Summary { ref_id: &rec.name, reference_length: rec.seq.len(), fragments: index.len(), degenerate_fragments: index.degenerate_count(), dim: index.dim() })?,
    )
}

#[derive(Serialize)]
struct RefinedOut {
    offset: u64,
    fidelity: f64,
    clipped: bool,
}

#[derive(Serialize)]
struct ReadOut {
    id: String,
    strand: Option<rotormap::Strand>,
    locations: Vec<Location>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined: Option<RefinedOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn cmd_map(cli: &Cli, a: &MapArgs) -> anyhow::Result<()> {
    let index = read_index(&a.index)?;
    let reads = read_records(&a.reads, iupac_mode(a.iupac, cli.seed))?;
    let reference: Option<DnaSequence> = match (&a.refine, &a.reference) {
        (Some(_), Some(path)) => Some(first_record(path, IupacMode::Strict, Some(&index.ref_id)).or_else(|_| first_record(path, IupacMode::Strict, None))?.seq),
        (Some(_), None) => bail!("--refine needs --ref"),
        (None, _) => None,
    };
    let both = a.strands == StrandsArg::Both;
    let results = match a.regime {
        RegimeArg::Top1 => rotormap::search_top1(&index, &reads, both)?,
        RegimeArg::Threshold => rotormap::search_threshold(&index, &reads, both)?,
    };
    let mut out = Vec::with_capacity(reads.len());
    for (read, res) in reads.iter().zip(results) {
        match res {
            Ok(r) => {
                let refined = match (a.refine, &reference, r.best()) {
                    (Some(radius), Some(reference), Some(best)) => {
                        let n = index.window();
                        let oriented = if best.strand == rotormap::Strand::Forward { read.seq.clone() } else { read.seq.reverse_complement() };
                        let query = rope::encode(&oriented.slice(0, n)?, index.params())?;
                        let rf = rotormap::refine(reference, &query, best.offset as usize, radius, 1)?;
                        Some(RefinedOut { offset: rf.offset as u64, fidelity: rf.fidelity, clipped: rf.clipped })
                    }
                    _ => None,
                };
                out.push(ReadOut { id: r.read_id, strand: r.strand, locations: r.locations, refined, error: None });
            }
            Err(e) => out.push(ReadOut { id: read.name.clone(), strand: None, locations: vec![], refined: None, error: Some(e.to_string()) }),
        }
    }
    #[derive(Serialize)]
    struct Body {
        ref_id: String,
        results: Vec<ReadOut>,
    }
    emit(Some(&a.out), &json(cli, Body { ref_id: index.ref_id.clone(), results: out })?)
}

fn circuit_for(path: &Path, o: &CircuitOpts) -> anyhow::Result<angular::Circuit> {
    let enc = read_encoding(path)?;
    Ok(angular::build(&rope::to_real(&enc)?, o.qubits, o.variant.into(), o.scale)?)
}

pub fn cmd_angular(cli: &Cli, cmd: &AngularCommand) -> anyhow::Result<()> {
    match cmd {
        AngularCommand::Build(a) => {
            #[derive(Serialize)]
            struct Body {
                circuit: angular::Circuit,
            }
            let circuit = circuit_for(&a.rope_file, &a.circuit)?;
            emit(a.out.as_deref(), &json(cli, Body { circuit })?)
        }
        AngularCommand::Simulate(a) => {
            let c = circuit_for(&a.rope_file, &a.circuit)?;
            let state = angular::simulate(&c)?;
            let p0 = state.amps[0].norm_sqr().min(1.0);
            #[derive(Serialize)]
            struct Body {
                width: usize,
                layers: usize,
                norm: f64,
                fidelity_exact: f64,
                zero_count: u64,
                shots: u64,
            }
            let zero_count = angular::sample_shots(p0, a.circuit.shots, cli.seed)?;
            let body = Body { width: c.width, layers: c.layers.len(), norm: state.norm(), fidelity_exact: p0, zero_count, shots: a.circuit.shots };
            emit(a.out.as_deref(), &json(cli, body)?)
        }
        AngularCommand::Mirror(a) => {
            let wa = rope::to_real(&read_encoding(&a.rope_file)?)?;
            let wb = rope::to_real(&read_encoding(&a.rope_file_b)?)?;
            let o = &a.circuit;
            let fid = angular::mirror_fidelity_exact(&wa, &wb, o.qubits, o.variant.into(), o.scale)?.min(1.0);
            #[derive(Serialize)]
            struct Body {
                fidelity_exact: f64,
                zero_count: u64,
                shots: u64,
            }
            let body = Body { fidelity_exact: fid, zero_count: angular::sample_shots(fid, o.shots, cli.seed)?, shots: o.shots };
            emit(a.out.as_deref(), &json(cli, body)?)
        }
    }
}

pub fn cmd_auth(cli: &Cli, cmd: &AuthCommand) -> anyhow::Result<()> {
    let AuthCommand::Simulate(a) = cmd;
    let (rope, encoder) = match a.mode {
        AuthModeArg::Ideal => (a.rope.map_or_else(|| rope_for_qubits(a.qubits), Ok)?, Encoder::Ideal),
        AuthModeArg::Angular => (
            a.rope.unwrap_or(RopeParams::new(4, 2)),
            Encoder::Angular { qubits: a.qubits, variant: a.variant.into(), scale: a.scale },
        ),
    };
    let mut config = AuthConfig::calibrated(a.n, a.a_rate, a.b_rate, a.epsilon, rope, encoder, a.noise_factor, a.calib_samples, rng::child_seed(cli.seed, 1))?;
    config.shot_model = match a.shot_model {
        ShotModelArg::Sampled => ShotModel::Sampled,
        ShotModelArg::Exact => ShotModel::Exact,
    };
    let report = auth::simulate_protocol(&config, a.trials, rng::child_seed(cli.seed, 2))?;
    #[derive(Serialize)]
    struct Body {
        config: AuthConfig,
        report: auth::AuthReport,
    }
    emit(a.out.as_deref(), &json(cli, Body { config, report })?)
}

pub fn cmd_lev(cli: &Cli, a: &LevArgs) -> anyhow::Result<()> {
    let (x, y) = (a.a.as_bytes(), a.b.as_bytes());
    let res = match a.band {
        Some(band) => lev::levenshtein_banded(x, y, band)?,
        None => lev::levenshtein(x, y)?,
    };
    if a.json {
        emit(None, &json(cli, res)?)
    } else if res.exact {
        emit(None, &format!("{}\n", res.distance))
    } else {
        emit(None, &format!(">{}\n", res.distance))
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match &cli.command {
        Command::Correlate(a) => cmd_correlate(cli, a),
        Command::Calibrate(c) => cmd_calibrate(cli, c),
        Command::Encode(a) => cmd_encode(cli, a),
        Command::Index(a) => cmd_index(cli, a),
        Command::Map(a) => cmd_map(cli, a),
        Command::Angular(c) => cmd_angular(cli, c),
        Command::Auth(c) => cmd_auth(cli, c),
        Command::Lev(a) => cmd_lev(cli, a),
    }
}

/// Parses the process arguments, runs, and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    fn undocumented(cmd: &clap::Command, path: &str, out: &mut Vec<String>) {
        for arg in cmd.get_arguments() {
            if arg.get_help().is_none() && !["help", "version"].contains(&arg.get_id().as_str()) {
                out.push(format!("{path} --{}", arg.get_id()));
            }
        }
        for sub in cmd.get_subcommands() {
            undocumented(sub, &format!("{path} {}", sub.get_name()), out);
        }
    }

    #[test]
    fn every_flag_has_help() {
        let mut missing = Vec::new();
        undocumented(&Cli::command(), "rotormap", &mut missing);
        assert!(missing.is_empty(), "{missing:#?}");
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1:0.3:0.1").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_grid("0.01:0.49:0.01").unwrap().len(), 49);
        assert_eq!(parse_grid("0.2, 0.05").unwrap(), vec![0.2, 0.05]);
        assert!(parse_grid("0.3:0.1:0.1").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn qubit_presets() {
        assert_eq!(rope_for_qubits(12).unwrap(), RopeParams::new(5, 4));
        assert_eq!(rope_for_qubits(9).unwrap(), RopeParams::new(4, 2));
        assert_eq!(rope_for_qubits(16).unwrap(), RopeParams::new(7, 4));
        for q in 3..=20 {
            assert_eq!(rope_for_qubits(q).unwrap().dim(), 1 << q);
        }
    }
}
