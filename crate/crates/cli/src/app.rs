//! Command-line parsing and the subcommands.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use wtfbf::besov::{embedding_check, holder_membership, sequence_norm, smoothness_norm, BesovSpec};
use wtfbf::estimation::{bootstrap_ci, estimate, FitOptions};
use wtfbf::grid::GridSpec;
use wtfbf::hyperbolic::{analyze, analyze_tapered, level_moments_min, max_analysis_level, HyperbolicCoeffs};
use wtfbf::io::{decode_blocks, decode_grid, decode_jsonl, encode_blocks, encode_grid, encode_jsonl, BLOCK_MAGIC};
use wtfbf::meyer::MeyerFilterBank;
use wtfbf::model::{
    coeff_variance_exact, coeff_variance_power_law, covariance, field_variance, increment_variance,
    scaling_constant_c1, FieldParams, QuadratureSpec,
};
use wtfbf::synthesis::{CholeskyPlan, FrequencyGrid, SpectralPlan};

use crate::manifest::{FileDigest, RunManifest};
use crate::suites::{self, Context, Status, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wtfbf", version, about = "Simulate, analyze and estimate weighted tensorized fractional Brownian fields")]
struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true, env = "WTFBF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample realizations on a square grid.
    Simulate(SimulateArgs),
    /// Hyperbolic wavelet coefficients of a field file.
    Analyze(AnalyzeArgs),
    /// Estimate (H, α) from coefficient files.
    Estimate(EstimateArgs),
    /// Run acceptance suites.
    Verify(VerifyArgs),
    /// Quadrature values of the model moments.
    Oracle(OracleArgs),
    /// Besov sequence norms and the Hölder verdict of a coefficient file.
    BesovNorm(BesovNormArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cholesky,
    Spectral,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    Refined,
    Torus,
    TorusFolded,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    hurst: f64,
    /// Samples per axis.
    #[arg(long)]
    size: usize,
    /// Side length of the square `[0, extent]²`.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "spectral")]
    method: MethodArg,
    /// Frequency layout of the spectral method.
    #[arg(long, value_enum, default_value = "refined")]
    layout: LayoutArg,
    /// Number of realizations; more than one writes `<stem>-NNNN.<ext>`.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Blocks,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Tapered,
    Periodic,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Deepest level; defaults to `⌊log₂ n⌋ − 2`.
    #[arg(long)]
    levels: Option<i32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "tapered")]
    boundary: BoundaryArg,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Glob of coefficient files.
    #[arg(long = "in")]
    input: String,
    /// Bootstrap resamples; 0 gives the point estimate only.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.9)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coarsest level entering the fit.
    #[arg(long, default_value_t = 3)]
    min_level: i32,
    #[arg(long)]
    max_level: Option<i32>,
    /// Weight levels by their inverse log-variance.
    #[arg(long)]
    weighted: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Wall-clock budget in seconds; checks not started in time are skipped.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = suites::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleWhat {
    Variance,
    Covariance,
    IncrementVariance,
    CoeffVariance,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    what: OracleWhat,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    hurst: f64,
    #[arg(long, allow_negative_numbers = true)]
    x1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    y2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h2: Option<f64>,
    #[arg(long)]
    j1: Option<i32>,
    #[arg(long)]
    j2: Option<i32>,
    /// Relative tolerance of the quadrature.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Debug, Args)]
struct BesovNormArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    /// Integrability exponent; `inf` allowed.
    #[arg(long, value_parser = parse_exponent)]
    p: f64,
    /// Summability exponent; `inf` allowed.
    #[arg(long, value_parser = parse_exponent)]
    q: f64,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
}

fn parse_exponent(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

/// Failure of a command, mapped onto the exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Check(String),
}

impl From<wtfbf::error::Error> for Failure {
    fn from(e: wtfbf::error::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let rest: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &rest) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Outcome {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Analyze(a) => analyze_cmd(a, argv),
        Command::Estimate(a) => estimate_cmd(a, argv),
        Command::Verify(a) => verify(a, argv),
        Command::Oracle(a) => oracle(a, argv),
        Command::BesovNorm(a) => besov_norm(a, argv),
        Command::Replay(a) => replay(a),
    }
}

/// The command-line spelling of an enum value.
fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn emit(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

/// `dir/stem-0003.ext` for member `i` of an ensemble written to `out`.
fn member_path(out: &Path, i: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-{i:04}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{i:04}"),
    };
    out.with_file_name(name)
}

fn simulate(a: SimulateArgs, argv: &[String]) -> Outcome {
    let params = FieldParams::new(a.alpha, a.hurst)?;
    let grid = GridSpec::square(a.size, a.extent)?;
    if a.count == 0 {
        return Err(Failure::Usage("invalid parameter `count`: must be at least 1".into()));
    }
    let fields = match a.method {
        MethodArg::Cholesky => {
            let plan = CholeskyPlan::new(&params, &grid, &QuadratureSpec::default())?;
            if a.count == 1 {
                vec![plan.sample(a.seed)]
            } else {
                plan.ensemble(a.seed, a.count)
            }
        }
        MethodArg::Spectral => {
            let freq = match a.layout {
                LayoutArg::Refined => FrequencyGrid::refined(&grid)?,
                LayoutArg::Torus => FrequencyGrid::torus(&grid, false)?,
                LayoutArg::TorusFolded => FrequencyGrid::torus(&grid, true)?,
            };
            let plan = SpectralPlan::new(&params, &grid, &freq)?;
            if a.count == 1 {
                vec![plan.sample(a.seed).field]
            } else {
                plan.ensemble(a.seed, a.count)
            }
        }
    };
    let mut manifest = RunManifest::new(
        "simulate",
        argv,
        json!({
            "alpha": a.alpha, "hurst": a.hurst, "size": a.size, "extent": a.extent,
            "method": value_name(a.method),
            "layout": value_name(a.layout), "count": a.count,
        }),
        Some(a.seed),
    );
    let mut axis = 0.0f64;
    for (i, f) in fields.iter().enumerate() {
        let path = if a.count == 1 { a.out.clone() } else { member_path(&a.out, i) };
        fs::write(&path, encode_grid(f)).map_err(io_context(&path))?;
        manifest.outputs.push(FileDigest::of(&path)?);
        axis = axis.max(f.axis_max_abs());
    }
    manifest.write_next_to(&a.out)?;
    emit(&json!({ "manifest": manifest, "axis_max_abs": axis }));
    Ok(EXIT_OK)
}

fn analyze_cmd(a: AnalyzeArgs, argv: &[String]) -> Outcome {
    let bytes = fs::read(&a.input).map_err(io_context(&a.input))?;
    let field = decode_grid(&bytes)?;
    let levels = a.levels.unwrap_or_else(|| max_analysis_level(field.grid.n1.min(field.grid.n2)));
    let bank = MeyerFilterBank::new();
    let coeffs = match a.boundary {
        BoundaryArg::Periodic => analyze(&field, levels, &bank)?,
        BoundaryArg::Tapered => analyze_tapered(&field, levels, &bank)?,
    };
    let encoded = match a.format {
        FormatArg::Jsonl => encode_jsonl(&coeffs).into_bytes(),
        FormatArg::Blocks => encode_blocks(&coeffs),
    };
    fs::write(&a.out, encoded).map_err(io_context(&a.out))?;
    let mut manifest = RunManifest::new(
        "analyze",
        argv,
        json!({
            "levels": levels,
            "format": value_name(a.format),
            "boundary": value_name(a.boundary),
        }),
        None,
    );
    manifest.inputs.push(FileDigest::of(&a.input)?);
    manifest.outputs.push(FileDigest::of(&a.out)?);
    manifest.write_next_to(&a.out)?;
    let summary: Vec<Value> = level_moments_min(std::slice::from_ref(&coeffs), 1)?
        .iter()
        .map(|(&(j1, j2), &(mean, _))| {
            let count = coeffs.interior(j1).len() * coeffs.interior(j2).len();
            json!({ "level": [j1, j2], "mean_sq": mean, "count": count })
        })
        .collect();
    emit(&json!({ "manifest": manifest, "levels": summary }));
    Ok(EXIT_OK)
}

/// Reads a coefficient file in either export format.
pub fn read_coefficients(path: &Path) -> Result<HyperbolicCoeffs, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let decoded = if bytes.starts_with(BLOCK_MAGIC) {
        decode_blocks(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        decode_jsonl(text)
    };
    decoded.map_err(|e| format!("{}: {e}", path.display()))
}

fn estimate_cmd(a: EstimateArgs, argv: &[String]) -> Outcome {
    let mut paths: Vec<PathBuf> = glob::glob(&a.input)
        .map_err(|e| Failure::Usage(format!("invalid glob `{}`: {e}", a.input)))?
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Usage(format!("no coefficient files match `{}`", a.input)));
    }
    let ensemble: Vec<HyperbolicCoeffs> = paths
        .iter()
        .map(|p| read_coefficients(p))
        .collect::<Result<_, _>>()
        .map_err(Failure::Usage)?;
    let opts = FitOptions {
        min_level: a.min_level,
        max_level: a.max_level,
        weighted: a.weighted,
    };
    let mut manifest = RunManifest::new(
        "estimate",
        argv,
        json!({
            "bootstrap": a.bootstrap, "confidence": a.confidence,
            "min_level": a.min_level, "max_level": a.max_level, "weighted": a.weighted,
        }),
        Some(a.seed),
    );
    for p in &paths {
        manifest.inputs.push(FileDigest::of(p)?);
    }
    let report = if a.bootstrap == 0 {
        let (fit, point) = estimate(&ensemble, &opts)?;
        json!({ "manifest": manifest, "members": ensemble.len(), "fit": fit, "estimate": point })
    } else {
        let b = bootstrap_ci(&ensemble, a.bootstrap, a.confidence, a.seed, &opts)?;
        json!({
            "manifest": manifest, "members": ensemble.len(), "fit": b.fit, "estimate": b.point,
            "bootstrap": {
                "hurst": b.hurst, "alpha": b.alpha, "confidence": b.confidence,
                "resamples": b.resamples, "failed": b.failed,
            },
        })
    };
    emit(&report);
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs, argv: &[String]) -> Outcome {
    let budget = match a.budget {
        Some(b) if !(b >= 0.0 && b.is_finite()) => {
            return Err(Failure::Usage(format!("invalid parameter `budget`: {b}")));
        }
        b => b.map(Duration::from_secs_f64),
    };
    let ctx = Context::new(a.seed);
    let checks = suites::run(a.suite, budget, &ctx);
    for c in &checks {
        eprintln!("{}", c.line());
    }
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let failed = count(Status::Fail);
    let manifest = RunManifest::new("verify", argv, json!({ "suite": a.suite, "budget": a.budget }), Some(a.seed));
    emit(&json!({
        "manifest": manifest, "checks": checks,
        "passed": count(Status::Pass), "failed": failed, "skipped": count(Status::Skipped),
    }));
    Ok(if failed > 0 { EXIT_CHECK_FAILED } else { EXIT_OK })
}

fn require<T>(name: &str, v: Option<T>) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing argument `--{name}`")))
}

fn oracle(a: OracleArgs, argv: &[String]) -> Outcome {
    let params = FieldParams::new(a.alpha, a.hurst)?;
    let quad = QuadratureSpec::default().with_rel_tol(a.tol);
    let mut extra = json!({});
    let (point, est) = match a.what {
        OracleWhat::Variance => {
            let x = (require("x1", a.x1)?, require("x2", a.x2)?);
            (json!({ "x": x }), field_variance(&params, x.0, x.1, &quad)?)
        }
        OracleWhat::Covariance => {
            let x = (require("x1", a.x1)?, require("x2", a.x2)?);
            let y = (require("y1", a.y1)?, require("y2", a.y2)?);
            (json!({ "x": x, "y": y }), covariance(&params, x, y, &quad)?)
        }
        OracleWhat::IncrementVariance => {
            let h = (require("h1", a.h1)?, require("h2", a.h2)?);
            (json!({ "h": h }), increment_variance(&params, h.0, h.1, &quad)?)
        }
        OracleWhat::CoeffVariance => {
            let j = (require("j1", a.j1)?, require("j2", a.j2)?);
            let bank = MeyerFilterBank::new();
            let est = coeff_variance_exact(&params, j.0, j.1, &bank, &quad)?;
            if (j.0 - j.1).abs() > 1 {
                let c1 = scaling_constant_c1(&params, &bank, &quad)?;
                extra = json!({ "power_law": coeff_variance_power_law(&params, j.0, j.1, c1) });
            }
            (json!({ "j": j }), est)
        }
    };
    let manifest = RunManifest::new(
        "oracle",
        argv,
        json!({ "alpha": a.alpha, "hurst": a.hurst, "tol": a.tol }),
        None,
    );
    let mut report = json!({
        "manifest": manifest,
        "what": value_name(a.what),
        "at": point,
        "value": est.value,
        "error": est.error,
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut report, extra) {
        r.extend(e);
    }
    emit(&report);
    Ok(EXIT_OK)
}

fn besov_norm(a: BesovNormArgs, argv: &[String]) -> Outcome {
    let spec = BesovSpec::new(a.s, a.alpha, a.p, a.q)?;
    let coeffs = read_coefficients(&a.input).map_err(Failure::Usage)?;
    let mut manifest = RunManifest::new(
        "besov-norm",
        argv,
        json!({ "s": a.s, "alpha": a.alpha, "p": a.p.to_string(), "q": a.q.to_string() }),
        None,
    );
    manifest.inputs.push(FileDigest::of(&a.input)?);
    emit(&json!({
        "manifest": manifest,
        "sequence_norm": sequence_norm(&coeffs, &spec),
        "smoothness_norm": smoothness_norm(&coeffs, &spec),
        "holder": holder_membership(&coeffs, a.s, a.alpha),
        "embeddings": embedding_check(&coeffs, a.s, a.alpha, a.p, a.q),
    }));
    Ok(EXIT_OK)
}

fn replay(a: ReplayArgs) -> Outcome {
    let text = fs::read_to_string(&a.manifest).map_err(io_context(&a.manifest))?;
    let recorded: RunManifest =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", a.manifest.display())))?;
    let mut args = vec!["wtfbf".to_string()];
    args.extend(recorded.argv.iter().cloned());
    let code = main_with(args);
    if code != EXIT_OK {
        return Ok(code);
    }
    let mut mismatched = Vec::new();
    for d in &recorded.outputs {
        let now = FileDigest::of(Path::new(&d.path))?;
        if now.sha256 != d.sha256 {
            mismatched.push(d.path.clone());
        }
    }
    if mismatched.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(Failure::Check(format!("outputs differ from the manifest: {}", mismatched.join(", "))))
    }
}
