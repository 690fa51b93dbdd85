//! `shiftlab`: scriptable analyses over shift-system descriptions.
//!
//! Every run is determined by its manifest — subcommand, spec file,
//! parameters, seed, output format — and identical manifests produce
//! byte-identical reports. Reports embed their manifest: CSV tables carry
//! it as `#` header lines, JSON documents as a `manifest` field.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on domain errors (bad
//! spec files, malformed data, out-of-range queries) with a diagnostic on
//! stderr. The environment variable `SHIFTLAB_MAX_WORDS` caps the word
//! enumeration budget; everything else comes in through flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use shiftlab_core::dyadic::Dyadic;
use shiftlab_core::entropy::{complexity, entropy_estimate, sft_entropy_exact, EntropyError};
use shiftlab_core::markers::{
    search_marker_family, verify_marker_family, MarkerDecision, MarkerError, MarkerParams,
    MarkerSearch, MarkerViolation,
};
use shiftlab_core::noninv::{Construction, ConstructionSchedule, CylinderSet, NoninvError};
use shiftlab_core::partitions::{
    conditional_entropy, rohlin_distance, shannon_entropy, Partition, PartitionError,
    WeightedSample,
};
use shiftlab_core::prediction::{past_branching, PredictionError};
use shiftlab_core::speclang::{parse_spec, SpecError, SystemSpec};
use shiftlab_core::subshifts::{
    build_oracle, language_dump, BuildError, LanguageOracle, OracleError, SymbolTable,
    TransferGraph, DEFAULT_WORD_BUDGET,
};
use shiftlab_core::words::Word;

const TOOL: &str = "shiftlab";
const VERSION: &str = env!("CARGO_PKG_VERSION");

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_ok =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            std::process::exit(if usage_ok { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(report) => print!("{report}"),
        Err(e) => {
            eprintln!("{TOOL}: {e}");
            std::process::exit(2);
        }
    }
}

// -- command line -------------------------------------------------------------

#[derive(Parser)]
#[command(name = TOOL, version, about = "Analyses over shift-system descriptions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the words of a given length
    Lang(LangArgs),
    /// Complexity table with entropy slopes, optionally exact graph entropy
    Entropy(EntropyArgs),
    /// Past-branching profile: how many futures each past admits
    Predict(PredictArgs),
    /// Materialize construction stages from a staged-stream description
    NoninvBuild(NoninvBuildArgs),
    /// Cylinder statistics and stage-ratio checks on a staged stream
    NoninvAnalyze(NoninvAnalyzeArgs),
    /// Entropies and Rohlin distance of two partitions of a weighted sample
    Partition(PartitionArgs),
    /// Verify a marker family, or search a window for one
    Markers(MarkersArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args)]
struct LangArgs {
    /// System description file
    #[arg(long)]
    spec: PathBuf,
    /// Word length to enumerate
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Recorded in the manifest; enumeration itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Deepest row of the complexity table
    #[arg(long)]
    nmax: usize,
    /// Also compute exact graph entropy at this transfer-graph order
    #[arg(long)]
    exact_order: Option<usize>,
    /// Report slopes in bits instead of nats
    #[arg(long)]
    bits: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Past length
    #[arg(long)]
    m: usize,
    /// Future length
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NoninvBuildArgs {
    /// Staged-stream description file (kind `noninv`)
    #[arg(long)]
    spec: PathBuf,
    /// Override the description's depth cap
    #[arg(long)]
    dmax: Option<u64>,
    /// Also dump this many leading stream symbols ...
    #[arg(long, requires = "dump")]
    prefix_len: Option<u64>,
    /// ... into this file, one dyadic literal per line
    #[arg(long, requires = "prefix_len")]
    dump: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct NoninvAnalyzeArgs {
    /// Staged-stream description file (kind `noninv`)
    #[arg(long)]
    spec: PathBuf,
    /// Window cells as half-open intervals, e.g. "1/2:3/4" or "1/2:3/4,0:1"
    #[arg(long)]
    intervals: String,
    /// Comma-separated prefix lengths at which to report hit counts
    #[arg(long)]
    checkpoints: String,
    /// Override the description's depth cap
    #[arg(long)]
    dmax: Option<u64>,
    /// Also report the copy-mixture statistic of this stage...
    #[arg(long, requires_all = ["mixture_start", "mixture_len"])]
    mixture_stage: Option<usize>,
    /// ...for the window starting at this 1-based stream position...
    #[arg(long, requires = "mixture_stage")]
    mixture_start: Option<u128>,
    /// ...of this length
    #[arg(long, requires = "mixture_stage")]
    mixture_len: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PartitionArgs {
    /// CSV with rows `point,mass,p_atom,q_atom`
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MarkersArgs {
    /// JSON object with `t`, `g`, `delta`, optional `shift_bound`, and
    /// `family` (a list of index sets)
    #[arg(long)]
    input: PathBuf,
    /// Ignore any given family and search the whole window instead
    #[arg(long)]
    search: bool,
    /// Subset-enumeration budget for --search
    #[arg(long, default_value_t = 1 << 22)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

// -- errors --------------------------------------------------------------------

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: SpecError },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Stream(#[from] NoninvError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Marker(#[from] MarkerError),
    #[error("{0}")]
    Input(String),
}

fn bad_input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

// -- manifest ------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    spec: String,
    params: BTreeMap<String, String>,
    seed: u64,
    format: &'static str,
}

impl Manifest {
    fn new(subcommand: &'static str, spec: &Path, format: &'static str, seed: u64) -> Self {
        Manifest {
            tool: TOOL,
            version: VERSION,
            subcommand,
            spec: spec.display().to_string(),
            params: BTreeMap::new(),
            seed,
            format,
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// The `#` provenance block that opens every CSV report.
    fn csv_header(&self) -> String {
        let params: Vec<String> =
            self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut out = String::new();
        let _ = writeln!(out, "# {} {}", self.tool, self.version);
        let _ = writeln!(out, "# subcommand: {}", self.subcommand);
        let _ = writeln!(out, "# spec: {}", self.spec);
        let _ = writeln!(out, "# params: {}", params.join(" "));
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# format: {}", self.format);
        out
    }

    fn json_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

fn render_json(doc: Value) -> String {
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

// -- shared loading -------------------------------------------------------------

fn word_budget() -> Result<usize, CliError> {
    match std::env::var("SHIFTLAB_MAX_WORDS") {
        Err(_) => Ok(DEFAULT_WORD_BUDGET),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(bad_input(format!(
                "SHIFTLAB_MAX_WORDS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn load_spec(path: &Path) -> Result<SystemSpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_spec(&text).map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

fn load_oracle(path: &Path) -> Result<Box<dyn LanguageOracle>, CliError> {
    let spec = load_spec(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(build_oracle(&spec, base, word_budget()?)?)
}

/// The schedule described by a `noninv` spec file, with an optional
/// depth-cap override from the command line.
fn load_schedule(
    path: &Path,
    dmax_override: Option<u64>,
) -> Result<(ConstructionSchedule, Option<u64>), CliError> {
    match load_spec(path)? {
        SystemSpec::Noninv { x0, d_max } => {
            let effective = dmax_override.or(d_max);
            Ok((ConstructionSchedule::scaled(x0, effective)?, effective))
        }
        other => Err(bad_input(format!(
            "{}: expected a `noninv` description, found `{}`",
            path.display(),
            other.kind_name()
        ))),
    }
}

/// Single-character alphabets read better glued together; anything else
/// keeps the space-separated token form.
fn compact(word: &Word, table: &SymbolTable) -> String {
    let glued = (0..table.len()).all(|id| table.token(id as u16).chars().count() == 1);
    if glued {
        word.0.iter().map(|s| s.to_string()).collect()
    } else {
        word.to_string()
    }
}

fn slope_unit(bits: bool) -> f64 {
    if bits {
        std::f64::consts::LN_2
    } else {
        1.0
    }
}

// -- subcommands ----------------------------------------------------------------

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Lang(args) => run_lang(args),
        Command::Entropy(args) => run_entropy(args),
        Command::Predict(args) => run_predict(args),
        Command::NoninvBuild(args) => run_noninv_build(args),
        Command::NoninvAnalyze(args) => run_noninv_analyze(args),
        Command::Partition(args) => run_partition(args),
        Command::Markers(args) => run_markers(args),
    }
}

fn run_lang(args: LangArgs) -> Result<String, CliError> {
    let x = load_oracle(&args.spec)?;
    let words = language_dump(&*x, args.n)?;
    let manifest = Manifest::new("lang", &args.spec, args.format.name(), args.seed)
        .param("n", args.n);

    Ok(match args.format {
        Format::Csv => {
            let mut out = manifest.csv_header();
            let _ = writeln!(out, "word");
            for w in &words {
                let _ = writeln!(out, "{w}");
            }
            let _ = writeln!(out, "# count: {}", words.len());
            out
        }
        Format::Json => render_json(json!({
            "manifest": manifest.json_value(),
            "n": args.n,
            "count": words.len(),
            "sample_based": x.sample_based(),
            "words": words,
        })),
    })
}

fn run_entropy(args: EntropyArgs) -> Result<String, CliError> {
    let x = load_oracle(&args.spec)?;
    let table = complexity(&*x, args.nmax)?;
    let estimate = entropy_estimate(&table)?;
    let unit = slope_unit(args.bits);

    let exact = match args.exact_order {
        None => None,
        Some(order) => {
            let g = TransferGraph::from_oracle(&*x, order)?;
            Some((order, sft_entropy_exact(&g)?))
        }
    };

    let mut manifest = Manifest::new("entropy", &args.spec, args.format.name(), args.seed)
        .param("nmax", args.nmax)
        .param("bits", args.bits);
    if let Some((order, _)) = &exact {
        manifest = manifest.param("exact_order", order);
    }

    Ok(match args.format {
        Format::Csv => {
            let mut out = manifest.csv_header();
            let _ = writeln!(out, "n,count,slope");
            for row in &table.rows {
                let _ = writeln!(out, "{},{},{}", row.n, row.count, row.slope / unit);
            }
            let _ = writeln!(out, "# source: {}", table.source);
            let _ = writeln!(out, "# truncated: {}", table.truncated);
            let _ = writeln!(out, "# sample_based: {}", estimate.sample_based);
            let _ = writeln!(out, "# final_slope: {}", estimate.final_slope / unit);
            let _ = writeln!(out, "# fit_slope: {}", estimate.fit_slope / unit);
            if let Some((order, e)) = &exact {
                let _ = writeln!(out, "# exact_order: {order}");
                let _ = writeln!(out, "# exact_entropy: {}", e.entropy / unit);
                let _ = writeln!(out, "# spectral_radius: {}", e.spectral_radius);
                if let Some(c) = e.crosscheck {
                    let _ = writeln!(out, "# crosscheck: {}", c / unit);
                }
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "n": r.n,
                        "count": r.count.to_string(),
                        "slope": r.slope / unit,
                    })
                })
                .collect();
            let exact_value = exact.map(|(order, e)| {
                json!({
                    "order": order,
                    "entropy": e.entropy / unit,
                    "spectral_radius": e.spectral_radius,
                    "iterations": e.iterations,
                    "crosscheck": e.crosscheck.map(|c| c / unit),
                })
            });
            render_json(json!({
                "manifest": manifest.json_value(),
                "source": table.source,
                "truncated": table.truncated,
                "sample_based": estimate.sample_based,
                "rows": rows,
                "final_slope": estimate.final_slope / unit,
                "fit_slope": estimate.fit_slope / unit,
                "exact": exact_value,
            }))
        }
    })
}

fn run_predict(args: PredictArgs) -> Result<String, CliError> {
    let x = load_oracle(&args.spec)?;
    let profile = past_branching(&*x, args.m, args.k)?;
    let witness = compact(&x.table().decode(&profile.argmax_past)?, x.table());
    let total_pasts: u64 = profile.histogram.values().sum();
    let manifest = Manifest::new("predict", &args.spec, args.format.name(), args.seed)
        .param("m", args.m)
        .param("k", args.k);

    Ok(match args.format {
        Format::Json => {
            let histogram: Vec<Value> = profile
                .histogram
                .iter()
                .map(|(extensions, pasts)| json!({"extensions": extensions, "pasts": pasts}))
                .collect();
            render_json(json!({
                "manifest": manifest.json_value(),
                "m": args.m,
                "k": args.k,
                "max_extensions": profile.max_extensions,
                "witness": witness,
                "total_pasts": total_pasts,
                "sample_based": x.sample_based(),
                "histogram": histogram,
            }))
        }
        Format::Csv => {
            let mut out = manifest.csv_header();
            let _ = writeln!(out, "extensions,pasts");
            for (extensions, pasts) in &profile.histogram {
                let _ = writeln!(out, "{extensions},{pasts}");
            }
            let _ = writeln!(out, "# max_extensions: {}", profile.max_extensions);
            let _ = writeln!(out, "# witness: {witness}");
            let _ = writeln!(out, "# total_pasts: {total_pasts}");
            out
        }
    })
}

fn run_noninv_build(args: NoninvBuildArgs) -> Result<String, CliError> {
    let (schedule, dmax) = load_schedule(&args.spec, args.dmax)?;
    let c = Construction::new(schedule)?;

    let mut manifest = Manifest::new("noninv-build", &args.spec, "csv", args.seed);
    if let Some(d) = dmax {
        manifest = manifest.param("dmax", d);
    }
    if let Some(n) = args.prefix_len {
        manifest = manifest.param("prefix_len", n);
    }

    if let (Some(n), Some(path)) = (args.prefix_len, &args.dump) {
        let prefix = c.prefix(n)?;
        let mut text = manifest.csv_header();
        for symbol in &prefix {
            let _ = writeln!(text, "{symbol}");
        }
        fs::write(path, text)
            .map_err(|source| CliError::Io { path: path.clone(), source })?;
    }

    let opt = |v: Option<u128>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = manifest.csv_header();
    let _ = writeln!(out, "stage,len,depth,y_len,mult,head_len,next_len");
    for rec in c.records() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            rec.stage,
            rec.len,
            rec.depth.map(|d| d.to_string()).unwrap_or_default(),
            opt(rec.y_len),
            opt(rec.mult),
            opt(rec.head_len),
            opt(rec.next_len),
        );
    }
    let _ = writeln!(out, "# materialized_stages: {}", c.materialized_stages());
    Ok(out)
}

fn parse_intervals(text: &str) -> Result<CylinderSet, CliError> {
    let mut cells = Vec::new();
    for cell in text.split(',') {
        let (lo, hi) = cell
            .split_once(':')
            .ok_or_else(|| bad_input(format!("interval {cell:?} is not `low:high`")))?;
        let parse = |s: &str| -> Result<Dyadic, CliError> {
            s.trim()
                .parse()
                .map_err(|e| bad_input(format!("interval bound {s:?}: {e}")))
        };
        cells.push((parse(lo)?, parse(hi)?));
    }
    Ok(CylinderSet::new(cells)?)
}

fn parse_checkpoints(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| bad_input(format!("checkpoint {s:?} is not a whole number")))
        })
        .collect()
}

fn run_noninv_analyze(args: NoninvAnalyzeArgs) -> Result<String, CliError> {
    let (schedule, dmax) = load_schedule(&args.spec, args.dmax)?;
    let c = Construction::new(schedule)?;
    let window = parse_intervals(&args.intervals)?;
    let checkpoints = parse_checkpoints(&args.checkpoints)?;
    let report = c.cylinder_frequency(&window, &checkpoints)?;

    let mut manifest = Manifest::new("noninv-analyze", &args.spec, "json", args.seed)
        .param("intervals", &args.intervals)
        .param("checkpoints", &args.checkpoints);
    if let Some(d) = dmax {
        manifest = manifest.param("dmax", d);
    }

    let series: Vec<Value> = report
        .series
        .iter()
        .map(|s| json!({"m": s.m, "hits": s.hits, "average": s.average}))
        .collect();
    let ratio_checks: Vec<Value> = report
        .ratio_checks
        .iter()
        .map(|rc| {
            let skipped = rc.i_count == 0;
            json!({
                "stage": rc.stage,
                "i_count": rc.i_count,
                "alpha": rc.alpha.to_string(),
                "beta": rc.beta.as_ref().map(|b| b.to_string()),
                "ratio": rc.ratio.as_ref().map(|r| r.to_string()),
                "ok_lower": rc.ok_lower,
                "ok_upper": rc.ok_upper,
                "skipped": skipped,
            })
        })
        .collect();

    let mixture = match (args.mixture_stage, args.mixture_start, args.mixture_len) {
        (Some(stage), Some(start), Some(len)) => {
            let m = c.mixture_statistic(stage, start, len)?;
            Some(json!({
                "stage": m.stage,
                "start": m.start.to_string(),
                "len": m.len,
                "copy_positions": m.copy_positions.to_string(),
                "lambda": format!("{}/{}", m.lambda.0, m.lambda.1),
                "lambda_value": m.lambda_f64(),
            }))
        }
        _ => None,
    };

    Ok(render_json(json!({
        "manifest": manifest.json_value(),
        "window_len": report.window_len,
        "series": series,
        "ratio_checks": ratio_checks,
        "mixture": mixture,
    })))
}

/// Rows are `point,mass,p_atom,q_atom`; `#` comments and one header line
/// are tolerated. Points must cover `0..n` exactly once.
fn read_partition_file(
    path: &Path,
) -> Result<(WeightedSample, Partition, Partition), CliError> {
    let text =
        fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let mut rows: Vec<(usize, f64, u32, u32)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.first().map_or(false, |f| f.parse::<usize>().is_err()) {
            continue; // header line
        }
        let at = |i: usize| -> Result<&str, CliError> {
            fields.get(i).copied().ok_or_else(|| {
                bad_input(format!("{}:{}: expected 4 fields", path.display(), lineno + 1))
            })
        };
        let complain = |what: &str| {
            bad_input(format!("{}:{}: bad {what}", path.display(), lineno + 1))
        };
        rows.push((
            at(0)?.parse().map_err(|_| complain("point index"))?,
            at(1)?.parse().map_err(|_| complain("mass"))?,
            at(2)?.parse().map_err(|_| complain("first atom"))?,
            at(3)?.parse().map_err(|_| complain("second atom"))?,
        ));
    }
    rows.sort_by_key(|r| r.0);
    for (i, row) in rows.iter().enumerate() {
        if row.0 != i {
            return Err(bad_input(format!(
                "{}: point indices must cover 0..{} exactly once",
                path.display(),
                rows.len()
            )));
        }
    }
    let sample = WeightedSample::from_masses(rows.iter().map(|r| r.1).collect())?;
    let p = Partition::new(rows.iter().map(|r| r.2).collect());
    let q = Partition::new(rows.iter().map(|r| r.3).collect());
    Ok((sample, p, q))
}

fn run_partition(args: PartitionArgs) -> Result<String, CliError> {
    let (sample, p, q) = read_partition_file(&args.data)?;
    let h_p = shannon_entropy(&sample, &p)?;
    let h_q = shannon_entropy(&sample, &q)?;
    let p_given_q = conditional_entropy(&sample, &p, &q)?;
    let q_given_p = conditional_entropy(&sample, &q, &p)?;
    let distance = rohlin_distance(&sample, &p, &q)?;
    let manifest = Manifest::new("partition", &args.data, args.format.name(), args.seed)
        .param("points", sample.len());

    Ok(match args.format {
        Format::Json => render_json(json!({
            "manifest": manifest.json_value(),
            "points": sample.len(),
            "entropy_p": h_p,
            "entropy_q": h_q,
            "conditional_p_given_q": p_given_q,
            "conditional_q_given_p": q_given_p,
            "distance": distance,
        })),
        Format::Csv => {
            let mut out = manifest.csv_header();
            let _ = writeln!(out, "quantity,nats");
            let _ = writeln!(out, "entropy_p,{h_p}");
            let _ = writeln!(out, "entropy_q,{h_q}");
            let _ = writeln!(out, "conditional_p_given_q,{p_given_q}");
            let _ = writeln!(out, "conditional_q_given_p,{q_given_p}");
            let _ = writeln!(out, "distance,{distance}");
            out
        }
    })
}

#[derive(serde::Deserialize)]
struct MarkerInput {
    t: u64,
    g: u64,
    #[serde(default)]
    shift_bound: Option<u64>,
    #[serde(default)]
    delta: f64,
    #[serde(default)]
    family: Vec<Vec<u64>>,
}

fn violation_json(v: &MarkerViolation) -> Value {
    match v {
        MarkerViolation::OutOfWindow { set_index, value } => {
            json!({"kind": "out_of_window", "set_index": set_index, "value": value})
        }
        MarkerViolation::FamilySize { size, required } => {
            json!({"kind": "family_size", "size": size, "required": required})
        }
        MarkerViolation::Spacing { set_index, u, v } => {
            json!({"kind": "spacing", "set_index": set_index, "u": u, "v": v})
        }
        MarkerViolation::JointShift { a_index, b_index, k } => {
            json!({"kind": "joint_shift", "a_index": a_index, "b_index": b_index, "k": k})
        }
    }
}

fn run_markers(args: MarkersArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|source| CliError::Io { path: args.input.clone(), source })?;
    let input: MarkerInput = serde_json::from_str(&text)
        .map_err(|e| bad_input(format!("{}: {e}", args.input.display())))?;
    let params = match input.shift_bound {
        Some(sb) => MarkerParams::new(input.t, input.g, sb, input.delta)?,
        None => MarkerParams::with_default_shift(input.t, input.g, input.delta)?,
    };
    let manifest = Manifest::new("markers", &args.input, "json", args.seed)
        .param("search", args.search)
        .param("budget", args.budget);
    let params_json = json!({
        "t": params.t(),
        "g": params.g(),
        "shift_bound": params.shift_bound(),
        "delta": params.delta(),
        "min_family_size": params.min_family_size(),
    });

    let body = if args.search {
        match search_marker_family(&params, args.budget)? {
            MarkerSearch::Found { family, examined } => json!({
                "mode": "search",
                "found": true,
                "family": family,
                "examined": examined,
            }),
            MarkerSearch::NotFound { examined, valid_sets } => json!({
                "mode": "search",
                "found": false,
                "examined": examined,
                "valid_sets": valid_sets,
            }),
        }
    } else {
        match verify_marker_family(&input.family, &params) {
            MarkerDecision::Valid => json!({
                "mode": "verify",
                "family": input.family,
                "valid": true,
                "violation": Value::Null,
            }),
            MarkerDecision::Invalid(v) => json!({
                "mode": "verify",
                "family": input.family,
                "valid": false,
                "violation": violation_json(&v),
            }),
        }
    };

    let mut doc = json!({
        "manifest": manifest.json_value(),
        "params": params_json,
    });
    doc.as_object_mut()
        .expect("document is an object")
        .extend(body.as_object().expect("body is an object").clone());
    Ok(render_json(doc))
}
