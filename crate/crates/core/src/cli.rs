//! Command-line front end: `build`, `verify` and `bench`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bwt::{inverse_bwt, BwtResult};
use crate::engine::{Engine, EngineConfig};
use crate::oracle::{Oracle, DEFAULT_ORACLE_CAP};
use crate::pipeline::{build_index, IndexBuild};
use crate::suffix::{build_isa_observed, ranks_by_index};
use crate::text::{SentinelPolicy, Text, TextError};

pub const DEFAULT_MAX_INPUT_BYTES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(#[from] TextError),
    #[error(transparent)]
    Pipeline(#[from] crate::Error),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    /// 1 for verification failures, 2 for usage and IO errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            _ => 2,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dbwt", version, about = "Suffix array and BWT construction by prefix doubling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the BWT (and optionally the suffix array) of a file.
    Build(BuildArgs),
    /// Check the pipeline against the brute-force oracles on a small file.
    Verify(VerifyArgs),
    /// Time repeated builds, optionally across worker counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
pub struct EngineArgs {
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Dataset partitions. Defaults to 4 per worker.
    #[arg(long)]
    pub partitions: Option<usize>,
    /// Fraction of records sampled for range boundaries, in (0, 1].
    #[arg(long)]
    pub sample_fraction: Option<f64>,
    /// Terminate with '$' ordered above all bytes instead of appending 0x00.
    #[arg(long)]
    pub paper_compat: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Use only the first <bytes> bytes of the input.
    #[arg(long)]
    pub head: Option<u64>,
    /// Output prefix; writes <prefix>.bwt, <prefix>.meta and <prefix>.sa.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Also write the suffix array.
    #[arg(long)]
    pub emit_sa: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_INPUT_BYTES)]
    pub max_input_bytes: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = (DEFAULT_ORACLE_CAP - 1) as u64)]
    pub max_bytes: u64,
    #[arg(long)]
    pub paper_compat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub head: Option<u64>,
    /// Comma-separated worker counts, e.g. 1,2,4,8. Overrides --workers.
    #[arg(long, value_delimiter = ',')]
    pub workers_sweep: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_INPUT_BYTES)]
    pub max_input_bytes: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

/// Everything a single build needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub input: PathBuf,
    pub head: Option<u64>,
    pub out: Option<PathBuf>,
    pub policy: SentinelPolicy,
    pub workers: usize,
    pub partitions: usize,
    pub sample_fraction: Option<f64>,
    pub max_input_bytes: u64,
    pub emit_sa: bool,
}

impl BuildConfig {
    fn from_engine_args(input: PathBuf, head: Option<u64>, engine: &EngineArgs, max_input_bytes: u64) -> Self {
        Self {
            input,
            head,
            out: None,
            policy: if engine.paper_compat {
                SentinelPolicy::PaperCompat
            } else {
                SentinelPolicy::AutoAppend
            },
            workers: engine.workers,
            partitions: engine.partitions.unwrap_or(4 * engine.workers.max(1)),
            sample_fraction: engine.sample_fraction,
            max_input_bytes,
            emit_sa: false,
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            sample_fraction: self.sample_fraction,
            ..EngineConfig::new(self.workers, self.partitions)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.engine_config()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStat {
    pub stage: String,
    pub min_ms: f64,
    pub median_ms: f64,
}

/// Wall-clock timings of one or more identical builds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub input: String,
    pub input_bytes: u64,
    pub iterations: u32,
    pub workers: usize,
    pub partitions: usize,
    pub repetitions: usize,
    pub stages: Vec<StageStat>,
    pub total: StageStat,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn stat(stage: &str, mut samples: Vec<f64>) -> StageStat {
    samples.sort_by(f64::total_cmp);
    let median = if samples.is_empty() {
        0.0
    } else if samples.len() % 2 == 1 {
        samples[samples.len() / 2]
    } else {
        let m = samples.len() / 2;
        (samples[m - 1] + samples[m]) / 2.0
    };
    StageStat {
        stage: stage.to_string(),
        min_ms: samples.first().copied().unwrap_or(0.0),
        median_ms: median,
    }
}

impl BenchReport {
    pub fn from_runs(config: &BuildConfig, input_bytes: u64, runs: &[IndexBuild]) -> Self {
        let iterations = runs.first().map_or(0, IndexBuild::iterations);
        let collect = |f: &dyn Fn(&IndexBuild) -> Duration| runs.iter().map(|r| ms(f(r))).collect::<Vec<_>>();
        let mut stages = vec![stat("init", collect(&|r| r.timings.init))];
        for k in 0..iterations as usize {
            let samples = runs
                .iter()
                .filter_map(|r| r.timings.passes.get(k).map(|d| ms(*d)))
                .collect();
            stages.push(stat(&format!("pass_{}", k + 1), samples));
        }
        stages.push(stat("invert", collect(&|r| r.timings.invert)));
        stages.push(stat("bwt", collect(&|r| r.timings.bwt)));
        Self {
            input: config.input.display().to_string(),
            input_bytes,
            iterations,
            workers: config.workers,
            partitions: config.partitions,
            repetitions: runs.len(),
            stages,
            total: stat("total", collect(&|r| r.timings.total)),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "input {} ({} bytes), workers {}, partitions {}, passes {}, reps {}",
            self.input, self.input_bytes, self.workers, self.partitions, self.iterations, self.repetitions
        );
        for st in self.stages.iter().chain(std::iter::once(&self.total)) {
            let _ = writeln!(s, "  {:<10} min {:>10.1} ms  median {:>10.1} ms", st.stage, st.min_ms, st.median_ms);
        }
        s
    }
}

/// Reads the input, or its first `head` bytes, refusing more than `max` bytes.
pub fn read_input(path: &Path, head: Option<u64>, max: u64) -> Result<Vec<u8>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let limit = match head {
        Some(h) if h <= max => h,
        Some(h) => {
            return Err(CliError::Usage(format!(
                "--head {h} exceeds the input cap of {max} bytes"
            )))
        }
        None => max.saturating_add(1),
    };
    let mut bytes = Vec::new();
    file.take(limit)
        .read_to_end(&mut bytes)
        .map_err(|e| CliError::io(path, e))?;
    if bytes.len() as u64 > max {
        return Err(CliError::Usage(format!(
            "{}: input exceeds the cap of {max} bytes",
            path.display()
        )));
    }
    Ok(bytes)
}

pub fn load_text(config: &BuildConfig) -> Result<Text, CliError> {
    let bytes = read_input(&config.input, config.head, config.max_input_bytes)?;
    Ok(Text::new(&bytes, config.policy)?)
}

pub fn run_build(config: &BuildConfig, text: &Text) -> Result<IndexBuild, CliError> {
    config.validate()?;
    let engine = Engine::new(config.engine_config()).map_err(crate::Error::from)?;
    Ok(build_index(&engine, text, config.emit_sa)?)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Little-endian u64 encoding of a suffix array.
pub fn encode_sa(sa: &[u64]) -> Vec<u8> {
    sa.iter().flat_map(|i| i.to_le_bytes()).collect()
}

pub fn meta_lines(config: &BuildConfig, build: &IndexBuild, n: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n:{n}");
    let _ = writeln!(s, "index_I:{}", build.result.index_i);
    let _ = writeln!(s, "sentinel_policy:{}", config.policy);
    let _ = writeln!(s, "iterations:{}", build.iterations());
    let _ = writeln!(s, "workers:{}", config.workers);
    let _ = writeln!(s, "partitions:{}", config.partitions);
    let _ = writeln!(s, "init_ms:{}", build.timings.init.as_millis());
    for (k, d) in build.timings.passes.iter().enumerate() {
        let _ = writeln!(s, "pass_{}_ms:{}", k + 1, d.as_millis());
    }
    let _ = writeln!(s, "invert_ms:{}", build.timings.invert.as_millis());
    let _ = writeln!(s, "bwt_ms:{}", build.timings.bwt.as_millis());
    let _ = writeln!(s, "total_ms:{}", build.timings.total.as_millis());
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `<prefix>.bwt`, `<prefix>.meta` and, when present, `<prefix>.sa`.
pub fn write_outputs(prefix: &Path, config: &BuildConfig, build: &IndexBuild, n: usize) -> Result<(), CliError> {
    write_file(&with_ext(prefix, "bwt"), &build.result.bwt)?;
    if let Some(sa) = &build.result.sa {
        write_file(&with_ext(prefix, "sa"), &encode_sa(sa))?;
    }
    write_file(&with_ext(prefix, "meta"), meta_lines(config, build, n).as_bytes())
}

pub fn cmd_build(args: BuildArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = BuildConfig::from_engine_args(args.input, args.head, &args.engine, args.max_input_bytes);
    config.out = Some(args.out.clone());
    config.emit_sa = args.emit_sa;
    config.validate()?;
    let text = load_text(&config)?;
    let build = run_build(&config, &text)?;
    write_outputs(&args.out, &config, &build, text.len())?;
    let report = BenchReport::from_runs(&config, text.len() as u64 - 1, std::slice::from_ref(&build));
    let _ = write!(out, "{}", report.to_text());
    Ok(())
}

/// Hex SHA-256 over the BWT bytes, the row index and the suffix array.
pub fn digest(result: &BwtResult) -> String {
    let mut h = Sha256::new();
    h.update(&result.bwt);
    h.update(result.index_i.to_le_bytes());
    if let Some(sa) = &result.sa {
        h.update(encode_sa(sa));
    }
    format!("{:x}", h.finalize())
}

/// Runs the pipeline with 1 and 8 workers and checks it against every oracle.
/// Returns the report lines; the first divergence becomes an error.
pub fn verify_text(text: &Text) -> Result<Vec<String>, CliError> {
    let n = text.len();
    let oracle = Oracle::with_cap(n.max(DEFAULT_ORACLE_CAP));
    let mut lines = Vec::new();

    let single = Engine::new(EngineConfig::new(1, 1)).map_err(crate::Error::from)?;
    let parallel = Engine::new(EngineConfig::new(8, 8)).map_err(crate::Error::from)?;
    let a = build_index(&single, text, true)?;
    let b = build_index(&parallel, text, true)?;
    let (da, db) = (digest(&a.result), digest(&b.result));
    if da != db {
        return Err(CliError::Verify(format!("1-worker digest {da} != 8-worker digest {db}")));
    }
    lines.push(format!("PASS determinism (workers 1 vs 8): {da}"));

    let sa = a.result.sa.as_deref().unwrap_or_default();
    let expected_sa = oracle.naive_suffix_array(text)?;
    if let Some(j) = (0..n).find(|&j| sa.get(j) != expected_sa.get(j)) {
        return Err(CliError::Verify(format!(
            "suffix array diverges at rank {j}: got {:?}, oracle {}",
            sa.get(j),
            expected_sa[j]
        )));
    }
    lines.push("PASS suffix array = naive oracle".into());

    let rot = oracle.rotations_bwt(text)?;
    if rot.bwt != a.result.bwt || rot.index_i != a.result.index_i {
        let j = (0..n).find(|&j| rot.bwt[j] != a.result.bwt[j]);
        return Err(CliError::Verify(format!(
            "bwt differs from rotation oracle (first byte {j:?}, index_I {} vs {})",
            a.result.index_i, rot.index_i
        )));
    }
    lines.push(format!("PASS bwt = rotation oracle (index_I {})", rot.index_i));

    let mut failure = None;
    build_isa_observed(&single, text, |pass, isa| {
        if failure.is_some() {
            return;
        }
        let ranks = ranks_by_index(&single, isa.clone(), n);
        let expected = oracle.h_order_ranks(text, 2 * pass.shift as usize);
        match (ranks, expected) {
            (Ok(r), Ok(e)) if r == e => {}
            (Ok(r), Ok(e)) => {
                let i = (0..n).find(|&i| r[i] != e[i]).unwrap_or(0);
                failure = Some(format!(
                    "pass {} (h = {}): rank of suffix {i} is {}, oracle {}",
                    pass.pass, pass.shift, r[i], e[i]
                ));
            }
            (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
        }
    })?;
    if let Some(f) = failure {
        return Err(CliError::Verify(f));
    }
    lines.push(format!("PASS h-order ranks after {} passes", a.iterations()));

    if inverse_bwt(&a.result.bwt, a.result.index_i, text.order()) != text.bytes() {
        return Err(CliError::Verify("inverse BWT does not reproduce the input".into()));
    }
    lines.push("PASS inverse bwt round trip".into());
    Ok(lines)
}

pub fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = read_input(&args.input, None, args.max_bytes)?;
    let policy = if args.paper_compat {
        SentinelPolicy::PaperCompat
    } else {
        SentinelPolicy::AutoAppend
    };
    let text = Text::new(&bytes, policy)?;
    let result = verify_text(&text);
    match &result {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            let _ = writeln!(out, "PASS");
        }
        Err(e) => {
            let _ = writeln!(out, "FAIL {e}");
        }
    }
    result.map(|_| ())
}

/// Repeats the build `reps` times for each worker count.
pub fn run_bench(config: &BuildConfig, sweep: &[usize], reps: usize) -> Result<Vec<BenchReport>, CliError> {
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let text = load_text(config)?;
    let mut reports = Vec::new();
    for &workers in sweep {
        let cfg = BuildConfig {
            workers,
            ..config.clone()
        };
        let runs = (0..reps)
            .map(|_| run_build(&cfg, &text))
            .collect::<Result<Vec<_>, _>>()?;
        reports.push(BenchReport::from_runs(&cfg, text.len() as u64 - 1, &runs));
    }
    Ok(reports)
}

pub fn cmd_bench(args: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = BuildConfig::from_engine_args(args.input, args.head, &args.engine, args.max_input_bytes);
    let sweep = if args.workers_sweep.is_empty() {
        vec![config.workers]
    } else {
        args.workers_sweep
    };
    let reports = run_bench(&config, &sweep, args.reps)?;
    match args.format {
        ReportFormat::Text => {
            for r in &reports {
                let _ = write!(out, "{}", r.to_text());
            }
            if reports.len() > 1 {
                let base = reports[0].total.median_ms;
                let _ = writeln!(out, "scaling (median total):");
                for r in &reports {
                    let _ = writeln!(out, "  workers {:>3}: {:>10.1} ms  x{:.2}", r.workers, r.total.median_ms, base / r.total.median_ms);
                }
            }
        }
        ReportFormat::Json => {
            let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            let _ = writeln!(out, "{json}");
        }
    }
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Build(a) => cmd_build(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}
