use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use sid_core::bench::{bench_coskewness, check_tensor_budget, BenchReport, DEFAULT_MEMORY_BUDGET};
use sid_core::distortions::{gaussian_blur, gaussian_noise, rect_occlusions, salt_pepper_with, ImageBatch};
use sid_core::io::{save_features_as, NpyDtype};
use sid_core::stat_tests::{marginal_failure_fraction, mardia_skewness_test, MarginalFailures, TestResult};
use sid_core::synthetic::{sample_exponential, sample_gmm, GmmSpec};
use sid_core::{
    apply_reduction, compute_fid, compute_sid, compute_sid_unsquashed, fit_pca, load_features,
    moment_summary, sample_gaussian, FeatureMatrix, MetricReport, MomentOptions, MomentSummary,
    SkewParams,
};

/// Environment variable holding the coskewness memory budget in bytes.
const BUDGET_ENV: &str = "SID_MEMORY_BUDGET";
/// Target dimension for `sid` when `--k` is not given.
const DEFAULT_SID_K: usize = 256;

#[derive(Parser)]
#[command(name = "sid", version, about = "Skew Inception Distance and Fréchet Inception Distance between feature sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fréchet distance between two feature files.
    Fid(MetricArgs),
    /// Skew Inception Distance between two feature files.
    Sid(SidArgs),
    /// Project feature files onto a shared PCA basis.
    Reduce(ReduceArgs),
    /// Mardia and per-marginal Kolmogorov–Smirnov skewness tests.
    Skewtest(SkewtestArgs),
    /// Apply an image corruption to a 4-D (n, h, w, c) array.
    Corrupt(CorruptArgs),
    /// Write sampled synthetic features.
    Synth(SynthArgs),
    /// Time the coskewness kernel.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum KArg {
    Full,
    Dims(usize),
}

fn parse_k(s: &str) -> Result<KArg, String> {
    if s == "full" {
        return Ok(KArg::Full);
    }
    match s.parse::<usize>() {
        Ok(0) => Err("k must be at least 1".into()),
        Ok(k) => Ok(KArg::Dims(k)),
        Err(_) => Err(format!("expected a positive integer or 'full', got '{s}'")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a level in (0, 1), got '{s}'")),
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Emit JSON (the default).
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Emit `name,value` rows.
    #[arg(long)]
    csv: bool,
    /// Omit the `meta` block (timestamps, inputs) for byte-reproducible output.
    #[arg(long)]
    no_meta: bool,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricArgs {
    a: PathBuf,
    b: PathBuf,
    /// PCA target dimension, or `full` for no reduction.
    #[arg(long, value_parser = parse_k)]
    k: Option<KArg>,
    /// Reference set for the PCA basis: `concat` (both inputs) or a file.
    #[arg(long = "ref", default_value = "concat")]
    reference: String,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SidArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Squashing steepness.
    #[arg(long, default_value_t = 10_000.0, value_parser = parse_positive)]
    alpha: f64,
    /// Squashing scale; the squashed skew term stays below m / 2.
    #[arg(long, default_value_t = 150.0, value_parser = parse_positive)]
    m: f64,
    /// Add the raw skew distance instead of the squashed one.
    #[arg(long)]
    no_squash: bool,
}

#[derive(Args)]
struct ReduceArgs {
    /// Input feature files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output files, one per input, in the same order.
    #[arg(short, long = "out", required = true)]
    outputs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_k)]
    k: KArg,
    /// `concat` (all inputs) or a reference file.
    #[arg(long = "ref", default_value = "concat")]
    reference: String,
    #[arg(long, value_enum, default_value_t = Dtype::F64)]
    dtype: Dtype,
}

#[derive(Args)]
struct SkewtestArgs {
    input: PathBuf,
    /// Reduce to this many principal components (fitted on the input) first.
    #[arg(long, value_parser = parse_k)]
    k: Option<KArg>,
    #[arg(long, default_value_t = 0.001, value_parser = parse_level)]
    level: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gauss,
    Sp,
    Blur,
    Box,
}

#[derive(Args)]
struct CorruptArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Noise σ, salt-and-pepper fraction, blur σ or rectangle scale.
    #[arg(long)]
    param: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blur kernel width (odd).
    #[arg(long, default_value_t = 5)]
    kernel_size: usize,
    /// Rectangles per image.
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Select salt-and-pepper channels independently.
    #[arg(long)]
    per_channel: bool,
    #[arg(long, value_enum, default_value_t = Dtype::F64)]
    dtype: Dtype,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    /// N(mean·1, std²·I).
    Gaussian,
    /// Independent Exp(1) columns.
    Exponential,
    /// One-dimensional two-component mixture with mean 0, variance 1, skew 0.
    Mixture,
}

#[derive(Args)]
struct SynthArgs {
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Dist::Gaussian)]
    dist: Dist,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    mean: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    std: f64,
    #[arg(long, value_enum, default_value_t = Dtype::F64)]
    dtype: Dtype,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dtype {
    F32,
    F64,
}

impl From<Dtype> for NpyDtype {
    fn from(d: Dtype) -> Self {
        match d {
            Dtype::F32 => NpyDtype::F32,
            Dtype::F64 => NpyDtype::F64,
        }
    }
}

#[derive(Serialize)]
struct Reduction {
    k: usize,
    fitted_on: String,
    scale: f64,
}

#[derive(Serialize)]
struct Meta {
    command: &'static str,
    version: &'static str,
    inputs: Vec<String>,
    reduction: Option<Reduction>,
    timestamp_unix: u64,
}

impl Meta {
    fn new(command: &'static str, inputs: &[&Path], reduction: Option<Reduction>) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            reduction,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
}

trait CsvRows {
    fn rows(&self) -> Vec<(String, String)>;
}

impl CsvRows for MetricReport {
    fn rows(&self) -> Vec<(String, String)> {
        [
            ("mean_term", self.mean_term.to_string()),
            ("cov_term", self.cov_term.to_string()),
            ("skew_raw", self.skew_raw.to_string()),
            ("skew_squashed", self.skew_squashed.to_string()),
            ("fid", self.fid.to_string()),
            ("sid", self.sid.to_string()),
            ("squashed", self.squashed.to_string()),
            ("n1", self.dims.n1.to_string()),
            ("n2", self.dims.n2.to_string()),
            ("d", self.dims.d.to_string()),
            ("alpha", self.params.alpha.to_string()),
            ("m", self.params.m.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

impl CsvRows for BenchReport {
    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("d".to_string(), self.d.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("repeats".to_string(), self.repeats.to_string()),
            ("median_secs".to_string(), self.median_secs.to_string()),
            ("tensor_bytes".to_string(), self.tensor_bytes.to_string()),
        ];
        for (i, t) in self.timings_secs.iter().enumerate() {
            rows.push((format!("timing_{i}"), t.to_string()));
        }
        rows
    }
}

#[derive(Serialize)]
struct SkewReport {
    n: usize,
    d: usize,
    mardia: TestResult,
    marginals: MarginalFailures,
}

impl CsvRows for SkewReport {
    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("n".to_string(), self.n.to_string()),
            ("d".to_string(), self.d.to_string()),
            ("mardia_statistic".to_string(), self.mardia.statistic.to_string()),
            ("mardia_dof".to_string(), self.mardia.dof.unwrap_or(0).to_string()),
            ("mardia_p_value".to_string(), self.mardia.p_value.to_string()),
            ("mardia_reject".to_string(), self.mardia.reject.to_string()),
            ("marginal_fraction".to_string(), self.marginals.fraction.to_string()),
            ("marginal_rejected".to_string(), self.marginals.rejected.to_string()),
            ("marginal_tested".to_string(), self.marginals.tested.to_string()),
            ("marginal_skipped".to_string(), self.marginals.skipped.to_string()),
        ];
        for (j, c) in self.marginals.columns.iter().enumerate() {
            let p = c.map_or("NA".to_string(), |r| r.p_value.to_string());
            rows.push((format!("ks_p_value_{j}"), p));
        }
        rows
    }
}

fn emit<T: Serialize + CsvRows>(body: &T, out: &OutputArgs, meta: impl FnOnce() -> Meta) -> anyhow::Result<()> {
    let text = if out.csv {
        let mut s = String::from("name,value\n");
        for (k, v) in body.rows() {
            writeln!(s, "{k},{v}")?;
        }
        s
    } else {
        let env = Envelope {
            body,
            meta: (!out.no_meta).then(meta),
        };
        serde_json::to_string_pretty(&env)? + "\n"
    };
    match &out.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn print_json(v: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn memory_budget() -> anyhow::Result<u128> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{BUDGET_ENV} must be a byte count, got '{v}'")),
        Err(_) => Ok(DEFAULT_MEMORY_BUDGET),
    }
}

fn load(path: &Path) -> anyhow::Result<FeatureMatrix> {
    load_features(path).with_context(|| format!("loading features from {}", path.display()))
}

/// Fits a basis on `reference` (`concat` = all of `sets`) and projects every set.
fn reduce_sets(
    sets: &[&FeatureMatrix],
    k: usize,
    reference: &str,
) -> anyhow::Result<(Vec<FeatureMatrix>, Reduction)> {
    let t = if reference == "concat" {
        fit_pca(&FeatureMatrix::vstack(sets)?, "concat")?
    } else {
        fit_pca(&load(Path::new(reference))?, reference)?
    };
    let reduced = sets
        .iter()
        .map(|s| apply_reduction(s, &t, k))
        .collect::<sid_core::Result<Vec<_>>>()
        .with_context(|| format!("reducing to k = {k}"))?;
    let info = Reduction {
        k,
        scale: t.scale(k)?,
        fitted_on: t.fitted_on,
    };
    Ok((reduced, info))
}

fn run_fid(args: &MetricArgs) -> anyhow::Result<()> {
    let (a, b) = (load(&args.a)?, load(&args.b)?);
    let (a, b, reduction) = match args.k {
        None | Some(KArg::Full) => (a, b, None),
        Some(KArg::Dims(k)) => {
            let (mut r, info) = reduce_sets(&[&a, &b], k, &args.reference)?;
            let b = r.pop().expect("two sets");
            (r.pop().expect("two sets"), b, Some(info))
        }
    };
    let report = compute_fid(&MomentSummary::first_two(&a)?, &MomentSummary::first_two(&b)?)?;
    emit(&report, &args.out, || Meta::new("fid", &[&args.a, &args.b], reduction))
}

fn run_sid(args: &SidArgs) -> anyhow::Result<()> {
    let m = &args.metric;
    let params = SkewParams::new(args.alpha, args.m)?;
    let budget = memory_budget()?;
    let (a, b) = (load(&m.a)?, load(&m.b)?);
    if a.dim() != b.dim() {
        bail!("dimension mismatch: {} has d = {}, {} has d = {}", m.a.display(), a.dim(), m.b.display(), b.dim());
    }
    let k = match m.k {
        Some(KArg::Full) => None,
        Some(KArg::Dims(k)) => Some(k),
        None if a.dim() > DEFAULT_SID_K => Some(DEFAULT_SID_K),
        None => None,
    };
    let (a, b, reduction) = match k {
        None => (a, b, None),
        Some(k) => {
            let (mut r, info) = reduce_sets(&[&a, &b], k, &m.reference)?;
            let b = r.pop().expect("two sets");
            (r.pop().expect("two sets"), b, Some(info))
        }
    };
    check_tensor_budget(a.dim(), budget)
        .with_context(|| format!("use --k to reduce the dimension or raise {BUDGET_ENV}"))?;
    let opts = MomentOptions::default();
    let (sa, sb) = (moment_summary(&a, &opts)?, moment_summary(&b, &opts)?);
    let report = if args.no_squash {
        compute_sid_unsquashed(&sa, &sb)?
    } else {
        compute_sid(&sa, &sb, &params)?
    };
    emit(&report, &m.out, || Meta::new("sid", &[&m.a, &m.b], reduction))
}

fn run_reduce(args: &ReduceArgs) -> anyhow::Result<()> {
    if args.inputs.len() != args.outputs.len() {
        bail!("{} inputs but {} outputs", args.inputs.len(), args.outputs.len());
    }
    let sets = args.inputs.iter().map(|p| load(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let refs: Vec<&FeatureMatrix> = sets.iter().collect();
    let k = match args.k {
        KArg::Dims(k) => k,
        KArg::Full => refs[0].dim(),
    };
    let (reduced, info) = reduce_sets(&refs, k, &args.reference)?;
    for (r, path) in reduced.iter().zip(&args.outputs) {
        save_features_as(r, path, args.dtype.into())?;
    }
    print_json(&serde_json::json!({
        "k": info.k,
        "scale": info.scale,
        "fitted_on": info.fitted_on,
        "outputs": args.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn run_skewtest(args: &SkewtestArgs) -> anyhow::Result<()> {
    let x = load(&args.input)?;
    let (x, reduction) = match args.k {
        None | Some(KArg::Full) => (x, None),
        Some(KArg::Dims(k)) => {
            let t = fit_pca(&x, args.input.display().to_string())?;
            let info = Reduction {
                k,
                scale: t.scale(k)?,
                fitted_on: t.fitted_on.clone(),
            };
            (apply_reduction(&x, &t, k)?, Some(info))
        }
    };
    check_tensor_budget(x.dim(), memory_budget()?)?;
    let report = SkewReport {
        n: x.n_samples(),
        d: x.dim(),
        mardia: mardia_skewness_test(&x, args.level)?,
        marginals: marginal_failure_fraction(&x, args.level)?,
    };
    emit(&report, &args.out, || Meta::new("skewtest", &[&args.input], reduction))
}

fn run_corrupt(args: &CorruptArgs) -> anyhow::Result<()> {
    let batch = ImageBatch::load(&args.input)
        .with_context(|| format!("loading images from {}", args.input.display()))?;
    let out = match args.kind {
        Kind::Gauss => gaussian_noise(&batch, args.param, args.seed)?,
        Kind::Sp => salt_pepper_with(&batch, args.param, args.seed, args.per_channel)?,
        Kind::Blur => gaussian_blur(&batch, args.param, args.kernel_size)?,
        Kind::Box => rect_occlusions(&batch, args.param, args.count, args.seed)?,
    };
    out.save(&args.output, args.dtype.into())?;
    let (n, h, w, c) = out.shape();
    print_json(&serde_json::json!({
        "output": args.output.display().to_string(),
        "shape": [n, h, w, c],
    }))
}

fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let x = match args.dist {
        Dist::Gaussian => {
            let mean = DVector::from_element(args.d, args.mean);
            let cov = DMatrix::identity(args.d, args.d) * (args.std * args.std);
            sample_gaussian(&mean, &cov, args.n, args.seed)?
        }
        Dist::Exponential => sample_exponential(args.n, args.d, args.seed)?,
        Dist::Mixture => {
            if args.d != 1 {
                bail!("the mixture is one-dimensional; got --d {}", args.d);
            }
            sample_gmm(&GmmSpec::matched_moment_counterexample(), args.n, args.seed)?
        }
    };
    save_features_as(&x, &args.output, args.dtype.into())?;
    print_json(&serde_json::json!({
        "output": args.output.display().to_string(),
        "shape": [x.n_samples(), x.dim()],
    }))
}

fn run_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let report = bench_coskewness(args.d, args.n, args.repeats, memory_budget()?, args.seed)?;
    emit(&report, &args.out, || Meta::new("bench", &[], None))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fid(a) => run_fid(a),
        Command::Sid(a) => run_sid(a),
        Command::Reduce(a) => run_reduce(a),
        Command::Skewtest(a) => run_skewtest(a),
        Command::Corrupt(a) => run_corrupt(a),
        Command::Synth(a) => run_synth(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
