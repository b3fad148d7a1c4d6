//! `pairtest`: two-sample and independence tests on CSV data, plus the
//! synthetic-benchmark power harness.
//!
//! Exit codes: 0 the run completed (whatever the decision), 2 usage error,
//! 3 data error, 4 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pairtest::datagen::{self, BenchmarkKind, BenchmarkSpec, IcaSource};
use pairtest::error::Error;
use pairtest::experiment::{self, ExperimentConfig};
use pairtest::kernels::{self, KernelSpec, SemimetricSpec};
use pairtest::null::{self, NullMethod, TestConfig, TestOutcome};
use pairtest::sample::{PairedSample, Sample};

#[derive(Parser)]
#[command(name = "pairtest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether two samples come from the same distribution.
    TwoSample(TwoSampleArgs),
    /// Test whether the x and y blocks of a paired sample are independent.
    Independence(IndependenceArgs),
    /// Run a power experiment over a benchmark grid from a JSON config.
    Power(PowerArgs),
    /// Emit synthetic benchmark data as CSV.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    /// Distance kernel induced by ||z - z'||^q.
    Dist,
    /// Gaussian kernel exp(-sigma ||z - z'||^2).
    Gauss,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Spectral,
    Resample,
    QuadraticBound,
}

impl From<Method> for NullMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Spectral => NullMethod::Spectral,
            Method::Resample => NullMethod::Resample,
            Method::QuadraticBound => NullMethod::QuadraticBound,
        }
    }
}

#[derive(Args)]
struct CommonTestArgs {
    /// Null-distribution construction.
    #[arg(long = "null", value_enum, default_value = "spectral")]
    method: Method,
    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed for all randomness in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo draws for the spectral null.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// Permutations for the resampled null.
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    /// Cap on Gram matrix rows.
    #[arg(long, default_value_t = 4_096)]
    max_gram_rows: usize,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonTestArgs {
    fn test_config(&self) -> TestConfig {
        TestConfig {
            null_draws: self.draws,
            permutations: self.permutations,
            max_gram_rows: self.max_gram_rows,
            ..TestConfig::default()
        }
    }
}

#[derive(Args)]
struct TwoSampleArgs {
    /// First sample (headerless CSV, one observation per row).
    #[arg(long)]
    a: PathBuf,
    /// Second sample.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value = "dist")]
    kernel: KernelKind,
    /// Exponent of the Euclidean-power semimetric (distance kernel only).
    #[arg(long)]
    q: Option<f64>,
    /// Gaussian bandwidth parameter; defaults to the median heuristic.
    #[arg(long)]
    sigma: Option<f64>,
    /// Center the distance kernel at this pooled row instead of the origin.
    #[arg(long)]
    z0_index: Option<usize>,
    #[command(flatten)]
    common: CommonTestArgs,
}

#[derive(Args)]
struct IndependenceArgs {
    /// Paired sample: x block then y block, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// First column of the y block.
    #[arg(long)]
    split_col: usize,
    #[arg(long, value_enum, default_value = "dist")]
    kernel: KernelKind,
    /// Exponent for the x-side semimetric (distance kernel only).
    #[arg(long)]
    qx: Option<f64>,
    /// Exponent for the y-side semimetric (distance kernel only).
    #[arg(long)]
    qy: Option<f64>,
    /// Gaussian bandwidth for both sides; defaults to per-side median.
    #[arg(long)]
    sigma: Option<f64>,
    /// Center the distance kernels at this row of each block.
    #[arg(long)]
    z0_index: Option<usize>,
    #[command(flatten)]
    common: CommonTestArgs,
}

#[derive(Args)]
struct PowerArgs {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; overrides the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the configured level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured null method.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchmarkName {
    GaussMeanShift,
    GaussVarShift,
    SinusoidPerturb,
    IcaRotation,
    SinDependence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceName {
    GaussianMixture,
    Uniform,
    DoubleExponential,
}

impl From<SourceName> for IcaSource {
    fn from(s: SourceName) -> Self {
        match s {
            SourceName::GaussianMixture => IcaSource::GaussianMixture,
            SourceName::Uniform => IcaSource::Uniform,
            SourceName::DoubleExponential => IcaSource::DoubleExponential,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    benchmark: BenchmarkName,
    /// Dimension (Gaussian shifts and the rotation benchmark).
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// The benchmark's swept parameter: delta, variance ratio, frequency,
    /// rotation angle, or integer ell.
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    /// Source density for the rotation benchmark.
    #[arg(long, value_enum, default_value = "gaussian-mixture")]
    source: SourceName,
    /// Rows per sample.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First output file (two-sample benchmarks).
    #[arg(long)]
    out_a: Option<PathBuf>,
    /// Second output file (two-sample benchmarks).
    #[arg(long)]
    out_b: Option<PathBuf>,
    /// Output file for paired benchmarks (x columns then y columns).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// JSON report for a single test run. Field values are fully determined by
/// (inputs, flags, seed), so written reports are byte-stable.
#[derive(Serialize)]
struct Report {
    statistic: f64,
    p_value: Option<f64>,
    threshold: f64,
    reject: bool,
    method: String,
    kernel: String,
    alpha: f64,
    seed: u64,
    m: usize,
    n: usize,
    null_size: usize,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Usage(_) => 2,
        CliError::Lib(e) => match e {
            Error::InvalidExponent(_)
            | Error::InvalidSigma(_)
            | Error::InvalidAlpha { .. }
            | Error::Config(_)
            | Error::WrongBenchmarkKind { .. }
            | Error::InvalidBenchmark(_)
            | Error::GramTooLarge { .. }
            | Error::UnequalSampleSizes { .. }
            | Error::NoPValue => 2,
            Error::Io(_)
            | Error::CsvParse { .. }
            | Error::RaggedRow { .. }
            | Error::NonFinite { .. }
            | Error::EmptySample
            | Error::TooFewPoints { .. }
            | Error::DimensionMismatch { .. }
            | Error::PairedRowMismatch { .. }
            | Error::WeightsNotZeroSum(_)
            | Error::NonSquareGram { .. } => 3,
            Error::DegenerateMedian | Error::EmptySpectrum => 4,
        },
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::TwoSample(args) => run_two_sample(args),
        Command::Independence(args) => run_independence(args),
        Command::Power(args) => run_power(args),
        Command::Gen(args) => run_gen(args),
    };
    match result {
        Ok(()) => {
            eprintln!("completed in {} ms", started.elapsed().as_millis());
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Lib(err) => eprintln!("error: {err}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

/// PAIRTEST_THREADS caps the rayon worker count.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("PAIRTEST_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn read_sample(path: &Path) -> Result<Sample, CliError> {
    Sample::read_csv(path).map_err(CliError::from)
}

fn build_two_sample_kernel(args: &TwoSampleArgs, pooled: &Sample) -> Result<(KernelSpec, String), CliError> {
    match args.kernel {
        KernelKind::Dist => {
            if args.sigma.is_some() {
                return Err(CliError::Usage(
                    "--sigma applies only to --kernel gauss".into(),
                ));
            }
            let q = args.q.unwrap_or(1.0);
            let rho = SemimetricSpec::euclidean_power(q)?;
            let center = match args.z0_index {
                None => vec![0.0; pooled.n_cols()],
                Some(i) => {
                    if i >= pooled.n_rows() {
                        return Err(CliError::Usage(format!(
                            "--z0-index {i} out of range for {} pooled rows",
                            pooled.n_rows()
                        )));
                    }
                    pooled.row(i).to_vec()
                }
            };
            Ok((
                KernelSpec::distance_induced(rho, center),
                format!("dist(q={q})"),
            ))
        }
        KernelKind::Gauss => {
            if args.q.is_some() {
                return Err(CliError::Usage("--q applies only to --kernel dist".into()));
            }
            if args.z0_index.is_some() {
                return Err(CliError::Usage(
                    "--z0-index applies only to --kernel dist".into(),
                ));
            }
            let (sigma, desc) = match args.sigma {
                Some(s) => (s, format!("gauss(sigma={s})")),
                None => (
                    kernels::median_heuristic_sigma(pooled)?,
                    "gauss(median)".to_string(),
                ),
            };
            Ok((KernelSpec::gaussian(sigma)?, desc))
        }
    }
}

fn emit_report(out: Option<&Path>, report: &Report) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    println!("{json}");
    if let Some(path) = out {
        let mut f = fs::File::create(path).map_err(Error::from)?;
        f.write_all(json.as_bytes()).map_err(Error::from)?;
        f.write_all(b"\n").map_err(Error::from)?;
    }
    Ok(())
}

fn outcome_report(
    outcome: &TestOutcome,
    kernel: String,
    alpha: f64,
    m: usize,
    n: usize,
) -> Report {
    Report {
        statistic: outcome.statistic,
        p_value: outcome.p_value,
        threshold: outcome.threshold,
        reject: outcome.reject,
        method: outcome.method.to_string(),
        kernel,
        alpha,
        seed: outcome.seed,
        m,
        n,
        null_size: outcome.null_size,
    }
}

fn run_two_sample(args: TwoSampleArgs) -> Result<(), CliError> {
    let a = read_sample(&args.a)?;
    let b = read_sample(&args.b)?;
    let pooled = a.vstack(&b)?;
    let (kernel, kernel_desc) = build_two_sample_kernel(&args, &pooled)?;
    let config = args.common.test_config();
    let outcome = null::run_two_sample_test(
        &a,
        &b,
        &kernel,
        args.common.method.into(),
        args.common.alpha,
        &config,
        args.common.seed,
    )?;
    let report = outcome_report(&outcome, kernel_desc, args.common.alpha, a.n_rows(), b.n_rows());
    emit_report(args.common.out.as_deref(), &report)
}

fn run_independence(args: IndependenceArgs) -> Result<(), CliError> {
    let data = read_sample(&args.data)?;
    let (x, y) = data.split_columns(args.split_col)?;
    let p = PairedSample::new(x, y)?;

    let (kx, ky, desc) = match args.kernel {
        KernelKind::Dist => {
            if args.sigma.is_some() {
                return Err(CliError::Usage(
                    "--sigma applies only to --kernel gauss".into(),
                ));
            }
            let qx = args.qx.unwrap_or(1.0);
            let qy = args.qy.unwrap_or(1.0);
            let rx = SemimetricSpec::euclidean_power(qx)?;
            let ry = SemimetricSpec::euclidean_power(qy)?;
            let (cx, cy) = match args.z0_index {
                None => (vec![0.0; p.x.n_cols()], vec![0.0; p.y.n_cols()]),
                Some(i) => {
                    if i >= p.m() {
                        return Err(CliError::Usage(format!(
                            "--z0-index {i} out of range for {} rows",
                            p.m()
                        )));
                    }
                    (p.x.row(i).to_vec(), p.y.row(i).to_vec())
                }
            };
            (
                KernelSpec::distance_induced(rx, cx),
                KernelSpec::distance_induced(ry, cy),
                format!("dist(qx={qx},qy={qy})"),
            )
        }
        KernelKind::Gauss => {
            if args.qx.is_some() || args.qy.is_some() {
                return Err(CliError::Usage(
                    "--qx/--qy apply only to --kernel dist".into(),
                ));
            }
            if args.z0_index.is_some() {
                return Err(CliError::Usage(
                    "--z0-index applies only to --kernel dist".into(),
                ));
            }
            match args.sigma {
                Some(s) => (
                    KernelSpec::gaussian(s)?,
                    KernelSpec::gaussian(s)?,
                    format!("gauss(sigma={s})"),
                ),
                None => (
                    KernelSpec::gaussian(kernels::median_heuristic_sigma(&p.x)?)?,
                    KernelSpec::gaussian(kernels::median_heuristic_sigma(&p.y)?)?,
                    "gauss(median)".to_string(),
                ),
            }
        }
    };

    let config = args.common.test_config();
    let outcome = null::run_independence_test(
        &p,
        &kx,
        &ky,
        args.common.method.into(),
        args.common.alpha,
        &config,
        args.common.seed,
    )?;
    let report = outcome_report(&outcome, desc, args.common.alpha, p.m(), p.m());
    emit_report(args.common.out.as_deref(), &report)
}

fn run_power(args: PowerArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(Error::from)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(a) = args.alpha {
        config.alpha = a;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.method {
        config.method = m.into();
    }
    config.validate()?;

    let target = args.out.clone().or_else(|| config.output.clone());
    match target {
        Some(path) => {
            let mut file = fs::File::create(&path).map_err(Error::from)?;
            let curve = experiment::run_power_experiment_to_writer(&config, &mut file)?;
            eprintln!(
                "wrote {} rows to {}",
                curve.rows.len(),
                path.display()
            );
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            experiment::run_power_experiment_to_writer(&config, &mut stdout)
                .map_err(CliError::from)?;
        }
    }
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<(), CliError> {
    let kind = match args.benchmark {
        BenchmarkName::GaussMeanShift => BenchmarkKind::GaussMeanShift {
            d: args.d,
            delta: args.param,
        },
        BenchmarkName::GaussVarShift => BenchmarkKind::GaussVarShift {
            d: args.d,
            var_ratio: args.param,
        },
        BenchmarkName::SinusoidPerturb => BenchmarkKind::SinusoidPerturb { freq: args.param },
        BenchmarkName::IcaRotation => BenchmarkKind::IcaRotation {
            d: args.d,
            angle: args.param,
            source: args.source.into(),
        },
        BenchmarkName::SinDependence => {
            if args.param < 1.0 || args.param.fract() != 0.0 {
                return Err(CliError::Usage(format!(
                    "--param must be a positive integer for sin-dependence, got {}",
                    args.param
                )));
            }
            BenchmarkKind::SinDependence {
                ell: args.param as u32,
            }
        }
    };
    let spec = BenchmarkSpec::new(kind, args.m)?;

    if spec.is_two_sample() {
        let (Some(out_a), Some(out_b)) = (&args.out_a, &args.out_b) else {
            return Err(CliError::Usage(
                "two-sample benchmarks need --out-a and --out-b".into(),
            ));
        };
        if args.out.is_some() {
            return Err(CliError::Usage(
                "--out applies only to paired benchmarks".into(),
            ));
        }
        let (a, b) = datagen::gen_two_sample(&spec, args.seed)?;
        a.write_csv(out_a)?;
        b.write_csv(out_b)?;
        eprintln!("wrote {} + {} rows", a.n_rows(), b.n_rows());
    } else {
        let Some(out) = &args.out else {
            return Err(CliError::Usage(
                "paired benchmarks need --out (x columns then y columns)".into(),
            ));
        };
        if args.out_a.is_some() || args.out_b.is_some() {
            return Err(CliError::Usage(
                "--out-a/--out-b apply only to two-sample benchmarks".into(),
            ));
        }
        let p = datagen::gen_paired(&spec, args.seed)?;
        p.joined().write_csv(out)?;
        eprintln!("wrote {} rows ({} x-cols)", p.m(), p.x.n_cols());
    }
    Ok(())
}
