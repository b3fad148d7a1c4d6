//! Power-experiment harness: sweep a benchmark parameter grid, run the
//! configured test on freshly generated data for every (cell, trial) pair,
//! and tabulate rejection rates.
//!
//! Runs are reproducible: the data seed of a trial is derived from
//! (master seed, cell index, trial index), the test seed additionally from
//! the kernel index, and all kernels within a trial see the same data.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{BenchmarkKind, BenchmarkSpec, IcaSource};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelSpec, SemimetricSpec};
use crate::null::{self, NullMethod, TestConfig};
use crate::rng::derive_seed;
use crate::sample::Sample;

const TAG_DATA: u64 = 100;
const TAG_TEST: u64 = 101;

/// A benchmark family plus the grid of parameter values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BenchmarkConfig {
    /// Sweeps the mean shift `delta`.
    GaussMeanShift { d: usize, grid: Vec<f64> },
    /// Sweeps the variance ratio.
    GaussVarShift { d: usize, grid: Vec<f64> },
    /// Sweeps the perturbation frequency.
    SinusoidPerturb { grid: Vec<f64> },
    /// Sweeps the rotation angle.
    IcaRotation {
        d: usize,
        #[serde(default)]
        source: IcaSource,
        grid: Vec<f64>,
    },
    /// Sweeps the integer frequency `ell`.
    SinDependence { grid: Vec<f64> },
}

impl BenchmarkConfig {
    pub fn grid(&self) -> &[f64] {
        match self {
            BenchmarkConfig::GaussMeanShift { grid, .. }
            | BenchmarkConfig::GaussVarShift { grid, .. }
            | BenchmarkConfig::SinusoidPerturb { grid }
            | BenchmarkConfig::IcaRotation { grid, .. }
            | BenchmarkConfig::SinDependence { grid } => grid,
        }
    }

    pub fn is_two_sample(&self) -> bool {
        matches!(
            self,
            BenchmarkConfig::GaussMeanShift { .. }
                | BenchmarkConfig::GaussVarShift { .. }
                | BenchmarkConfig::SinusoidPerturb { .. }
        )
    }

    /// Concrete benchmark at one grid value.
    pub fn instantiate(&self, param: f64, m: usize) -> Result<BenchmarkSpec> {
        let kind = match self {
            BenchmarkConfig::GaussMeanShift { d, .. } => BenchmarkKind::GaussMeanShift {
                d: *d,
                delta: param,
            },
            BenchmarkConfig::GaussVarShift { d, .. } => BenchmarkKind::GaussVarShift {
                d: *d,
                var_ratio: param,
            },
            BenchmarkConfig::SinusoidPerturb { .. } => BenchmarkKind::SinusoidPerturb { freq: param },
            BenchmarkConfig::IcaRotation { d, source, .. } => BenchmarkKind::IcaRotation {
                d: *d,
                angle: param,
                source: *source,
            },
            BenchmarkConfig::SinDependence { .. } => {
                if param < 1.0 || param.fract() != 0.0 {
                    return Err(Error::InvalidBenchmark(format!(
                        "sin-dependence grid values must be positive integers, got {param}"
                    )));
                }
                BenchmarkKind::SinDependence { ell: param as u32 }
            }
        };
        BenchmarkSpec::new(kind, m)
    }
}

/// Kernel descriptor; resolved against data at test time because the
/// Gaussian median bandwidth depends on the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    /// Distance kernel induced by the Euclidean power semimetric, centered
    /// at the origin.
    Dist {
        #[serde(default = "default_q")]
        q: f64,
    },
    /// Gaussian kernel; `sigma` absent means the median heuristic on the
    /// data at hand.
    Gauss {
        #[serde(default)]
        sigma: Option<f64>,
    },
}

fn default_q() -> f64 {
    1.0
}

impl KernelConfig {
    /// Stable one-token descriptor used in power CSV rows.
    pub fn describe(&self) -> String {
        match self {
            KernelConfig::Dist { q } => format!("dist(q={q})"),
            KernelConfig::Gauss { sigma: None } => "gauss(median)".to_string(),
            KernelConfig::Gauss { sigma: Some(s) } => format!("gauss(sigma={s})"),
        }
    }

    /// Resolve against the sample the kernel will be evaluated on (the
    /// pooled sample for two-sample tests, one side for independence).
    pub fn build(&self, data: &Sample) -> Result<KernelSpec> {
        match self {
            KernelConfig::Dist { q } => {
                let rho = SemimetricSpec::euclidean_power(*q)?;
                Ok(KernelSpec::distance_induced(
                    rho,
                    vec![0.0; data.n_cols()],
                ))
            }
            KernelConfig::Gauss { sigma } => {
                let s = match sigma {
                    Some(s) => *s,
                    None => kernels::median_heuristic_sigma(data)?,
                };
                KernelSpec::gaussian(s)
            }
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_trials() -> usize {
    200
}

fn default_m() -> usize {
    200
}

/// Full description of a power experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    pub kernels: Vec<KernelConfig>,
    pub method: NullMethod,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub null_draws: Option<usize>,
    #[serde(default)]
    pub permutations: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.benchmark.grid().is_empty() {
            return Err(Error::Config("benchmark grid must be non-empty".into()));
        }
        if self.kernels.is_empty() {
            return Err(Error::Config("need at least one kernel".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha {
                alpha: self.alpha,
                range: "(0, 1)",
            });
        }
        if self.method == NullMethod::QuadraticBound && self.alpha > 0.215 {
            return Err(Error::InvalidAlpha {
                alpha: self.alpha,
                range: "(0, 0.215]",
            });
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        for (i, &p) in self.benchmark.grid().iter().enumerate() {
            self.benchmark.instantiate(p, self.m).map_err(|e| {
                Error::Config(format!("grid value #{i} ({p}) is invalid: {e}"))
            })?;
        }
        Ok(())
    }

    pub fn test_config(&self) -> TestConfig {
        let mut tc = TestConfig::default();
        if let Some(d) = self.null_draws {
            tc.null_draws = d;
        }
        if let Some(p) = self.permutations {
            tc.permutations = p;
        }
        tc
    }
}

/// One cell of a power curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub param: f64,
    pub kernel: String,
    pub rejections: u32,
    pub trials: u32,
}

impl PowerRow {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.trials as f64
    }
}

/// Rejection rates over the benchmark grid, one row per (parameter, kernel).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerCurve {
    pub rows: Vec<PowerRow>,
}

pub const POWER_CSV_HEADER: &str = "param,kernel,rejections,trials,rejection_rate";

impl PowerCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(POWER_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&power_row_csv(r));
            out.push('\n');
        }
        out
    }

    /// Parse the power CSV format. Lines starting with `#` (resume markers,
    /// comments) are ignored.
    pub fn parse_csv(text: &str) -> Result<PowerCurve> {
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != POWER_CSV_HEADER {
                    return Err(Error::CsvParse {
                        line: lineno + 1,
                        msg: format!("expected header `{POWER_CSV_HEADER}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let parse_f64 = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("cannot parse `{s}` as a number"),
                })
            };
            let parse_u32 = |s: &str| -> Result<u32> {
                s.parse().map_err(|_| Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("cannot parse `{s}` as a count"),
                })
            };
            let row = PowerRow {
                param: parse_f64(fields[0])?,
                kernel: fields[1].to_string(),
                rejections: parse_u32(fields[2])?,
                trials: parse_u32(fields[3])?,
            };
            if row.trials == 0 || row.rejections > row.trials {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: "rejections must not exceed trials, trials must be positive".into(),
                });
            }
            let rate = parse_f64(fields[4])?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::CsvParse {
                    line: lineno + 1,
                    msg: format!("rejection rate {rate} outside [0, 1]"),
                });
            }
            rows.push(row);
        }
        if !saw_header {
            return Err(Error::CsvParse {
                line: 1,
                msg: "missing power CSV header".into(),
            });
        }
        Ok(PowerCurve { rows })
    }

    /// Rate for an exact (param, kernel) cell, if present.
    pub fn rate_at(&self, param: f64, kernel: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.param == param && r.kernel == kernel)
            .map(|r| r.rate())
    }
}

fn power_row_csv(r: &PowerRow) -> String {
    format!(
        "{},{},{},{},{}",
        r.param,
        r.kernel,
        r.rejections,
        r.trials,
        r.rate()
    )
}

/// Run the experiment, collecting all rows in memory.
pub fn run_power_experiment(config: &ExperimentConfig) -> Result<PowerCurve> {
    let mut curve = PowerCurve::default();
    run_cells(config, |row| {
        curve.rows.push(row);
        Ok(())
    })?;
    Ok(curve)
}

/// Run the experiment, streaming rows to `out` as grid cells complete so
/// partial results survive a failure; on error a `# resume ...` marker is
/// flushed before the error propagates.
pub fn run_power_experiment_to_writer<W: Write>(
    config: &ExperimentConfig,
    out: &mut W,
) -> Result<PowerCurve> {
    writeln!(out, "{POWER_CSV_HEADER}")?;
    let mut curve = PowerCurve::default();
    let result = run_cells(config, |row| {
        writeln!(out, "{}", power_row_csv(&row))?;
        curve.rows.push(row);
        Ok(())
    });
    if let Err(e) = result {
        let done = curve.rows.len();
        let per_cell = config.kernels.len().max(1);
        let _ = writeln!(out, "# resume cell={} kernel={}", done / per_cell, done % per_cell);
        let _ = out.flush();
        return Err(e);
    }
    out.flush()?;
    Ok(curve)
}

fn run_cells<F: FnMut(PowerRow) -> Result<()>>(
    config: &ExperimentConfig,
    mut emit: F,
) -> Result<()> {
    config.validate()?;
    let tc = config.test_config();
    let grid = config.benchmark.grid().to_vec();
    for (pi, &param) in grid.iter().enumerate() {
        let spec = config.benchmark.instantiate(param, config.m)?;
        let per_trial: Vec<Vec<bool>> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, &tc, &spec, pi as u64, t as u64))
            .collect::<Result<_>>()?;
        for (ki, kc) in config.kernels.iter().enumerate() {
            let rejections = per_trial.iter().filter(|r| r[ki]).count() as u32;
            emit(PowerRow {
                param,
                kernel: kc.describe(),
                rejections,
                trials: config.trials as u32,
            })?;
        }
    }
    Ok(())
}

fn run_trial(
    config: &ExperimentConfig,
    tc: &TestConfig,
    spec: &BenchmarkSpec,
    pi: u64,
    trial: u64,
) -> Result<Vec<bool>> {
    let data_seed = derive_seed(config.seed, &[TAG_DATA, pi, trial]);
    let mut rejects = Vec::with_capacity(config.kernels.len());
    if spec.is_two_sample() {
        let (z, w) = crate::datagen::gen_two_sample(spec, data_seed)?;
        let pooled = z.vstack(&w)?;
        for (ki, kc) in config.kernels.iter().enumerate() {
            let kernel = kc.build(&pooled)?;
            let test_seed = derive_seed(config.seed, &[TAG_TEST, pi, trial, ki as u64]);
            let out = null::run_two_sample_test(
                &z,
                &w,
                &kernel,
                config.method,
                config.alpha,
                tc,
                test_seed,
            )?;
            rejects.push(out.reject);
        }
    } else {
        let p = crate::datagen::gen_paired(spec, data_seed)?;
        for (ki, kc) in config.kernels.iter().enumerate() {
            let kx = kc.build(&p.x)?;
            let ky = kc.build(&p.y)?;
            let test_seed = derive_seed(config.seed, &[TAG_TEST, pi, trial, ki as u64]);
            let out = null::run_independence_test(
                &p,
                &kx,
                &ky,
                config.method,
                config.alpha,
                tc,
                test_seed,
            )?;
            rejects.push(out.reject);
        }
    }
    Ok(rejects)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            benchmark: BenchmarkConfig::GaussMeanShift {
                d: 1,
                grid: vec![0.0, 3.0],
            },
            kernels: vec![KernelConfig::Dist { q: 1.0 }],
            method: NullMethod::Resample,
            alpha: 0.05,
            trials: 20,
            m: 30,
            seed: 7,
            null_draws: Some(200),
            permutations: Some(99),
            output: None,
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = tiny_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_rejects_bad_fields() {
        let mut cfg = tiny_config();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config();
        cfg.benchmark = BenchmarkConfig::GaussMeanShift { d: 1, grid: vec![] };
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config();
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = tiny_config();
        cfg.method = NullMethod::QuadraticBound;
        cfg.alpha = 0.3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_kind_tags() {
        let text = r#"{
            "benchmark": {"kind": "sinusoid-perturb", "grid": [1.0, 2.0]},
            "kernels": [{"kind": "dist", "q": 0.5}, {"kind": "gauss"}],
            "method": "spectral",
            "seed": 3
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.trials, 200);
        assert_eq!(cfg.m, 200);
        assert_eq!(cfg.kernels[1], KernelConfig::Gauss { sigma: None });
    }

    #[test]
    fn power_csv_round_trip() {
        let curve = PowerCurve {
            rows: vec![
                PowerRow {
                    param: 0.5,
                    kernel: "dist(q=1)".into(),
                    rejections: 13,
                    trials: 200,
                },
                PowerRow {
                    param: 1.0,
                    kernel: "gauss(median)".into(),
                    rejections: 200,
                    trials: 200,
                },
            ],
        };
        let text = curve.to_csv();
        let back = PowerCurve::parse_csv(&text).unwrap();
        assert_eq!(curve, back);
    }

    #[test]
    fn power_csv_rejects_malformed() {
        assert!(PowerCurve::parse_csv("").is_err());
        assert!(PowerCurve::parse_csv("wrong,header\n").is_err());
        let bad_counts = format!("{POWER_CSV_HEADER}\n1,k,5,4,1.25\n");
        assert!(PowerCurve::parse_csv(&bad_counts).is_err());
    }

    #[test]
    fn power_csv_skips_resume_markers() {
        let text = format!("{POWER_CSV_HEADER}\n0.5,dist(q=1),3,10,0.3\n# resume cell=1 kernel=0\n");
        let curve = PowerCurve::parse_csv(&text).unwrap();
        assert_eq!(curve.rows.len(), 1);
    }

    #[test]
    fn experiment_runs_and_is_reproducible() {
        let cfg = tiny_config();
        let a = run_power_experiment(&cfg).unwrap();
        let b = run_power_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        // Strong shift at delta = 3 should reject essentially always.
        let strong = a.rate_at(3.0, "dist(q=1)").unwrap();
        assert!(strong >= 0.9, "power at delta=3: {strong}");
        let null = a.rate_at(0.0, "dist(q=1)").unwrap();
        assert!(null <= 0.3, "null rejection rate: {null}");
    }

    #[test]
    fn writer_emits_rows_and_header() {
        let cfg = tiny_config();
        let mut buf = Vec::new();
        let curve = run_power_experiment_to_writer(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed = PowerCurve::parse_csv(&text).unwrap();
        assert_eq!(parsed, curve);
    }

    #[test]
    fn sin_dependence_grid_must_be_integer() {
        let cfg = ExperimentConfig {
            benchmark: BenchmarkConfig::SinDependence { grid: vec![1.5] },
            ..tiny_config()
        };
        assert!(cfg.validate().is_err());
    }
}
