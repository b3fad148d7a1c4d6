//! Seeded generators for the synthetic benchmarks: Gaussian mean/variance
//! shifts, a sinusoidally perturbed Gaussian, rotated ICA sources, and a
//! sinusoidally dependent pair on `[-pi, pi]^2`.
//!
//! Every generator is a pure function of (spec, seed); identical seeds give
//! bitwise-identical samples.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};
use crate::sample::{PairedSample, Sample};

const TAG_FIRST: u64 = 10;
const TAG_SECOND: u64 = 11;
const TAG_SOURCES: u64 = 20;
const TAG_NOISE_X: u64 = 21;
const TAG_NOISE_Y: u64 = 22;
const TAG_ORTHO_X: u64 = 23;
const TAG_ORTHO_Y: u64 = 24;

/// Univariate non-Gaussian source densities for the rotation benchmark.
/// All are zero-mean with unit variance, so the rotated pair stays exactly
/// uncorrelated at every angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IcaSource {
    /// Symmetric two-component Gaussian mixture at +-3/sqrt(10) with
    /// component variance 1/10 (strongly bimodal).
    #[default]
    GaussianMixture,
    /// Uniform on [-sqrt(3), sqrt(3)].
    Uniform,
    /// Double exponential (Laplace) with scale 1/sqrt(2).
    DoubleExponential,
}

impl IcaSource {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            IcaSource::GaussianMixture => {
                let mu = 3.0 / 10f64.sqrt();
                let sd = (0.1f64).sqrt();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let n: f64 = rng.sample(StandardNormal);
                sign * mu + sd * n
            }
            IcaSource::Uniform => {
                let half = 3f64.sqrt();
                rng.random_range(-half..half)
            }
            IcaSource::DoubleExponential => {
                let b = 1.0 / 2f64.sqrt();
                loop {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let t = 1.0 - 2.0 * u.abs();
                    if t > 0.0 {
                        return -b * u.signum() * t.ln();
                    }
                }
            }
        }
    }
}

/// One synthetic benchmark family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkKind {
    /// P = N(0, I_d), Q = N(delta * e_1, I_d).
    GaussMeanShift { d: usize, delta: f64 },
    /// P = N(0, I_d), Q = N(0, diag(var_ratio, 1, ..., 1)).
    GaussVarShift { d: usize, var_ratio: f64 },
    /// P = N(0, 1); Q has density phi(x) (1 + sin(freq * x)).
    SinusoidPerturb { freq: f64 },
    /// Two independent unit-variance sources rotated by `angle`, padded to
    /// dimension d with independent N(0,1) noise, then passed through
    /// independent random orthogonal maps.
    IcaRotation {
        d: usize,
        angle: f64,
        source: IcaSource,
    },
    /// (X, Y) on [-pi, pi]^2 with density proportional to
    /// 1 + sin(ell x) sin(ell y).
    SinDependence { ell: u32 },
}

/// A benchmark instance: the family plus the per-sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub m: usize,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, m: usize) -> Result<Self> {
        let spec = Self { kind, m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidBenchmark("sample size m must be >= 1".into()));
        }
        match &self.kind {
            BenchmarkKind::GaussMeanShift { d, delta } => {
                if *d == 0 {
                    return Err(Error::InvalidBenchmark("dimension d must be >= 1".into()));
                }
                if !delta.is_finite() {
                    return Err(Error::InvalidBenchmark("delta must be finite".into()));
                }
            }
            BenchmarkKind::GaussVarShift { d, var_ratio } => {
                if *d == 0 {
                    return Err(Error::InvalidBenchmark("dimension d must be >= 1".into()));
                }
                if !(*var_ratio > 0.0) || !var_ratio.is_finite() {
                    return Err(Error::InvalidBenchmark(format!(
                        "variance ratio must be positive, got {var_ratio}"
                    )));
                }
            }
            BenchmarkKind::SinusoidPerturb { freq } => {
                if !(*freq >= 0.0) || !freq.is_finite() {
                    return Err(Error::InvalidBenchmark(format!(
                        "frequency must be nonnegative, got {freq}"
                    )));
                }
            }
            BenchmarkKind::IcaRotation { d, angle, .. } => {
                if *d == 0 {
                    return Err(Error::InvalidBenchmark("dimension d must be >= 1".into()));
                }
                if !(*angle >= 0.0 && *angle <= std::f64::consts::FRAC_PI_4) {
                    return Err(Error::InvalidBenchmark(format!(
                        "rotation angle must lie in [0, pi/4], got {angle}"
                    )));
                }
            }
            BenchmarkKind::SinDependence { ell } => {
                if *ell == 0 {
                    return Err(Error::InvalidBenchmark("ell must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// True for the two-sample families, false for the paired ones.
    pub fn is_two_sample(&self) -> bool {
        matches!(
            self.kind,
            BenchmarkKind::GaussMeanShift { .. }
                | BenchmarkKind::GaussVarShift { .. }
                | BenchmarkKind::SinusoidPerturb { .. }
        )
    }
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect()
}

/// Generate the two samples of a two-sample benchmark.
pub fn gen_two_sample(spec: &BenchmarkSpec, seed: u64) -> Result<(Sample, Sample)> {
    spec.validate()?;
    let m = spec.m;
    match &spec.kind {
        BenchmarkKind::GaussMeanShift { d, delta } => {
            let mut rng_p = substream(seed, &[TAG_FIRST]);
            let mut rng_q = substream(seed, &[TAG_SECOND]);
            let p = normal_matrix(&mut rng_p, m, *d);
            let mut q = normal_matrix(&mut rng_q, m, *d);
            for i in 0..m {
                q[i * d] += delta;
            }
            Ok((Sample::from_vec(p, m, *d)?, Sample::from_vec(q, m, *d)?))
        }
        BenchmarkKind::GaussVarShift { d, var_ratio } => {
            let mut rng_p = substream(seed, &[TAG_FIRST]);
            let mut rng_q = substream(seed, &[TAG_SECOND]);
            let p = normal_matrix(&mut rng_p, m, *d);
            let mut q = normal_matrix(&mut rng_q, m, *d);
            let sd = var_ratio.sqrt();
            for i in 0..m {
                q[i * d] *= sd;
            }
            Ok((Sample::from_vec(p, m, *d)?, Sample::from_vec(q, m, *d)?))
        }
        BenchmarkKind::SinusoidPerturb { freq } => {
            let mut rng_p = substream(seed, &[TAG_FIRST]);
            let mut rng_q = substream(seed, &[TAG_SECOND]);
            let p: Vec<f64> = (0..m).map(|_| rng_p.sample(StandardNormal)).collect();
            let (q, _) = sample_sinusoid_perturbed(*freq, m, &mut rng_q);
            Ok((Sample::from_column(p)?, Sample::from_column(q)?))
        }
        _ => Err(Error::WrongBenchmarkKind {
            benchmark: kind_name(&spec.kind),
            expected: "two-sample",
        }),
    }
}

/// Generate the paired sample of an independence benchmark.
pub fn gen_paired(spec: &BenchmarkSpec, seed: u64) -> Result<PairedSample> {
    spec.validate()?;
    match &spec.kind {
        BenchmarkKind::IcaRotation { d, angle, source } => {
            gen_ica_rotation(*d, *angle, *source, spec.m, seed)
        }
        BenchmarkKind::SinDependence { ell } => gen_sin_dependence(*ell, spec.m, seed),
        _ => Err(Error::WrongBenchmarkKind {
            benchmark: kind_name(&spec.kind),
            expected: "paired",
        }),
    }
}

fn kind_name(kind: &BenchmarkKind) -> &'static str {
    match kind {
        BenchmarkKind::GaussMeanShift { .. } => "gauss-mean-shift",
        BenchmarkKind::GaussVarShift { .. } => "gauss-var-shift",
        BenchmarkKind::SinusoidPerturb { .. } => "sinusoid-perturb",
        BenchmarkKind::IcaRotation { .. } => "ica-rotation",
        BenchmarkKind::SinDependence { .. } => "sin-dependence",
    }
}

/// Rejection-sample `m` points from the density `phi(x) (1 + sin(freq x))`
/// under the envelope `2 phi(x)`. Returns the samples and the number of
/// proposals consumed; the acceptance probability is exactly 1/2.
pub fn sample_sinusoid_perturbed<R: Rng>(freq: f64, m: usize, rng: &mut R) -> (Vec<f64>, u64) {
    let mut out = Vec::with_capacity(m);
    let mut proposals = 0u64;
    while out.len() < m {
        let x: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        proposals += 1;
        if u < 0.5 * (1.0 + (freq * x).sin()) {
            out.push(x);
        }
    }
    (out, proposals)
}

/// Rejection-sample `m` pairs from `(1 + sin(ell x) sin(ell y)) / (4 pi^2)`
/// on `[-pi, pi]^2` using a uniform proposal with envelope constant 2.
/// Returns the pairs and the number of proposals consumed.
pub fn sample_sin_dependent<R: Rng>(ell: u32, m: usize, rng: &mut R) -> (Vec<(f64, f64)>, u64) {
    use std::f64::consts::PI;
    let l = ell as f64;
    let mut out = Vec::with_capacity(m);
    let mut proposals = 0u64;
    while out.len() < m {
        let x = rng.random_range(-PI..PI);
        let y = rng.random_range(-PI..PI);
        let u: f64 = rng.random();
        proposals += 1;
        if u < 0.5 * (1.0 + (l * x).sin() * (l * y).sin()) {
            out.push((x, y));
        }
    }
    (out, proposals)
}

/// Rotated-sources benchmark: two independent unit-variance non-Gaussian
/// sources, rotated by `angle`, padded to dimension `d` with independent
/// N(0,1) coordinates, then each side multiplied by an independent random
/// orthogonal matrix. At any angle X and Y are uncorrelated; at angle 0
/// they are independent.
pub fn gen_ica_rotation(
    d: usize,
    angle: f64,
    source: IcaSource,
    m: usize,
    seed: u64,
) -> Result<PairedSample> {
    BenchmarkSpec::new(BenchmarkKind::IcaRotation { d, angle, source }, m)?;
    let mut rng_src = substream(seed, &[TAG_SOURCES]);
    let mut rng_nx = substream(seed, &[TAG_NOISE_X]);
    let mut rng_ny = substream(seed, &[TAG_NOISE_Y]);

    let (sin_t, cos_t) = angle.sin_cos();
    let mut x = vec![0.0; m * d];
    let mut y = vec![0.0; m * d];
    for i in 0..m {
        let s1 = source.sample(&mut rng_src);
        let s2 = source.sample(&mut rng_src);
        x[i * d] = cos_t * s1 - sin_t * s2;
        y[i * d] = sin_t * s1 + cos_t * s2;
        for j in 1..d {
            x[i * d + j] = rng_nx.sample(StandardNormal);
            y[i * d + j] = rng_ny.sample(StandardNormal);
        }
    }

    let qx = random_orthogonal(d, derive_seed(seed, &[TAG_ORTHO_X]));
    let qy = random_orthogonal(d, derive_seed(seed, &[TAG_ORTHO_Y]));
    let x = apply_orthogonal(&qx, &x, m, d);
    let y = apply_orthogonal(&qy, &y, m, d);
    PairedSample::new(Sample::from_vec(x, m, d)?, Sample::from_vec(y, m, d)?)
}

fn apply_orthogonal(q: &DMatrix<f64>, data: &[f64], m: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * d];
    for i in 0..m {
        let row = &data[i * d..(i + 1) * d];
        for r in 0..d {
            let mut acc = 0.0;
            for c in 0..d {
                acc += q[(r, c)] * row[c];
            }
            out[i * d + r] = acc;
        }
    }
    out
}

/// Sinusoidally dependent pair on `[-pi, pi]^2`; both marginals are exactly
/// uniform for every integer `ell`.
pub fn gen_sin_dependence(ell: u32, m: usize, seed: u64) -> Result<PairedSample> {
    BenchmarkSpec::new(BenchmarkKind::SinDependence { ell }, m)?;
    let mut rng = substream(seed, &[TAG_FIRST]);
    let (pairs, _) = sample_sin_dependent(ell, m, &mut rng);
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    PairedSample::new(Sample::from_column(x)?, Sample::from_column(y)?)
}

/// Haar-distributed random orthogonal matrix via QR of a standard normal
/// matrix with the R-diagonal sign correction.
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, &[0]);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}
