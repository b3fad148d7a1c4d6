//! Semimetrics of negative type, the kernels they induce, and Gram matrices.
//!
//! A semimetric `rho` has negative type when every zero-sum weighted double
//! sum over it is nonpositive. Fixing a center point `z0` turns such a
//! semimetric into a positive definite kernel
//!
//! ```text
//! k(z, z') = 1/2 * [rho(z, z0) + rho(z', z0) - rho(z, z')]
//! ```
//!
//! and conversely any nondegenerate kernel generates the semimetric
//! `rho(z, z') = k(z,z) + k(z',z') - 2 k(z,z')`. These two constructions are
//! what lets energy-distance statistics and kernel statistics be computed
//! from one another.

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::sum::{self, Acc};

/// Tolerance used for zero-sum weight validation.
const ZERO_SUM_TOL: f64 = 1e-12;

/// A semimetric on real vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum SemimetricSpec {
    /// `rho_q(z, z') = ||z - z'||^q`. Of negative type for 0 < q <= 2; a
    /// metric only for q <= 1.
    EuclideanPower { q: f64 },
    /// The semimetric generated by a kernel:
    /// `rho(z, z') = k(z,z) + k(z',z') - 2 k(z,z')`.
    FromKernel(Box<KernelSpec>),
}

impl SemimetricSpec {
    /// Euclidean distance raised to the power `q`, validated to (0, 2].
    pub fn euclidean_power(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 2.0) || !q.is_finite() {
            return Err(Error::InvalidExponent(q));
        }
        Ok(Self::EuclideanPower { q })
    }

    /// Plain Euclidean distance (q = 1).
    pub fn euclidean() -> Self {
        Self::EuclideanPower { q: 1.0 }
    }

    pub fn from_kernel(k: KernelSpec) -> Self {
        Self::FromKernel(Box::new(k))
    }

    /// Evaluate `rho(a, b)`. Symmetric, nonnegative, zero iff `a == b` up to
    /// floating tolerance.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(self.eval_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::EuclideanPower { q } => euclidean_power_dist(a, b, *q),
            Self::FromKernel(k) => {
                k.eval_unchecked(a, a) + k.eval_unchecked(b, b) - 2.0 * k.eval_unchecked(a, b)
            }
        }
    }
}

#[inline]
fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[inline]
fn euclidean_power_dist(a: &[f64], b: &[f64], q: f64) -> f64 {
    let s = squared_dist(a, b);
    if q == 2.0 {
        s
    } else if q == 1.0 {
        s.sqrt()
    } else {
        s.powf(q / 2.0)
    }
}

/// A positive definite kernel on real vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `scale * [rho(z, z0) + rho(z', z0) - rho(z, z')]`.
    ///
    /// The standard construction carries `scale = 1/2`, under which the
    /// kernel generates `rho` itself and MMD equals half the energy
    /// distance. Note `k(z0, z0) = 0`.
    DistanceInduced {
        rho: Box<SemimetricSpec>,
        center: Vec<f64>,
        scale: f64,
    },
    /// `exp(-sigma * ||z - z'||^2)` with `sigma > 0`.
    Gaussian { sigma: f64 },
    /// `kx(x, x') * ky(y, y')` on points formed by concatenating an x-block
    /// and a y-block; `split` is the first column of the y-block.
    Product {
        kx: Box<KernelSpec>,
        ky: Box<KernelSpec>,
        split: usize,
    },
}

impl KernelSpec {
    /// Distance kernel induced by `rho`, centered at `center`, with the
    /// standard 1/2 scale.
    pub fn distance_induced(rho: SemimetricSpec, center: Vec<f64>) -> Self {
        Self::DistanceInduced {
            rho: Box::new(rho),
            center,
            scale: 0.5,
        }
    }

    /// Distance kernel without the 1/2 scale.
    ///
    /// The product of two of these (one per variable) is exactly the kernel
    /// for which HSIC coincides with distance covariance, so this is the
    /// factor convention to use when cross-checking the two statistics.
    pub fn distance_induced_unscaled(rho: SemimetricSpec, center: Vec<f64>) -> Self {
        Self::DistanceInduced {
            rho: Box::new(rho),
            center,
            scale: 1.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(Self::Gaussian { sigma })
    }

    pub fn product(kx: KernelSpec, ky: KernelSpec, split: usize) -> Self {
        Self::Product {
            kx: Box::new(kx),
            ky: Box::new(ky),
            split,
        }
    }

    /// Evaluate `k(a, b)`.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        self.check_dim(a.len())?;
        Ok(self.eval_unchecked(a, b))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            Self::DistanceInduced { center, .. } => {
                if center.len() != d {
                    return Err(Error::DimensionMismatch {
                        left: center.len(),
                        right: d,
                    });
                }
            }
            Self::Gaussian { .. } => {}
            Self::Product { kx, ky, split } => {
                if *split == 0 || *split >= d {
                    return Err(Error::DimensionMismatch { left: *split, right: d });
                }
                kx.check_dim(*split)?;
                ky.check_dim(d - *split)?;
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::DistanceInduced { rho, center, scale } => {
                scale
                    * (rho.eval_unchecked(a, center) + rho.eval_unchecked(b, center)
                        - rho.eval_unchecked(a, b))
            }
            Self::Gaussian { sigma } => (-sigma * squared_dist(a, b)).exp(),
            Self::Product { kx, ky, split } => {
                kx.eval_unchecked(&a[..*split], &b[..*split])
                    * ky.eval_unchecked(&a[*split..], &b[*split..])
            }
        }
    }
}

/// The zero-sum quadratic form `sum_ij w_i w_j rho(z_i, z_j)`.
///
/// For a semimetric of negative type the result is nonpositive up to
/// rounding, for any weights summing to zero.
pub fn negative_type_form(spec: &SemimetricSpec, points: &Sample, weights: &[f64]) -> Result<f64> {
    let n = points.n_rows();
    if n < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            left: weights.len(),
            right: n,
        });
    }
    let total = sum::sum(weights.iter().copied());
    if total.abs() > ZERO_SUM_TOL {
        return Err(Error::WeightsNotZeroSum(total.abs()));
    }
    let mut acc = Acc::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue; // rho(z, z) = 0
            }
            acc.add(weights[i] * weights[j] * spec.eval_unchecked(points.row(i), points.row(j)));
        }
    }
    Ok(acc.value())
}

/// Gaussian-kernel bandwidth from the median heuristic.
///
/// Returns `sigma` such that `exp(-sigma ||.||^2)` has bandwidth equal to
/// the median pairwise Euclidean distance `nu` over the pooled sample,
/// under the convention `sigma = 1 / nu^2`. Zero distances are excluded
/// from the median.
pub fn median_heuristic_sigma(pooled: &Sample) -> Result<f64> {
    let n = pooled.n_rows();
    if n < 2 {
        return Err(Error::TooFewPoints { need: 2, got: n });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_dist(pooled.row(i), pooled.row(j)).sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::DegenerateMedian);
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = dists.len() / 2;
    let nu = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    Ok(1.0 / (nu * nu))
}

/// A dense kernel (or distance) matrix. Square instances built by [`gram`]
/// without a second sample are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl GramMatrix {
    pub(crate) fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { data, rows, cols }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> f64 {
        debug_assert!(self.is_square());
        sum::sum((0..self.rows).map(|i| self.get(i, i)))
    }
}

/// Pairwise kernel matrix `G[i][j] = k(a_i, b_j)`; `b = a` when absent.
pub fn gram(spec: &KernelSpec, a: &Sample, b: Option<&Sample>) -> Result<GramMatrix> {
    match b {
        None => {
            let d = a.n_cols();
            spec.check_dim(d)?;
            let n = a.n_rows();
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = spec.eval_unchecked(a.row(i), a.row(j));
                    data[i * n + j] = v;
                    data[j * n + i] = v;
                }
            }
            Ok(GramMatrix::from_vec(data, n, n))
        }
        Some(b) => {
            if a.n_cols() != b.n_cols() {
                return Err(Error::DimensionMismatch {
                    left: a.n_cols(),
                    right: b.n_cols(),
                });
            }
            spec.check_dim(a.n_cols())?;
            let (m, n) = (a.n_rows(), b.n_rows());
            let mut data = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    data[i * n + j] = spec.eval_unchecked(a.row(i), b.row(j));
                }
            }
            Ok(GramMatrix::from_vec(data, m, n))
        }
    }
}

/// Pairwise distance matrix under a semimetric.
pub fn distance_matrix(spec: &SemimetricSpec, a: &Sample) -> GramMatrix {
    let n = a.n_rows();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = spec.eval_unchecked(a.row(i), a.row(j));
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    GramMatrix::from_vec(data, n, n)
}

/// Double centering `H G H` with `H = I - (1/m) * ones`. Row and column
/// sums of the result vanish up to rounding.
pub fn center_gram(g: &GramMatrix) -> Result<GramMatrix> {
    if !g.is_square() {
        return Err(Error::NonSquareGram {
            rows: g.n_rows(),
            cols: g.n_cols(),
        });
    }
    let n = g.n_rows();
    let inv = 1.0 / n as f64;
    let mut row_means = vec![0.0; n];
    let mut col_means = vec![0.0; n];
    for i in 0..n {
        row_means[i] = sum::sum(g.row(i).iter().copied()) * inv;
    }
    for j in 0..n {
        col_means[j] = sum::sum((0..n).map(|i| g.get(i, j))) * inv;
    }
    let grand = sum::sum(row_means.iter().copied()) * inv;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = g.get(i, j) - row_means[i] - col_means[j] + grand;
        }
    }
    Ok(GramMatrix::from_vec(data, n, n))
}
