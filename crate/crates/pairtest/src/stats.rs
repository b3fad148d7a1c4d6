//! The test statistics, all computed as biased V-statistics (diagonal terms
//! included) from pairwise kernel or distance evaluations.

use crate::error::{Error, Result};
use crate::kernels::{self, GramMatrix, KernelSpec, SemimetricSpec};
use crate::sample::{PairedSample, Sample};
use crate::sum::Acc;

/// Energy distance V-statistic:
/// `2 mean rho(z_i, w_j) - mean rho(z_i, z_j) - mean rho(w_i, w_j)`.
pub fn energy_distance_v(z: &Sample, w: &Sample, rho: &SemimetricSpec) -> Result<f64> {
    if z.n_cols() != w.n_cols() {
        return Err(Error::DimensionMismatch {
            left: z.n_cols(),
            right: w.n_cols(),
        });
    }
    let (m, n) = (z.n_rows(), w.n_rows());
    let mut zw = Acc::new();
    for i in 0..m {
        for j in 0..n {
            zw.add(rho.eval_unchecked(z.row(i), w.row(j)));
        }
    }
    let mut zz = Acc::new();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                zz.add(rho.eval_unchecked(z.row(i), z.row(j)));
            }
        }
    }
    let mut ww = Acc::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                ww.add(rho.eval_unchecked(w.row(i), w.row(j)));
            }
        }
    }
    Ok(2.0 * zw.value() / (m as f64 * n as f64)
        - zz.value() / (m as f64 * m as f64)
        - ww.value() / (n as f64 * n as f64))
}

/// MMD V-statistic over a Gram matrix of the pooled sample `[z; w]`, where
/// `a_idx` and `b_idx` select the two pseudo-samples.
pub(crate) fn mmd_from_pooled(pooled: &GramMatrix, a_idx: &[usize], b_idx: &[usize]) -> f64 {
    let m = a_idx.len() as f64;
    let n = b_idx.len() as f64;
    let mut aa = Acc::new();
    for &i in a_idx {
        for &j in a_idx {
            aa.add(pooled.get(i, j));
        }
    }
    let mut bb = Acc::new();
    for &i in b_idx {
        for &j in b_idx {
            bb.add(pooled.get(i, j));
        }
    }
    let mut ab = Acc::new();
    for &i in a_idx {
        for &j in b_idx {
            ab.add(pooled.get(i, j));
        }
    }
    aa.value() / (m * m) + bb.value() / (n * n) - 2.0 * ab.value() / (m * n)
}

/// MMD V-statistic:
/// `mean k(z_i, z_j) + mean k(w_i, w_j) - 2 mean k(z_i, w_j)`.
///
/// Nonnegative (up to rounding) for positive definite kernels. With a
/// distance kernel this equals half the energy distance under the
/// generating semimetric, independently of the kernel's center point.
pub fn mmd_v(z: &Sample, w: &Sample, k: &KernelSpec) -> Result<f64> {
    let pooled = z.vstack(w)?;
    let g = kernels::gram(k, &pooled, None)?;
    let a_idx: Vec<usize> = (0..z.n_rows()).collect();
    let b_idx: Vec<usize> = (z.n_rows()..pooled.n_rows()).collect();
    Ok(mmd_from_pooled(&g, &a_idx, &b_idx))
}

/// Distance covariance V-statistic, computed directly from the two pairwise
/// distance matrices:
///
/// ```text
/// mean(a .* b) + mean(a) mean(b) - 2 mean_i[ rowmean(a)_i rowmean(b)_i ]
/// ```
///
/// This deliberately shares no code with [`hsic_v`]; the two must agree when
/// HSIC uses the unscaled distance-kernel product factors, which makes the
/// pair a genuine cross-check.
pub fn dcov_v(p: &PairedSample, rho_x: &SemimetricSpec, rho_y: &SemimetricSpec) -> Result<f64> {
    let m = p.m();
    let a = kernels::distance_matrix(rho_x, &p.x);
    let b = kernels::distance_matrix(rho_y, &p.y);
    let inv_m = 1.0 / m as f64;

    let mut hadamard = Acc::new();
    for (va, vb) in a.as_slice().iter().zip(b.as_slice()) {
        hadamard.add(va * vb);
    }
    let term1 = hadamard.value() * inv_m * inv_m;

    let mut row_a = vec![0.0; m];
    let mut row_b = vec![0.0; m];
    for i in 0..m {
        row_a[i] = crate::sum::sum(a.row(i).iter().copied()) * inv_m;
        row_b[i] = crate::sum::sum(b.row(i).iter().copied()) * inv_m;
    }
    let mean_a = crate::sum::sum(row_a.iter().copied()) * inv_m;
    let mean_b = crate::sum::sum(row_b.iter().copied()) * inv_m;
    let term2 = mean_a * mean_b;

    let mut cross = Acc::new();
    for i in 0..m {
        cross.add(row_a[i] * row_b[i]);
    }
    let term3 = 2.0 * cross.value() * inv_m;

    Ok(term1 + term2 - term3)
}

/// HSIC V-statistic `(1/m^2) Tr(K_x H K_y H)`, evaluated as the entrywise
/// sum of the two centered Gram matrices. Centering both sides (H is
/// idempotent, so this equals the one-sided form) makes a constant side
/// yield exactly zero instead of accumulated rounding noise.
pub fn hsic_v(p: &PairedSample, kx: &KernelSpec, ky: &KernelSpec) -> Result<f64> {
    let gx = kernels::gram(kx, &p.x, None)?;
    let gy = kernels::gram(ky, &p.y, None)?;
    let cx = kernels::center_gram(&gx)?;
    let cy = kernels::center_gram(&gy)?;
    Ok(hsic_from_grams(&cx, &cy, &identity_perm(p.m())))
}

/// `(1/m^2) sum_ij centered_kx[i][j] * centered_ky[perm(i)][perm(j)]`:
/// HSIC of the data with the y rows relabeled by `perm`. Centering commutes
/// with row/column permutation, so permuting the centered matrix equals
/// centering the permuted one.
pub(crate) fn hsic_from_grams(
    centered_kx: &GramMatrix,
    centered_ky: &GramMatrix,
    perm: &[usize],
) -> f64 {
    let m = centered_kx.n_rows();
    let mut acc = Acc::new();
    for i in 0..m {
        let row = centered_kx.row(i);
        let pi = perm[i];
        for (j, v) in row.iter().enumerate() {
            acc.add(v * centered_ky.get(pi, perm[j]));
        }
    }
    acc.value() / (m as f64 * m as f64)
}

pub(crate) fn identity_perm(m: usize) -> Vec<usize> {
    (0..m).collect()
}

/// Distance correlation: `V2(x,y) / sqrt(V2(x,x) V2(y,y))`, defined as 0
/// whenever the denominator vanishes.
pub fn dcorr(p: &PairedSample, rho_x: &SemimetricSpec, rho_y: &SemimetricSpec) -> Result<f64> {
    let vxy = dcov_v(p, rho_x, rho_y)?;
    let vxx = dcov_v(&PairedSample::new(p.x.clone(), p.x.clone())?, rho_x, rho_x)?;
    let vyy = dcov_v(&PairedSample::new(p.y.clone(), p.y.clone())?, rho_y, rho_y)?;
    let denom_sq = vxx.max(0.0) * vyy.max(0.0);
    if denom_sq <= 0.0 {
        return Ok(0.0);
    }
    Ok(vxy / denom_sq.sqrt())
}
