//! First three moments of a feature set: mean, covariance and the
//! standardized coskewness tensor of the whitened features.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Relative tolerance for treating a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Default eigenvalue floor for whitening, relative to the largest eigenvalue.
pub const DEFAULT_EPS_REL: f64 = 1e-10;

/// Divisor used when averaging third moments of whitened rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewDivisor {
    /// `1/n`, the plain moment estimator.
    #[default]
    N,
    /// `1/(n-1)`.
    NMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    /// Eigenvalues of the covariance below `eps_rel * max_eigenvalue` are
    /// clamped to that floor before whitening.
    pub eps_rel: f64,
    pub skew_divisor: SkewDivisor,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            eps_rel: DEFAULT_EPS_REL,
            skew_divisor: SkewDivisor::N,
        }
    }
}

/// Dense, fully symmetric `d × d × d` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CoskewTensor {
    dim: usize,
    data: Vec<f64>,
}

impl CoskewTensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds a symmetric tensor from a generator evaluated on `i <= j <= k`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    t.set_symmetric(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Storage footprint of a `d³` tensor of `f64`.
    pub fn footprint_bytes(dim: usize) -> u128 {
        (dim as u128).pow(3) * std::mem::size_of::<f64>() as u128
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    /// Writes `v` at every permutation of `(i, j, k)`.
    pub fn set_symmetric(&mut self, i: usize, j: usize, k: usize, v: f64) {
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            let o = self.offset(a, b, c);
            self.data[o] = v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Mean, covariance and coskewness of one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub mean: DVector<f64>,
    /// Unbiased (`1/(n-1)`) sample covariance.
    pub covariance: DMatrix<f64>,
    /// `None` when only the first two moments were estimated.
    pub coskewness: Option<CoskewTensor>,
    /// Sample count; 0 for exact (population) moments.
    pub n: usize,
}

impl MomentSummary {
    /// Exact moments of a Gaussian: the coskewness tensor is identically zero.
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        check_square(&covariance, d)?;
        Ok(Self {
            coskewness: Some(CoskewTensor::zeros(d)),
            mean,
            covariance,
            n: 0,
        })
    }

    pub fn from_parts(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        coskewness: CoskewTensor,
        n: usize,
    ) -> Result<Self> {
        let d = mean.len();
        check_square(&covariance, d)?;
        if coskewness.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: coskewness.dim(),
            });
        }
        Ok(Self {
            mean,
            covariance,
            coskewness: Some(coskewness),
            n,
        })
    }

    /// Estimated mean and covariance only; enough for FID, not for SID.
    pub fn first_two(m: &FeatureMatrix) -> Result<Self> {
        let (mean, covariance) = mean_covariance(m)?;
        Ok(Self {
            mean,
            covariance,
            coskewness: None,
            n: m.n_samples(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_square(m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if m.nrows() != d { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric { deviation: worst });
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Symmetric eigendecomposition of a symmetric matrix (exactly symmetrized first).
pub(crate) fn sym_eigen(sigma: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    check_symmetric(sigma)?;
    let mut s = sigma.clone();
    symmetrize(&mut s);
    SymmetricEigen::try_new(s, f64::EPSILON, 0).ok_or(Error::NoConvergence)
}

fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f(eig.eigenvalues[j]);
    }
    let mut out = scaled * v.transpose();
    symmetrize(&mut out);
    out
}

/// `Σ^{-1/2}` via the symmetric eigendecomposition, with eigenvalues floored
/// at `eps` (absolute).
pub fn sym_inv_sqrt(sigma: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if !(eps > 0.0) {
        return Err(crate::error::invalid("eps must be positive"));
    }
    let eig = sym_eigen(sigma)?;
    Ok(spectral_map(&eig, |l| 1.0 / l.max(eps).sqrt()))
}

/// Principal square root of a symmetric PSD matrix; negative round-off
/// eigenvalues are clamped to zero.
pub fn sym_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(sigma)?;
    Ok(spectral_map(&eig, |l| l.max(0.0).sqrt()))
}

/// Column means and unbiased covariance.
pub fn mean_covariance(m: &FeatureMatrix) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.n_samples();
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let mean = m.column_means();
    let xc = m.centered(&mean);
    let mut cov = xc.tr_mul(&xc) / (n as f64 - 1.0);
    symmetrize(&mut cov);
    Ok((mean, cov))
}

/// Whitens rows with the given mean and covariance: `z = Σ^{-1/2}(x - μ)`.
///
/// The eigenvalue floor is `eps_rel` times the largest covariance eigenvalue.
pub fn whiten(
    m: &FeatureMatrix,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    eps_rel: f64,
) -> Result<FeatureMatrix> {
    if mean.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: mean.len(),
        });
    }
    let eig = sym_eigen(cov)?;
    let lmax = eig.eigenvalues.max();
    if !(lmax > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let floor = eps_rel * lmax;
    let w = spectral_map(&eig, |l| 1.0 / l.max(floor).sqrt());
    FeatureMatrix::new(m.centered(mean) * w)
}

/// Mean, unbiased covariance and standardized coskewness of `m`.
pub fn moment_summary(m: &FeatureMatrix, opts: &MomentOptions) -> Result<MomentSummary> {
    if !(opts.eps_rel > 0.0) {
        return Err(crate::error::invalid("eps_rel must be positive"));
    }
    let (n, d) = (m.n_samples(), m.dim());
    if n < d + 1 {
        log::warn!("{n} samples for {d} features: covariance is rank deficient");
    }
    let (mean, covariance) = mean_covariance(m)?;
    let z = whiten(m, &mean, &covariance, opts.eps_rel)?;
    let divisor = match opts.skew_divisor {
        SkewDivisor::N => n as f64,
        SkewDivisor::NMinusOne => n as f64 - 1.0,
    };
    let coskewness = third_moment_tensor(z.as_matrix(), divisor);
    Ok(MomentSummary {
        mean,
        covariance,
        coskewness: Some(coskewness),
        n,
    })
}

/// `s_ijk = (1/n) Σ_r x_ri x_rj x_rk` for already whitened rows.
pub fn coskewness_tensor(whitened: &FeatureMatrix) -> CoskewTensor {
    third_moment_tensor(whitened.as_matrix(), whitened.n_samples() as f64)
}

const ROW_CHUNK: usize = 1024;
const COL_BLOCK: usize = 64;

/// Raw third-moment tensor `Σ_r x_ri x_rj x_rk / divisor`.
///
/// Only entries with `i <= j <= k` are accumulated; rows are processed in
/// fixed-size chunks, in order, so results are bit-reproducible. For each
/// chunk and each `i`, the products `x_ri x_rj` (`j >= i`) form a panel `W`
/// and the slab `S[i, j, k]` gets `Wᵀ X` added one column block at a time.
pub(crate) fn third_moment_tensor(x: &DMatrix<f64>, divisor: f64) -> CoskewTensor {
    let (n, d) = x.shape();
    let xs = x.as_slice();
    let mut acc = vec![0.0f64; d * d * d];
    let mut panel = vec![0.0f64; ROW_CHUNK.min(n) * d];

    let mut r0 = 0;
    while r0 < n {
        let b = ROW_CHUNK.min(n - r0);
        for i in 0..d {
            let xi = &xs[i * n + r0..i * n + r0 + b];
            for j in i..d {
                let xj = &xs[j * n + r0..j * n + r0 + b];
                let w = &mut panel[(j - i) * b..(j - i + 1) * b];
                for ((w, a), c) in w.iter_mut().zip(xi).zip(xj) {
                    *w = a * c;
                }
            }
            let mut k0 = i;
            while k0 < d {
                let kw = COL_BLOCK.min(d - k0);
                // Rows j in i..k0+kw cover every j <= k for k in this block.
                let m = k0 + kw - i;
                let out = i * d * d + i * d + k0;
                debug_assert!(out + (m - 1) * d + kw <= acc.len());
                // SAFETY: `panel` holds an m × b row-major block (row stride b),
                // `xs` holds the b × kw block starting at row r0, column k0 of
                // the column-major input (column stride n), and the m × kw
                // destination starting at `out` with row stride d lies inside
                // `acc` per the assertion above. No buffers alias.
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        b,
                        kw,
                        1.0,
                        panel.as_ptr(),
                        b as isize,
                        1,
                        xs.as_ptr().add(k0 * n + r0),
                        1,
                        n as isize,
                        1.0,
                        acc.as_mut_ptr().add(out),
                        d as isize,
                        1,
                    );
                }
                k0 += kw;
            }
        }
        r0 += b;
    }

    let mut t = CoskewTensor::zeros(d);
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                t.set_symmetric(i, j, k, acc[(i * d + j) * d + k] / divisor);
            }
        }
    }
    t
}
