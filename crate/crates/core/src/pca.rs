//! PCA reduction with trace-preserving rescaling.
//!
//! A basis is fitted once on a reference set and then applied to every set
//! being compared, so all reduced sets share one affine frame. Keeping the
//! first `k` components drops variance; the reduced features are rescaled by
//! `sqrt(Σ_i d_i² / Σ_{i≤k} d_i²)` (singular values `d_i` of the centered
//! reference) so that, on the reference itself, the trace of the reduced
//! covariance equals the trace of the original covariance.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureMatrix;

/// A fitted PCA basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaTransform {
    /// Reference column means; subtracted before projecting.
    pub mean: DVector<f64>,
    /// `p × r` matrix of right singular vectors, `r = min(n, p)`, ordered by
    /// nonincreasing singular value.
    pub basis: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub ref_n: usize,
    pub fitted_on: String,
}

impl PcaTransform {
    /// Input dimension `p`.
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of available components.
    pub fn max_components(&self) -> usize {
        self.basis.ncols()
    }

    /// `sqrt(Σ_i d_i² / Σ_{i≤k} d_i²)`.
    pub fn scale(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let kept: f64 = self.singular_values.iter().take(k).map(|s| s * s).sum();
        if !(kept > 0.0) {
            return Err(Error::Degenerate);
        }
        Ok((total / kept).sqrt())
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.max_components() {
            return Err(invalid(format!(
                "target dimension {k} outside 1..={}",
                self.max_components()
            )));
        }
        Ok(())
    }
}

/// Fits the basis on `reference` (centered by its own column means).
pub fn fit_pca(reference: &FeatureMatrix, fitted_on: impl Into<String>) -> Result<PcaTransform> {
    let (n, p) = (reference.n_samples(), reference.dim());
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    let mean = reference.column_means();
    let xc = reference.centered(&mean);

    // For tall inputs, reduce to the p × p triangular factor first; it has
    // the same singular values and right singular vectors as X.
    let core = if n > p { xc.qr().r() } else { xc };
    let svd = SVD::try_new(core, false, true, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let r = order.len();
    let mut basis = DMatrix::zeros(p, r);
    let mut singular_values = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        singular_values[dst] = svd.singular_values[src].max(0.0);
        let mut col = v_t.row(src).transpose();
        // Deterministic sign: largest-magnitude entry positive.
        let lead = col.iamax();
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    if !(singular_values[0] > 0.0) {
        return Err(Error::Degenerate);
    }
    Ok(PcaTransform {
        mean,
        basis,
        singular_values,
        ref_n: n,
        fitted_on: fitted_on.into(),
    })
}

/// Projects `x` onto the first `k` components with trace-preserving scaling.
pub fn apply_reduction(x: &FeatureMatrix, t: &PcaTransform, k: usize) -> Result<FeatureMatrix> {
    if x.dim() != t.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: t.input_dim(),
            found: x.dim(),
        });
    }
    let scale = t.scale(k)?;
    let v1 = t.basis.columns(0, k);
    FeatureMatrix::new(x.centered(&t.mean) * v1 * scale)
}
