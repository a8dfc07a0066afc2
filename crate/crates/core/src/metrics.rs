//! FID and SID between moment summaries.
//!
//! FID is `‖μ1 − μ2‖² + Tr(Σ1 + Σ2 − 2√(Σ1Σ2))`. SID adds a skew term: the
//! squared Frobenius distance between the element-wise real cube roots of
//! the two coskewness tensors, passed through a logistic squashing
//! `σ(αs/m)·m − m/2` so it saturates at `m/2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::moments::{check_symmetric, sym_eigen, sym_sqrt, CoskewTensor, MomentSummary};

/// Parameters of the skew-term squashing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    /// Logistic steepness.
    pub alpha: f64,
    /// Saturation scale; the squashed term is below `m / 2`.
    pub m: f64,
}

impl Default for SkewParams {
    fn default() -> Self {
        Self {
            alpha: 10_000.0,
            m: 150.0,
        }
    }
}

impl SkewParams {
    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        let p = Self { alpha, m };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(invalid(format!("m must be positive, got {}", self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub d: usize,
}

/// Every term of a FID/SID evaluation.
///
/// `fid = mean_term + cov_term`. `sid = fid + skew_squashed` when `squashed`
/// is set, otherwise `sid = fid + skew_raw`. For FID-only reports all skew
/// fields are zero and `sid == fid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mean_term: f64,
    pub cov_term: f64,
    pub skew_raw: f64,
    pub skew_squashed: f64,
    pub fid: f64,
    pub sid: f64,
    pub squashed: bool,
    pub dims: Dims,
    pub params: SkewParams,
}

/// Squared Euclidean distance between the means.
pub fn mean_term(mu1: &DVector<f64>, mu2: &DVector<f64>) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::DimensionMismatch {
            expected: mu1.len(),
            found: mu2.len(),
        });
    }
    Ok(mu1.iter().zip(mu2.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Orders the pair by their entries so both argument orders take the same
/// floating-point path and the result is exactly symmetric.
fn canonical<'a>(
    sigma1: &'a DMatrix<f64>,
    sigma2: &'a DMatrix<f64>,
) -> (&'a DMatrix<f64>, &'a DMatrix<f64>) {
    let swap = sigma1
        .iter()
        .zip(sigma2.iter())
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        == Some(std::cmp::Ordering::Greater);
    if swap {
        (sigma2, sigma1)
    } else {
        (sigma1, sigma2)
    }
}

fn check_pair(sigma1: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<()> {
    check_symmetric(sigma1)?;
    check_symmetric(sigma2)?;
    if sigma1.nrows() != sigma2.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma1.nrows(),
            found: sigma2.nrows(),
        });
    }
    Ok(())
}

/// `Tr(Σ1 + Σ2 − 2√(Σ1Σ2))` from the eigenvalues of the (non-symmetric)
/// product `Σ1Σ2`, which are those of `Σ1^{1/2} Σ2 Σ1^{1/2}`.
pub fn cov_trace_term(sigma1: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<f64> {
    check_pair(sigma1, sigma2)?;
    let (sigma1, sigma2) = canonical(sigma1, sigma2);
    let product = sigma1 * sigma2;
    let schur = nalgebra::Schur::try_new(product, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
    let root_sum: f64 = schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re.max(0.0).sqrt())
        .sum();
    Ok((sigma1.trace() + sigma2.trace() - 2.0 * root_sum).max(0.0))
}

/// Same quantity through the symmetric matrix `A Σ2 A` with `A = Σ1^{1/2}`.
pub fn cov_trace_term_reference(sigma1: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<f64> {
    check_pair(sigma1, sigma2)?;
    let (sigma1, sigma2) = canonical(sigma1, sigma2);
    let a = sym_sqrt(sigma1)?;
    let mut inner = &a * sigma2 * &a;
    crate::moments::symmetrize(&mut inner);
    let eig = sym_eigen(&inner)?;
    let root_sum: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((sigma1.trace() + sigma2.trace() - 2.0 * root_sum).max(0.0))
}

/// `Σ_ijk (∛a_ijk − ∛b_ijk)²` with the real, sign-preserving cube root.
pub fn raw_skew_distance(s1: &CoskewTensor, s2: &CoskewTensor) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    Ok(s1
        .as_slice()
        .iter()
        .zip(s2.as_slice())
        .map(|(a, b)| {
            let diff = a.cbrt() - b.cbrt();
            diff * diff
        })
        .sum())
}

/// `σ(α s / m)·m − m/2`, computed as `(m/2)·tanh(α s / 2m)`.
pub fn squash_skew(s: f64, p: &SkewParams) -> Result<f64> {
    p.validate()?;
    if !(s >= 0.0) {
        return Err(invalid(format!("skew distance must be nonnegative, got {s}")));
    }
    Ok(0.5 * p.m * (p.alpha * s / (2.0 * p.m)).tanh())
}

fn check_dims(a: &MomentSummary, b: &MomentSummary) -> Result<Dims> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(Dims {
        n1: a.n,
        n2: b.n,
        d: a.dim(),
    })
}

pub fn compute_fid(a: &MomentSummary, b: &MomentSummary) -> Result<MetricReport> {
    let dims = check_dims(a, b)?;
    let mean_term = mean_term(&a.mean, &b.mean)?;
    let cov_term = cov_trace_term(&a.covariance, &b.covariance)?;
    let fid = mean_term + cov_term;
    Ok(MetricReport {
        mean_term,
        cov_term,
        skew_raw: 0.0,
        skew_squashed: 0.0,
        fid,
        sid: fid,
        squashed: false,
        dims,
        params: SkewParams::default(),
    })
}

/// SID with the squashed skew term.
pub fn compute_sid(a: &MomentSummary, b: &MomentSummary, p: &SkewParams) -> Result<MetricReport> {
    sid_report(a, b, p, true)
}

/// SID with the raw (unsquashed) skew term added directly.
pub fn compute_sid_unsquashed(a: &MomentSummary, b: &MomentSummary) -> Result<MetricReport> {
    sid_report(a, b, &SkewParams::default(), false)
}

fn sid_report(
    a: &MomentSummary,
    b: &MomentSummary,
    p: &SkewParams,
    squashed: bool,
) -> Result<MetricReport> {
    p.validate()?;
    let (sa, sb) = match (&a.coskewness, &b.coskewness) {
        (Some(sa), Some(sb)) => (sa, sb),
        _ => return Err(Error::MissingCoskewness),
    };
    let mut report = compute_fid(a, b)?;
    let skew_raw = raw_skew_distance(sa, sb)?;
    let skew_squashed = squash_skew(skew_raw, p)?;
    report.skew_raw = skew_raw;
    report.skew_squashed = skew_squashed;
    report.squashed = squashed;
    report.params = *p;
    report.sid = report.fid + if squashed { skew_squashed } else { skew_raw };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_orthogonal, random_spd, rng_for};
    use proptest::prelude::*;
    use rand::Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn random_tensor(d: usize, seed: u64) -> CoskewTensor {
        let mut rng = rng_for(seed, 7);
        CoskewTensor::from_upper(d, |_, _, _| rng.random_range(-2.0..2.0))
    }

    fn random_summary(d: usize, seed: u64) -> MomentSummary {
        let mut rng = rng_for(seed, 3);
        let mean = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        MomentSummary::from_parts(mean, random_spd(d, 10.0, seed), random_tensor(d, seed), 100)
            .unwrap()
    }

    #[test]
    fn mean_term_cases() {
        let z = DVector::zeros(2);
        assert_eq!(mean_term(&z, &z).unwrap(), 0.0);
        assert_eq!(mean_term(&z, &DVector::from_vec(vec![3.0, 4.0])).unwrap(), 25.0);
        assert!(mean_term(&z, &DVector::zeros(3)).is_err());

        let mut rng = rng_for(1, 0);
        let a = DVector::from_fn(64, |_, _| rng.random::<f64>());
        let b = DVector::from_fn(64, |_, _| rng.random::<f64>());
        let mut oracle = 0.0;
        for i in 0..64 {
            oracle += (a[i] - b[i]).powi(2);
        }
        assert!((mean_term(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn cov_term_closed_forms() {
        let s = random_spd(7, 30.0, 2);
        assert!(cov_trace_term(&s, &s).unwrap() < 1e-8);
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        assert!((cov_trace_term(&one(1.0), &one(9.0)).unwrap() - 4.0).abs() < 1e-12);
        assert!((cov_trace_term(&diag(&[1.0, 4.0]), &diag(&[9.0, 1.0])).unwrap() - 5.0).abs() < 1e-12);
        assert!(
            (cov_trace_term_reference(&diag(&[1.0, 4.0]), &diag(&[9.0, 1.0])).unwrap() - 5.0).abs()
                < 1e-12
        );
        let i = DMatrix::identity(4, 4);
        assert!(cov_trace_term_reference(&i, &i).unwrap().abs() < 1e-14);
    }

    #[test]
    fn cov_term_rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        let i2 = DMatrix::identity(2, 2);
        assert!(matches!(cov_trace_term(&asym, &i2), Err(Error::Asymmetric { .. })));
        assert!(matches!(
            cov_trace_term(&i2, &DMatrix::identity(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(cov_trace_term_reference(&i2, &asym).is_err());
    }

    #[test]
    fn eigen_route_matches_reference_route() {
        for seed in 0..100u64 {
            let d = 1 + (seed as usize * 7) % 64;
            let s1 = random_spd(d, 50.0, seed);
            let s2 = random_spd(d, 50.0, seed + 1000);
            let fast = cov_trace_term(&s1, &s2).unwrap();
            let slow = cov_trace_term_reference(&s1, &s2).unwrap();
            assert!((fast - slow).abs() <= 1e-8 * (1.0 + slow.abs()), "d={d}: {fast} vs {slow}");
        }
    }

    #[test]
    fn self_distance_vanishes_up_to_d128() {
        for (d, seed) in [(2, 0), (33, 1), (128, 2)] {
            let s = random_spd(d, 20.0, seed);
            assert!(cov_trace_term(&s, &s).unwrap() < 1e-8);
        }
    }

    #[test]
    fn raw_skew_cases() {
        let t = random_tensor(4, 3);
        assert_eq!(raw_skew_distance(&t, &t).unwrap(), 0.0);

        let a = CoskewTensor::from_upper(1, |_, _, _| 8.0);
        let b = CoskewTensor::from_upper(1, |_, _, _| -1.0);
        assert!((raw_skew_distance(&a, &b).unwrap() - 9.0).abs() < 1e-12);

        let u = random_tensor(4, 4);
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let (x, y) = (u.get(i, j, k), t.get(i, j, k));
                    let cx = x.signum() * x.abs().powf(1.0 / 3.0);
                    let cy = y.signum() * y.abs().powf(1.0 / 3.0);
                    oracle += (cx - cy).powi(2);
                }
            }
        }
        assert!((raw_skew_distance(&u, &t).unwrap() - oracle).abs() < 1e-12);
        assert!(raw_skew_distance(&u, &CoskewTensor::zeros(3)).is_err());
    }

    #[test]
    fn squash_values() {
        let p = SkewParams::default();
        assert_eq!(squash_skew(0.0, &p).unwrap(), 0.0);
        assert!((squash_skew(1e6, &p).unwrap() - 75.0).abs() < 1e-9);
        let s = 150.0 * 3f64.ln() / 10_000.0;
        // Logistic form evaluated directly: 1/(1+e^{-ln 3}) = 3/4.
        let logistic = (1.0 / (1.0 + (-(p.alpha * s / p.m)).exp())) * p.m - p.m / 2.0;
        assert!((logistic - 37.5).abs() < 1e-9);
        assert!((squash_skew(s, &p).unwrap() - 37.5).abs() < 1e-9);
        assert!(squash_skew(-1e-3, &p).is_err());
        assert!(SkewParams::new(0.0, 1.0).is_err());
        assert!(SkewParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn fid_examples() {
        let a = MomentSummary::gaussian(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let b = MomentSummary::gaussian(DVector::from_element(1, 2.0), DMatrix::from_element(1, 1, 4.0))
            .unwrap();
        assert_eq!(compute_fid(&a, &a).unwrap().fid, 0.0);
        assert!((compute_fid(&a, &b).unwrap().fid - 5.0).abs() < 1e-12);
        let c = MomentSummary::gaussian(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(compute_fid(&a, &c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sid_examples() {
        let p = SkewParams::default();
        let s = random_summary(3, 5);
        let r = compute_sid(&s, &s, &p).unwrap();
        assert_eq!((r.sid, r.skew_raw, r.skew_squashed), (0.0, 0.0, 0.0));

        let g = MomentSummary::gaussian(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let skewed = MomentSummary::from_parts(
            DVector::zeros(1),
            DMatrix::from_element(1, 1, 1.0),
            CoskewTensor::from_upper(1, |_, _, _| 0.125),
            0,
        )
        .unwrap();
        let r = compute_sid(&g, &skewed, &p).unwrap();
        assert_eq!(r.skew_raw, 0.25);
        assert_eq!(r.sid - r.fid, squash_skew(0.25, &p).unwrap());

        let raw = compute_sid_unsquashed(&g, &skewed).unwrap();
        assert!(!raw.squashed);
        assert_eq!(raw.sid, raw.fid + 0.25);

        let no_skew = MomentSummary {
            coskewness: None,
            ..g.clone()
        };
        assert!(matches!(compute_sid(&g, &no_skew, &p), Err(Error::MissingCoskewness)));
    }

    #[test]
    fn fid_invariant_under_common_rotation() {
        let q = random_orthogonal(5, 1);
        let a = random_summary(5, 1);
        let b = random_summary(5, 2);
        let rot = |s: &MomentSummary| {
            MomentSummary::gaussian(&q * &s.mean, &q * &s.covariance * q.transpose()).unwrap()
        };
        let f = compute_fid(&a, &b).unwrap().fid;
        let g = compute_fid(&rot(&a), &rot(&b)).unwrap().fid;
        assert!((f - g).abs() < 1e-8);
    }

    fn dist(a: &MomentSummary, b: &MomentSummary, squashed: bool) -> f64 {
        let r = if squashed {
            compute_sid(a, b, &SkewParams::default()).unwrap()
        } else {
            compute_sid_unsquashed(a, b).unwrap()
        };
        r.sid.sqrt()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn summaries_form_a_pseudometric(seed in 0u64..10_000, d in 1usize..5, squashed: bool) {
            let a = random_summary(d, seed);
            let b = random_summary(d, seed + 1);
            let c = random_summary(d, seed + 2);
            // Exact zero for the skew and mean terms; the trace term carries
            // eigensolver round-off.
            prop_assert!(dist(&a, &a, squashed).powi(2) < 1e-8);
            prop_assert_eq!(dist(&a, &b, squashed), dist(&b, &a, squashed));
            prop_assert!(dist(&a, &c, squashed) <= dist(&a, &b, squashed) + dist(&b, &c, squashed) + 1e-9);
        }

        #[test]
        fn sid_dominates_fid(seed in 0u64..10_000, d in 1usize..5) {
            let a = random_summary(d, seed);
            let b = random_summary(d, seed + 1);
            let r = compute_sid(&a, &b, &SkewParams::default()).unwrap();
            prop_assert!(r.sid >= r.fid);
            prop_assert!(r.skew_squashed >= 0.0 && r.skew_squashed < 75.0 + 1e-12);
            prop_assert_eq!(r.fid, r.mean_term + r.cov_term);
        }

        #[test]
        fn squash_is_increasing(s in 0.0f64..0.1, ds in 1e-6f64..1e-3) {
            let p = SkewParams::default();
            prop_assert!(squash_skew(s + ds, &p).unwrap() > squash_skew(s, &p).unwrap());
        }
    }
}
