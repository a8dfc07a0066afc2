//! Seeded samplers and closed-form reference values.
//!
//! Every sampler draws from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`; normal variates use `rand_distr::StandardNormal`
//! (ziggurat). Independent draws within one call use separate ChaCha streams
//! rather than sharing a generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics::{cov_trace_term_reference, mean_term};

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // Filled row by row so a prefix of rows does not depend on n.
    let mut z = DMatrix::zeros(n, d);
    for r in 0..n {
        for j in 0..d {
            z[(r, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

/// Draws `n` rows from `N(mean, cov)` as `mean + L z` with `L` the Cholesky
/// factor of `cov`.
pub fn sample_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<FeatureMatrix> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: cov.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    crate::moments::check_symmetric(cov)?;
    let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let z = standard_normal_matrix(n, d, &mut rng_for(seed, 0));
    let mut x = z * l.transpose();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(mean[j]);
    }
    FeatureMatrix::new(x)
}

/// `n × d` matrix of independent `Exp(1)` entries.
pub fn sample_exponential(n: usize, d: usize, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = rng_for(seed, 0);
    let mut x = DMatrix::zeros(n, d);
    for r in 0..n {
        for j in 0..d {
            x[(r, j)] = Exp1.sample(&mut rng);
        }
    }
    FeatureMatrix::new(x)
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let g = standard_normal_matrix(d, d, &mut rng_for(seed, 0));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with eigenvalues spread log-uniformly
/// over `[1, condition]`.
pub fn random_spd(d: usize, condition: f64, seed: u64) -> DMatrix<f64> {
    let q = random_orthogonal(d, seed);
    let mut rng = rng_for(seed, 1);
    let lambdas = DVector::from_fn(d, |_, _| condition.powf(rng.random::<f64>()));
    let mut m = &q * DMatrix::from_diagonal(&lambdas) * q.transpose();
    crate::moments::symmetrize(&mut m);
    m
}

/// One component of a univariate Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Univariate Gaussian mixture with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    components: Vec<GmmComponent>,
}

impl GmmSpec {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        for c in &components {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(invalid(format!("weight {} outside (0, 1]", c.weight)));
            }
            if !(c.std > 0.0) || !c.std.is_finite() || !c.mean.is_finite() {
                return Err(invalid(format!("bad component {c:?}")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    /// Zero-mean mixture `2/3 N(0, 1/2) + 1/3 N(0, 2)`: mean 0, variance 1
    /// and zero skew, like `N(0, 1)`, but with a different fourth moment.
    pub fn matched_moment_counterexample() -> Self {
        Self::new(vec![
            GmmComponent {
                weight: 2.0 / 3.0,
                mean: 0.0,
                std: 1.0 / 2f64.sqrt(),
            },
            GmmComponent {
                weight: 1.0 / 3.0,
                mean: 0.0,
                std: 2f64.sqrt(),
            },
        ])
        .expect("valid mixture")
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }
}

/// Draws `n` samples as a single-column matrix.
///
/// The standard normal draws use stream 0, exactly as [`sample_gaussian`]
/// does, and the component choices use stream 1.
pub fn sample_gmm(spec: &GmmSpec, n: usize, seed: u64) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    let mut normals = rng_for(seed, 0);
    let mut picks = rng_for(seed, 1);
    let comps = spec.components();
    let mut x = DMatrix::zeros(n, 1);
    for r in 0..n {
        let z: f64 = StandardNormal.sample(&mut normals);
        let c = if comps.len() == 1 {
            &comps[0]
        } else {
            let u: f64 = picks.random();
            let mut acc = 0.0;
            comps
                .iter()
                .find(|c| {
                    acc += c.weight;
                    u < acc
                })
                .unwrap_or(&comps[comps.len() - 1])
        };
        x[(r, 0)] = c.mean + c.std * z;
    }
    FeatureMatrix::new(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmMoments {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
}

/// Closed-form mean, variance and third central moment of a mixture.
pub fn gmm_first_three_moments(spec: &GmmSpec) -> GmmMoments {
    let comps = spec.components();
    let mean: f64 = comps.iter().map(|c| c.weight * c.mean).sum();
    let second: f64 = comps
        .iter()
        .map(|c| c.weight * (c.std * c.std + c.mean * c.mean))
        .sum();
    let third_central = comps
        .iter()
        .map(|c| {
            let dm = c.mean - mean;
            c.weight * (dm * dm * dm + 3.0 * dm * c.std * c.std)
        })
        .sum();
    GmmMoments {
        mean,
        variance: second - mean * mean,
        third_central,
    }
}

/// Squared 2-Wasserstein distance between two Gaussians from their exact
/// parameters, evaluated through `Σ1^{1/2} Σ2 Σ1^{1/2}`.
pub fn analytic_gaussian_fid(
    mu1: &DVector<f64>,
    sigma1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    sigma2: &DMatrix<f64>,
) -> Result<f64> {
    for s in [sigma1, sigma2] {
        crate::moments::check_symmetric(s)?;
        if s.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(mean_term(mu1, mu2)? + cov_trace_term_reference(sigma1, sigma2)?)
}

/// L2 distance between the densities of `Exp(λ1)` and `Exp(λ2)`:
/// `|λ1 - λ2| / sqrt(2(λ1 + λ2))`.
pub fn exponential_l2_distance(lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
        return Err(invalid("exponential rates must be positive and finite"));
    }
    Ok((lambda1 - lambda2).abs() / (2.0 * (lambda1 + lambda2)).sqrt())
}
