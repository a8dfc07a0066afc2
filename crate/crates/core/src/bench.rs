//! Wall-clock timing of the coskewness kernel.

use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureMatrix;
use crate::moments::{coskewness_tensor, CoskewTensor};
use crate::synthetic::rng_for;

/// Default memory budget for a dense coskewness tensor: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u128 = 4 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub d: usize,
    pub n: usize,
    pub repeats: usize,
    pub timings_secs: Vec<f64>,
    pub median_secs: f64,
    /// Size of the dense `d³` tensor of `f64`.
    pub tensor_bytes: u128,
}

/// Errors when a `d³` tensor would exceed `budget` bytes.
pub fn check_tensor_budget(d: usize, budget: u128) -> Result<()> {
    let required = CoskewTensor::footprint_bytes(d);
    if required > budget {
        return Err(Error::MemoryBudget {
            what: "coskewness tensor",
            required,
            budget,
        });
    }
    Ok(())
}

/// Times [`coskewness_tensor`] on `n × d` standard normal data.
pub fn bench_coskewness(
    d: usize,
    n: usize,
    repeats: usize,
    budget: u128,
    seed: u64,
) -> Result<BenchReport> {
    if d == 0 || n == 0 || repeats == 0 {
        return Err(invalid("d, n and repeats must be positive"));
    }
    check_tensor_budget(d, budget)?;
    let mut rng = rng_for(seed, 0);
    let x = FeatureMatrix::new(DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng)))?;

    let mut timings_secs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let t = coskewness_tensor(&x);
        timings_secs.push(start.elapsed().as_secs_f64());
        std::hint::black_box(t);
    }
    let mut sorted = timings_secs.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median_secs = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(BenchReport {
        d,
        n,
        repeats,
        timings_secs,
        median_secs,
        tensor_bytes: CoskewTensor::footprint_bytes(d),
    })
}
