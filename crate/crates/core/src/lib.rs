//! Skew Inception Distance (SID) and Fréchet Inception Distance (FID)
//! between sets of feature vectors.
//!
//! The pipeline is: load feature matrices ([`io`]), optionally project both
//! sets onto a shared PCA basis ([`pca`]), summarize each set by its mean,
//! covariance and coskewness tensor ([`moments`]), then compare the
//! summaries ([`metrics`]).
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use sid_core::{compute_sid, moment_summary, sample_gaussian, MomentOptions, SkewParams};
//!
//! let a = sample_gaussian(&DVector::zeros(3), &DMatrix::identity(3, 3), 2000, 0).unwrap();
//! let b = sample_gaussian(&DVector::from_element(3, 0.5), &DMatrix::identity(3, 3), 2000, 1).unwrap();
//! let opts = MomentOptions::default();
//! let report = compute_sid(
//!     &moment_summary(&a, &opts).unwrap(),
//!     &moment_summary(&b, &opts).unwrap(),
//!     &SkewParams::default(),
//! )
//! .unwrap();
//! assert!(report.sid >= report.fid);
//! ```
//!
//! Supporting modules provide skewness tests ([`stat_tests`]), image
//! corruptions ([`distortions`]), seeded samplers with closed-form reference
//! values ([`synthetic`]) and kernel timing ([`bench`]).

pub mod bench;
pub mod distortions;
pub mod error;
pub mod features;
pub mod io;
pub mod metrics;
pub mod moments;
pub mod pca;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use io::{load_features, save_features};
pub use metrics::{
    compute_fid, compute_sid, compute_sid_unsquashed, cov_trace_term, cov_trace_term_reference,
    mean_term, raw_skew_distance, squash_skew, MetricReport, SkewParams,
};
pub use moments::{
    coskewness_tensor, moment_summary, sym_inv_sqrt, CoskewTensor, MomentOptions, MomentSummary,
};
pub use pca::{apply_reduction, fit_pca, PcaTransform};
pub use synthetic::{analytic_gaussian_fid, sample_gaussian};
