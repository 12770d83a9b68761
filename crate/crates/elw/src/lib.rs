//! Biased-sample empirical likelihood weighting (ELW).
//!
//! ELW serves the same purpose as inverse probability weighting for
//! unrepresentative, missing, or unequal-probability data, but replaces the
//! `1/pi` weights with maximum empirical-likelihood probability masses. The
//! weights are found by a single univariate bisection, always lie in `(0, 1]`,
//! sum to 1, and stay well defined even when selection probabilities hit
//! zero, so the estimator does not blow up where IPW does.
//!
//! The crate covers:
//!
//! * the EL weight solver ([`weights`]);
//! * point estimators of a mean or population total under missing data and
//!   survey designs, plus the stabilized, thresholded, and trimmed IPW
//!   competitors ([`estimators`]);
//! * variance estimators, Wald regions, and a subsample-resampling region
//!   ([`inference`]);
//! * logistic score fitting with the matching variance corrections
//!   ([`propensity`]);
//! * Poisson, pivotal, and probability-proportional-to-size samplers
//!   ([`designs`]);
//! * a reproducible Monte Carlo harness with RMSE/coverage metrics
//!   ([`simulation`]) and benchmark-table reproduction ([`tables`]).
//!
//! Start with the `examples/` directory: each file is a runnable tour of one
//! capability (`cargo run --example weights_basics`, etc.). The `elw` binary
//! exposes the same machinery as `estimate` / `simulate` / `reproduce`
//! subcommands.
//!
//! ```
//! use elw::sample::MissingDataSample;
//! use elw::estimators::elw_mean;
//!
//! let sample = MissingDataSample::from_scalar_observed(
//!     &[1.0, 2.0, 3.0],      // observed responses
//!     &[0.2, 0.5, 0.8],      // their selection probabilities
//!     6,                     // total number of units, observed or not
//! ).unwrap();
//! let estimate = elw_mean(&sample).unwrap();
//! assert!(estimate.theta_scalar() > 1.0 && estimate.theta_scalar() < 3.0);
//! ```

pub mod cli;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod propensity;
pub mod rng;
pub mod sample;
pub mod simulation;
pub mod tables;
pub mod weights;

pub use error::{ElwError, Result};
pub use estimators::{EstimatorKind, EstimatorReport};
pub use inference::{ConfidenceRegion, RegionKind};
pub use sample::{MissingDataSample, WrSample};
pub use weights::{elw_weights, ElwSolution};
