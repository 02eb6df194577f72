//! Numerical toolkit for suprema of locally stationary Gaussian random
//! fields: exact covariance kernels, exact path sampling, Monte Carlo
//! estimation of Pickands-type constants, closed-form supremum tail
//! asymptotics and a validation harness comparing the two.

pub mod asymptotics;
pub mod cli;
pub mod covariance;
pub mod error;
pub mod fieldspec;
pub mod grid;
pub mod montecarlo;
pub mod pickands;
pub mod profile;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod special;

pub use error::{Error, Result};
pub use fieldspec::{FieldSpec, VarianceScale};
pub use profile::AlphaProfile;
