//! Two-sample test of equality in distribution for samples of symmetric
//! positive (semi)definite matrices.
//!
//! The statistic integrates the squared difference of the two empirical
//! Laplace transforms against a noncentral Wishart weight measure; the
//! integral has a closed form through the measure's own Laplace transform,
//! so the statistic is a finite sum of transform evaluations.

mod accum;
pub mod bootstrap;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod laplace;
pub mod rng;
pub mod samplers;
pub mod spd;
pub mod statistic;

pub use error::{Error, Result};
pub use laplace::{empirical_laplace, ncw_laplace, LaplaceKernel, NcwParams};
pub use rng::RngStream;
pub use samplers::{ScenarioKind, ScenarioSpec};
pub use spd::{Definiteness, Matrix, SpdMatrix, ToleranceSet};
pub use statistic::{kernel_psi, statistic_fast, statistic_reference, MatrixSample, StatisticValue};
