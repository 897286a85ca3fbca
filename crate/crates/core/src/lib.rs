//! Law-invariant risk measures on finite equal-weight samples, with tools to
//! probe their submodularity and subadditivity.
//!
//! * [`measures`]: VaR, ES, adjusted ES, distortion (Choquet) measures,
//!   expected loss, certainty equivalents, shortfall risk, OCE and monotone
//!   mean-deviation measures.
//! * [`lattice`]: submodularity / subadditivity gaps and seeded random-pair
//!   sweeps.
//! * [`theory`]: curvature and linear-dominance checks for shortfall losses,
//!   plus the constructive counterexamples.
//! * [`pipeline`]: price ingestion, rolling-window estimation, pairwise
//!   violation tests, correlation diagnostics and report export.
//! * [`selftest`]: the invariant suite run by `latticerisk selftest`.

pub mod error;
pub mod functions;
pub mod lattice;
pub mod measures;
pub mod pipeline;
pub mod sample;
pub mod selftest;
pub mod solve;
pub mod theory;

pub use error::{Result, RiskError};
pub use functions::{AdjustmentGrid, DeviationWeight, DistortionFunction, LossFunction};
pub use lattice::{
    random_pair_sweep, subadditivity_gap, submodularity_gap, violation_rate, GapResult, MeasureKind,
    PairGenerator, RiskMeasureSpec, SweepReport, DEFAULT_EPSILON,
};
pub use measures::{
    aes, certainty_equivalent, distortion_rho, es_historical, expected_loss, mmd_rho, oce,
    shortfall_rho, var_historical,
};
pub use sample::{pointwise_meet_join, EmpiricalSample};
