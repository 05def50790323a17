//! Blind multi-source transmit-power estimation from the eigenvalues of a
//! received sample covariance matrix.
//!
//! The crate is organized around the pipeline of the estimation problem:
//!
//! - [`types`]: power profiles, system dimensions and noise levels.
//! - [`spectra`]: the deterministic limiting spectrum (fixed-point solver,
//!   density curves, support boundaries, separability certificates).
//! - [`secular`]: eigenvalues of rank-one-modified diagonal matrices, the
//!   root sets the main estimator consumes.
//! - [`model`]: synthetic received-signal generation with reproducible
//!   per-matrix random streams.
//! - [`estimators`]: the Stieltjes-transform power estimator and the
//!   classical and moment baselines.
//! - [`inference`]: joint estimation of the number of sources, their antenna
//!   counts and their powers.
//! - [`harness`]: experiment configurations, Monte Carlo runners and CSV
//!   output.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod model;
pub mod secular;
pub mod spectra;
pub mod types;

pub use error::{Error, Result};
pub use estimators::{estimate_classical, estimate_moment, estimate_stieltjes, EstimateSet, Method};
pub use inference::{enumerate_hypotheses, infer_joint, score_hypothesis, ClusterHypothesis};
pub use model::{draw, scenario_a, scenario_b, Constellation, SampleDraw, ScenarioSpec};
pub use secular::EigenSample;
pub use spectra::{
    check_assumption1, check_assumption2, critical_c, critical_c0, default_y_offset,
    lsd_density, separability_report, solve_m_f, support_g, DensityCurve, GSupport,
    SeparabilityReport, StieltjesPoint,
};
pub use types::{NoiseLevel, PowerProfile, SystemShape};
