//! Transductive matrix completion with calibration (TMCC).
//!
//! Jointly recovers an incomplete feature matrix and a set of heterogeneous
//! exponential-family response matrices by minimizing a penalized
//! quasi-likelihood with a nuclear-norm term, optionally constrained by a
//! known linear calibration equation on the true features. The solver is an
//! accelerated proximal gradient loop with singular-value soft-thresholding
//! and adaptive restarts. The crate also ships the three reference baselines
//! (MC_0, CMC_SI, TS), a synthetic scenario generator, and the experiment
//! harness used by the CLI.

pub use ndarray;

pub mod data_model;
pub mod evaluation;
pub mod expfam;
pub mod linalg;
pub mod objective;
pub mod solvers;
pub mod synth;
