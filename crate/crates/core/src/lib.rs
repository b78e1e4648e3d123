//! Permutation tests for predictive, zero-inflated biomarkers.
//!
//! A biomarker that is exactly zero for a large fraction of subjects can
//! carry treatment-effect information in two distinct places: a spike of
//! benefit among the zero subjects, and an ordering of benefit along the
//! positive tail. This crate tests both pieces separately with
//! permutation nulls, then combines the two p-values (Fisher, or Brown's
//! correlation-adjusted variant), alongside a plain average-KS comparator
//! and post-test diagnostics (effect curves, cut-point selection).
//!
//! Everything downstream of a seed is deterministic, including under
//! parallel execution.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod perm;
pub mod simgen;
pub mod theory;
pub mod twostep;

pub use error::{Error, Result};
pub use perm::SeedSpec;
pub use twostep::{two_step, TrialDataset, TwoStepResult};
