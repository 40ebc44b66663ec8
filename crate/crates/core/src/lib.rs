//! Numerical laboratory for truncation operators, far-field decay and the
//! vanishing-viscosity limit on expanding domains Ω_R = R·Ω₁.
//!
//! The modules follow the data flow of an experiment: exact reference flows
//! and Biot–Savart reconstruction feed the boundary cutoffs and truncation
//! operators, whose errors are measured by the norm and rate-fit layer. The
//! radial Navier–Stokes solver closes the loop in ν, and the harness wires
//! everything to configs, CSV output and verdicts.

pub mod biot_savart;
pub mod cutoff_geometry;
pub mod error;
pub mod field_core;
pub mod harness;
pub mod norms_rates;
pub mod ns_disk;
pub mod quadrature;
pub mod reference_flows;
pub mod truncation;

pub use error::{Error, Result};
