//! Thermal-photon dephasing of a qubit dispersively coupled to a cavity.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the device formulas,
//! a dense Lindblad engine, closed-form dephasing rates, and simulated
//! T1/Ramsey experiments with their curve fits. File formats and the
//! command-line front end live in the `cqed` crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]

extern crate alloc;

pub mod constants;
pub mod dephasing;
pub mod device;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod noise;
pub mod series;

pub use error::{Error, FitFailure, Result};
pub use series::{SeriesMetadata, TimeSeries};
