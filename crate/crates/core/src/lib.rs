//! Trends and coexisting cycles from a single time series via transfer-operator eigenfunctions.
//!
//! The pipeline is: delay-embed the observations ([`embed`]), build a variable-bandwidth
//! kernel Markov matrix that pushes functions `s` steps forward ([`operator`]), take its
//! leading eigenpairs with dual vectors, and turn those into periods, trend series and
//! projections ([`spectral`]). [`models`] generates synthetic nonautonomous test systems and
//! [`data`] reads real records.

// `!(x > y)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod embed;
pub mod error;
pub mod models;
pub mod operator;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};
pub use series::TimeSeries;
