//! Simulation and analysis toolkit for a monostatic backscatter link.
//!
//! The crate models the tag → cascaded Rician channel → reader chain at
//! baseband, implements slope-aware least-squares and LMMSE channel
//! estimators with zero-forcing equalization, carrier-offset and DC
//! correction, pilot/payload resource allocation, and the analytic BER
//! machinery (product-Rician envelope law, Meijer-G closed forms) together
//! with the numeric oracles used to validate them.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants are kept exactly as published.
#![allow(clippy::excessive_precision)]

pub mod analytic;
pub mod error;
pub mod fading;
pub mod frame;
pub mod harness;
pub mod impair;
pub mod metrics;
pub mod primitives;
pub mod quadrature;
pub mod rxchain;
pub mod special;
pub mod txchain;

pub use error::{Error, Result};
pub use primitives::{
    db_to_linear, derive_trial_rng, linear_to_db, ComplexValue, DbValue, Modulation, Seed, TrialRng,
};
