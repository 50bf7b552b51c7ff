//! Effective reproduction number `R(n)` of SIR spreading in populations with
//! heterogeneous susceptibility and infectiousness: a deterministic density
//! engine, an exact stochastic simulator with an enumeration oracle, and
//! vaccine allocation built on top of them.

// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod gamma;
pub mod interventions;
pub mod profile;
pub mod report;
pub mod runner;
pub mod sampler;
pub mod sim;
