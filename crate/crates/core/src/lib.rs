// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod blaster;
pub mod channel;
pub mod config;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod heuristic;
pub mod linklayer;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};
