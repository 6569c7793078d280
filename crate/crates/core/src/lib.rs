//! Seed-deterministic simulators for the latency/reliability trade-offs of
//! ultra-reliable low-latency wireless access.
//!
//! Modules, roughly bottom-up:
//!
//! - [`fbl`]: finite-blocklength coding rates (normal approximation).
//! - [`reliability`]: latency CDFs with drop mass and success-probability products.
//! - [`frame`]: separate vs. joint downlink frame layouts.
//! - [`simo`]: coherent MRC vs. energy detection with a many-antenna receiver.
//! - [`access`]: grant-based, grant-free and coordinated uplink access with MPR/SIC.
//! - [`minislot`]: preemptive mini-slot scheduling of urgent downlink traffic.
//! - [`diversity`]: packet duplication over multiple interfaces.
//! - [`topology`]: base-station densification and cooperation on Poisson layouts.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod access;
pub mod diversity;
pub mod error;
pub mod fbl;
pub mod frame;
pub mod minislot;
pub mod reliability;
pub mod seed;
pub mod simo;
pub mod special;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use fbl::{CodeSpec, LinkSnr};
pub use reliability::{Latency, LatencyCdf, ProtocolChain, StageModel};
