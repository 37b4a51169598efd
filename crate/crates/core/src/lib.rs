#![cfg_attr(not(feature = "std"), no_std)]
//! Embeddings of dynamic multiplex social networks.
//!
//! The crate covers the full algorithmic path: a compressed multiplex graph,
//! a synthetic temporal population, layer-persistent random walks with
//! optional layer hub tokens, skip-gram training, alignment of yearly spaces
//! onto a base year, whitening and Fibonacci-grid equipartitioning,
//! permutation audits of sample composition, and downstream probes.
//!
//! Everything here is `no_std` + `alloc`. The default `std` feature adds
//! rayon-backed parallel variants whose outputs match the sequential ones.

extern crate alloc;

pub mod align;
pub mod audit;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod sgns;
pub mod stats;
pub mod synth;
pub mod walker;

#[cfg(feature = "std")]
pub mod parallel;

pub use error::{Error, Result};
