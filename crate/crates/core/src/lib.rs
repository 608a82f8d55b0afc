//! Incremental-margin triplet metric learning.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that is pure
//! computation: dense distance kernels, a small multi-level embedding network
//! with recursive feature shifts, staged triplet losses, batch construction
//! (random PK sampling, global hard identity searching, batch-hard mining),
//! Adam with a piecewise learning-rate schedule, the training loop, retrieval
//! metrics, and a synthetic identity-dataset generator.
//!
//! File formats and the command-line driver live in the `litm` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod mining;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod train;

pub use error::{Error, Result};
pub use numeric::{pairwise_distances, squared_euclidean, DistanceMatrix, RandomSource};
