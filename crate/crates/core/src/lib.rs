//! Task mappers for continual learning: models that infer which task a
//! sample belongs to so a task-dependent classifier can select that task's
//! parameters without an oracle.
//!
//! Layout:
//! - [`features`]: task streams (permuted MNIST, feature files, synthetic).
//! - [`pspbd`]: the keyed, biased classifier and pipeline evaluation.
//! - [`mappers`]: every task mapper behind the [`mappers::TaskMapper`] trait.
//! - [`coreset`], [`cluster`], [`nn`]: shared numerical pieces.
//! - [`metrics`]: memory ledger, trade-off score, reports.
//! - [`harness`]: configuration and experiment orchestration.

pub mod blob;
pub mod cluster;
pub mod coreset;
pub mod error;
pub mod features;
pub mod harness;
pub mod mappers;
pub mod metrics;
pub mod nn;
pub mod pspbd;
pub mod seed;

pub use error::{Error, Result};
