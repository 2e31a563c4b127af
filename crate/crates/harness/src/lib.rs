//! Experiment harness for top-nσ sampling: logit dump I/O, per-step
//! diagnostics, sampler sweeps, majority-vote experiments on synthetic answer
//! tasks, and an end-to-end verification of the closed-form theory.
//!
//! The `topnsigma` binary wraps these modules; see the README for the CLI.

pub mod analyze;
pub mod config;
pub mod dump;
pub mod error;
pub mod majvote;
pub mod output;
pub mod sweep;
pub mod verify;

pub use error::{HarnessError, Result};
