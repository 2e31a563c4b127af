//! Top-nσ truncation sampling on raw logits.
//!
//! Top-nσ keeps every token whose temperature-scaled logit lies within `n`
//! standard deviations of the maximum, then samples from the renormalized
//! survivors. Because max and std scale together, the kept set is the same
//! at every temperature. The crate also ships the usual baselines (greedy,
//! temperature, top-k, top-p, min-p), closed-form threshold and
//! nucleus-mass formulas for Gaussian and uniform logits, and a seeded
//! generator for a two-region (noise + informative) logit model.
//!
//! Everything operating on logits is generic over [`Real`] (`f32` or `f64`);
//! the aliases below name the common instantiations.
//!
//! ```
//! use topnsigma::{sample, Logits, RngState, Sampler};
//!
//! let logits = Logits::new(vec![10.0, 9.5, 0.0, 0.0, 0.0]).unwrap();
//! let spec = Sampler::top_n_sigma(1.0, 1.5).unwrap();
//! let mut rng = RngState::from_seed(42);
//! let token = sample(&logits, &spec, &mut rng).unwrap();
//! assert!(token < 2);
//! ```

pub mod error;
pub mod logits;
pub mod real;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use logits::{
    categorical_sample, compute_stats, softmax_stable, temperature_scale, LogitStats, LogitVector,
    NucleusMask, ProbVector,
};
pub use real::Real;
pub use rng::{RngState, TokenId};
pub use samplers::{
    mask_min_p, mask_top_k, mask_top_nsigma, mask_top_p, sample, SamplerKind, SamplerSpec,
};
pub use synth::MixtureSpec;

/// `f64` logits, the default for analysis and theory checks.
pub type Logits = LogitVector<f64>;
/// `f32` logits, as produced by most inference engines.
pub type Logits32 = LogitVector<f32>;
pub type Probs = ProbVector<f64>;
pub type Probs32 = ProbVector<f32>;
pub type Stats = LogitStats<f64>;
pub type Stats32 = LogitStats<f32>;
pub type Sampler = SamplerSpec<f64>;
pub type Sampler32 = SamplerSpec<f32>;
