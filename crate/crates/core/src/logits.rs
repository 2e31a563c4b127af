//! Logit vectors and the numerically stable primitives every sampler shares.

use crate::error::{Error, Result};
use crate::real::{compensated_sum, Real};
use crate::rng::{RngState, TokenId};

/// Raw pre-softmax scores for one decoding step.
///
/// Entries may be `-inf` (a token masked out upstream) but never NaN or
/// `+inf`, and at least one entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector<F> {
    values: Vec<F>,
}

impl<F: Real> LogitVector<F> {
    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("logit vector must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::param(format!("logit {i} is NaN")));
        }
        if let Some(i) = values.iter().position(|v| *v == F::infinity()) {
            return Err(Error::param(format!("logit {i} is +inf")));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(Error::degenerate("every logit is -inf"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn finite_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    /// Largest finite logit.
    pub fn max(&self) -> F {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(F::neg_infinity(), F::max)
    }

    /// Index of the largest logit; ties go to the lowest index.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Converts to another scalar width (e.g. `f32` dump rows to `f64`).
    pub fn cast<G: Real>(&self) -> LogitVector<G> {
        LogitVector {
            values: self
                .values
                .iter()
                .map(|v| G::from(*v).unwrap_or_else(G::neg_infinity))
                .collect(),
        }
    }
}

impl<F: Real> TryFrom<Vec<F>> for LogitVector<F> {
    type Error = Error;

    fn try_from(values: Vec<F>) -> Result<Self> {
        Self::new(values)
    }
}

/// Softmax output. Masked (`-inf`) tokens carry exactly zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<F> {
    probs: Vec<F>,
}

impl<F: Real> ProbVector<F> {
    /// Validates a caller-built distribution: non-negative entries summing to
    /// one within `1e-9` (or a few ulps per entry for `f32`).
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("probability vector is empty"));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= F::zero())) {
            return Err(Error::param(format!("probability {i} is negative or not finite")));
        }
        let total = compensated_sum(probs.iter().copied()).as_f64();
        let tol = f64::max(1e-9, 4.0 * F::epsilon().as_f64() * probs.len() as f64);
        if (total - 1.0).abs() > tol {
            return Err(Error::param(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Summary statistics over the finite entries of a logit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitStats<F> {
    pub max: F,
    pub mean: F,
    /// Population standard deviation (divides by the count).
    pub std: F,
    /// `(max - mean) / std`, or zero when `std` is zero.
    pub sigma_distance: F,
}

/// Membership of each token in the sampling nucleus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NucleusMask {
    included: Vec<bool>,
    size: usize,
}

impl NucleusMask {
    pub fn from_included(included: Vec<bool>) -> Self {
        let size = included.iter().filter(|b| **b).count();
        Self { included, size }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> bool) -> Self {
        Self::from_included((0..len).map(f).collect())
    }

    pub fn included(&self) -> &[bool] {
        &self.included
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn contains(&self, token: TokenId) -> bool {
        self.included.get(token).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.included.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    /// Sets every excluded logit to `-inf`.
    pub fn apply<F: Real>(&self, logits: &LogitVector<F>) -> Result<LogitVector<F>> {
        if logits.len() != self.len() {
            return Err(Error::param(format!(
                "mask length {} does not match logit length {}",
                self.len(),
                logits.len()
            )));
        }
        let values = logits
            .values()
            .iter()
            .zip(&self.included)
            .map(|(v, keep)| if *keep { *v } else { F::neg_infinity() })
            .collect();
        LogitVector::new(values)
    }
}

pub(crate) fn check_temperature<F: Real>(temperature: F) -> Result<()> {
    if temperature.is_finite() && temperature > F::zero() {
        Ok(())
    } else {
        Err(Error::param(format!("temperature must be positive and finite, got {temperature}")))
    }
}

/// Divides every finite logit by `temperature`; `-inf` entries stay `-inf`.
pub fn temperature_scale<F: Real>(logits: &LogitVector<F>, temperature: F) -> Result<LogitVector<F>> {
    check_temperature(temperature)?;
    let values = logits
        .values()
        .iter()
        .map(|v| if v.is_finite() { *v / temperature } else { *v })
        .collect();
    LogitVector::new(values)
}

/// Softmax with max-subtraction, so logits of any finite magnitude are safe.
pub fn softmax_stable<F: Real>(logits: &LogitVector<F>) -> Result<ProbVector<F>> {
    let max = logits.max();
    if !max.is_finite() {
        return Err(Error::degenerate("softmax of an all -inf vector"));
    }
    let weights: Vec<F> = logits
        .values()
        .iter()
        .map(|v| if v.is_finite() { (*v - max).exp() } else { F::zero() })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    let probs = weights.into_iter().map(|w| w / total).collect();
    Ok(ProbVector { probs })
}

/// Max, mean, population std and σ-distance over the finite entries.
pub fn compute_stats<F: Real>(logits: &LogitVector<F>) -> Result<LogitStats<F>> {
    let finite = || logits.values().iter().copied().filter(|v| v.is_finite());
    let count = finite().count();
    if count < 2 {
        return Err(Error::degenerate(format!(
            "statistics need at least 2 finite logits, got {count}"
        )));
    }
    let n = F::from_usize(count).expect("count fits the scalar type");
    let max = finite().fold(F::neg_infinity(), F::max);
    let mean = compensated_sum(finite()) / n;
    let var = compensated_sum(finite().map(|v| (v - mean) * (v - mean))) / n;
    let std = var.sqrt();
    // Rounding in the mean can leave it a hair above the max for near-constant
    // vectors; clamp so `max >= mean` holds.
    let mean = mean.min(max);
    let sigma_distance = if std > F::zero() { (max - mean) / std } else { F::zero() };
    Ok(LogitStats {
        max,
        mean,
        std,
        sigma_distance,
    })
}

/// Inverse-CDF draw: one uniform variate per token.
///
/// The cumulative walk runs in `f64` whatever the scalar type, and
/// zero-probability tokens can never be returned.
pub fn categorical_sample<F: Real>(probs: &ProbVector<F>, rng: &mut RngState) -> TokenId {
    let p = probs.probs();
    let total: f64 = p.iter().map(|x| x.as_f64()).sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, x) in p.iter().enumerate() {
        let x = x.as_f64();
        if x <= 0.0 {
            continue;
        }
        acc += x;
        last_nonzero = i;
        if acc > target {
            return i;
        }
    }
    last_nonzero
}
