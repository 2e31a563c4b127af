//! Seeded generator for the two-region logit model: a Gaussian bulk of noise
//! tokens plus a handful of informative tokens sitting well above it.
//!
//! Layout: the informative tokens come first, at indices `0..offsets.len()`,
//! with values `target_max - offset_j`; index 0 is therefore the argmax. The
//! remaining `vocab_size - offsets.len()` tokens are i.i.d. noise draws,
//! resampled until they fall strictly below the lowest informative logit so
//! the informative tokens always rank first.

use crate::error::{Error, Result};
use crate::logits::{compute_stats, LogitVector};
use crate::real::Real;
use crate::rng::RngState;
use crate::theory::{GaussianParams, UniformParams};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub vocab_size: usize,
    pub noise: GaussianParams<f64>,
    /// Gaps below `target_max`; the first is 0 and the list is nondecreasing.
    pub informative_offsets: Vec<f64>,
    pub target_max: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let offsets = &self.informative_offsets;
        if offsets.first() != Some(&0.0) {
            return Err(Error::param("informative_offsets must start with 0"));
        }
        if offsets.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return Err(Error::param("informative_offsets must be finite and nonnegative"));
        }
        if offsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("informative_offsets must be nondecreasing"));
        }
        if self.vocab_size <= offsets.len() {
            return Err(Error::param(format!(
                "vocab_size {} must exceed the {} informative tokens",
                self.vocab_size,
                offsets.len()
            )));
        }
        if !self.target_max.is_finite() || self.target_max <= self.noise.mu {
            return Err(Error::param("target_max must lie above the noise mean"));
        }
        // Noise is rejection-sampled below the lowest informative logit; that
        // floor has to clear the noise mean or the rejection loop stalls.
        if self.informative_floor() <= self.noise.mu {
            return Err(Error::param(
                "lowest informative logit (target_max - largest offset) must lie above the noise mean",
            ));
        }
        Ok(())
    }

    pub fn informative_count(&self) -> usize {
        self.informative_offsets.len()
    }

    /// Nominal σ-distance of the spec, measured against the noise parameters.
    pub fn nominal_sigma_distance(&self) -> f64 {
        (self.target_max - self.noise.mu) / self.noise.sigma
    }

    fn informative_floor(&self) -> f64 {
        self.target_max - self.informative_offsets.last().copied().unwrap_or(0.0)
    }

    /// Whether `token` belongs to the informative region under the index layout.
    pub fn is_informative(&self, token: usize) -> bool {
        token < self.informative_count()
    }
}

fn fill(spec: &MixtureSpec, top: f64, offset_scale: f64, rng: &mut RngState) -> Vec<f64> {
    let mut values = Vec::with_capacity(spec.vocab_size);
    values.extend(spec.informative_offsets.iter().map(|o| top - o * offset_scale));
    let floor = *values.last().expect("at least one informative token");
    values.extend(noise_below(spec, floor, rng));
    values
}

fn noise_below(spec: &MixtureSpec, floor: f64, rng: &mut RngState) -> Vec<f64> {
    let GaussianParams { mu, sigma } = spec.noise;
    let count = spec.vocab_size - spec.informative_count();
    let mut noise = Vec::with_capacity(count);
    while noise.len() < count {
        let x = mu + sigma * rng.standard_normal();
        if x < floor {
            noise.push(x);
        }
    }
    noise
}

fn to_vector<F: Real>(values: Vec<f64>) -> Result<LogitVector<F>> {
    LogitVector::new(values.into_iter().map(F::lit).collect())
}

/// One vector from the mixture; deterministic in `spec.seed`.
pub fn generate<F: Real>(spec: &MixtureSpec) -> Result<LogitVector<F>> {
    spec.validate()?;
    let mut rng = RngState::from_seed(spec.seed);
    to_vector(fill(spec, spec.target_max, 1.0, &mut rng))
}

/// One vector per step whose realized σ-distance tracks `schedule`.
///
/// The informative offsets are read at the spec's nominal σ-distance and
/// stretched in proportion to the scheduled one: a more confident step pushes
/// the runner-up tokens further below the max as well as lifting the max off
/// the noise. Each step draws its noise once (below the floor implied by the
/// nominal placement), then bisects on the position of the informative block
/// until the measured σ-distance matches. The block never drops to the noise,
/// so a step can land short of its target; more than 0.5 short is an error.
pub fn generate_sequence<F: Real>(
    spec: &MixtureSpec,
    steps: usize,
    schedule: &[f64],
) -> Result<Vec<LogitVector<F>>> {
    spec.validate()?;
    if steps == 0 {
        return Err(Error::param("steps must be at least 1"));
    }
    if schedule.len() != steps {
        return Err(Error::param(format!(
            "schedule has {} entries for {steps} steps",
            schedule.len()
        )));
    }
    if let Some(s) = schedule.iter().find(|s| !(s.is_finite() && **s >= 1.0)) {
        return Err(Error::param(format!("scheduled σ-distance {s} is below 1")));
    }
    let nominal = spec.nominal_sigma_distance();
    schedule
        .iter()
        .enumerate()
        .map(|(step, &target)| {
            let mut rng = RngState::for_stream(spec.seed, step as u64 + 1);
            let values = track_sigma_distance(spec, target, target / nominal, &mut rng)?;
            let realized = compute_stats(&LogitVector::new(values.clone())?)?.sigma_distance;
            if (realized - target).abs() > 0.5 {
                return Err(Error::Numeric(format!(
                    "step {step}: σ-distance {target} is out of reach, got {realized:.3}"
                )));
            }
            to_vector(values)
        })
        .collect()
}

/// Count, mean and sum of squared deviations of one group of values.
#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let count = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / count;
        let m2 = values.map(|v| (v - mean) * (v - mean)).sum();
        Self { count, mean, m2 }
    }

    /// Pooled moments of two disjoint groups.
    fn merge(self, other: Self) -> Self {
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }
}

fn track_sigma_distance(spec: &MixtureSpec, target: f64, scale: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    let GaussianParams { mu, sigma } = spec.noise;
    let offsets: Vec<f64> = spec.informative_offsets.iter().map(|o| o * scale).collect();
    let spread = *offsets.last().expect("at least one informative token");
    let noise = noise_below(spec, mu + target * sigma - spread, rng);
    let noise_moments = Moments::of(noise.iter().copied());
    let noise_max = noise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let informative_moments = Moments::of(offsets.iter().map(|o| -o));

    // Placing the block's max at `top` shifts the informative moments by `top`.
    let sigma_distance = |top: f64| {
        let pooled = noise_moments.merge(Moments {
            mean: informative_moments.mean + top,
            ..informative_moments
        });
        let std = (pooled.m2 / pooled.count).sqrt();
        (top - pooled.mean) / std
    };

    // As the block rises the σ-distance approaches, but never reaches,
    // √(noise count / informative count).
    let ceiling = (noise_moments.count / informative_moments.count).sqrt();
    if target >= ceiling {
        return Err(Error::Numeric(format!(
            "σ-distance {target} is unreachable: {} informative tokens among {} cap it below {ceiling:.3}",
            offsets.len(),
            spec.vocab_size
        )));
    }

    // Lowest placement that keeps every informative token above the noise.
    let lowest = noise_max + spread;
    let lowest = lowest + lowest.abs().max(1.0) * 1e-12;
    let mut lo = lowest;
    let mut hi = lowest.max(mu + target * sigma) + sigma;
    if sigma_distance(lo) < target {
        while sigma_distance(hi).is_nan() || sigma_distance(hi) < target {
            if !hi.is_finite() {
                return Err(Error::Numeric(format!("σ-distance {target} is unreachable")));
            }
            lo = hi;
            hi = mu + 2.0 * (hi - mu);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sigma_distance(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        hi = lo;
    }
    let top = hi;

    let mut values = Vec::with_capacity(spec.vocab_size);
    values.extend(offsets.iter().map(|o| top - o));
    values.extend(noise);
    Ok(values)
}

/// `count` i.i.d. draws from `N(mu, sigma²)`.
pub fn gaussian_logits<F: Real>(count: usize, params: GaussianParams<f64>, rng: &mut RngState) -> Vec<F> {
    (0..count)
        .map(|_| F::lit(params.mu + params.sigma * rng.standard_normal()))
        .collect()
}

/// `count` i.i.d. draws from `U(upper - width, upper]`; the uniform-region
/// counterpart of the offset layout, used by the Monte Carlo checks.
pub fn uniform_logits<F: Real>(count: usize, params: UniformParams<f64>, rng: &mut RngState) -> Vec<F> {
    (0..count)
        .map(|_| F::lit(params.upper - params.width * rng.uniform()))
        .collect()
}
