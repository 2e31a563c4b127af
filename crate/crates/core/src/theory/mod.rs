//! Closed-form logit thresholds and nucleus masses.
//!
//! When `V` logits are i.i.d. with density `f`, the softmax denominator is
//! `V·I(-∞)` asymptotically, where `I(t) = ∫_t^∞ eˣ f(x) dx`, and the mass of
//! the nucleus `{l ≥ t}` tends to `I(t) / I(-∞)`. Solving that ratio for `t`
//! gives the logit cutoff equivalent to a top-p threshold; solving it at
//! `t = M - nσ` gives the mass that top-nσ keeps.

mod special;

pub use special::{erf, erf_inv, erfc, normal_cdf};

use crate::error::{Error, Result};
use crate::logits::{softmax_stable, LogitVector};
use crate::real::{compensated_sum, Real};
use crate::samplers::max_sigma_multiplier;

/// Normal logit density `N(mu, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams<F> {
    pub mu: F,
    pub sigma: F,
}

impl<F: Real> GaussianParams<F> {
    pub fn new(mu: F, sigma: F) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::param(format!("gaussian mean must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > F::zero()) {
            return Err(Error::param(format!("gaussian sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }
}

/// Uniform logit density on `[upper - width, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformParams<F> {
    pub upper: F,
    pub width: F,
}

impl<F: Real> UniformParams<F> {
    pub fn new(upper: F, width: F) -> Result<Self> {
        if !upper.is_finite() {
            return Err(Error::param(format!("uniform upper bound must be finite, got {upper}")));
        }
        if !(width.is_finite() && width > F::zero()) {
            return Err(Error::param(format!("uniform width must be positive, got {width}")));
        }
        Ok(Self { upper, width })
    }

    pub fn lower(&self) -> F {
        self.upper - self.width
    }

    /// Standard deviation of the distribution, `width / √12`.
    pub fn std(&self) -> F {
        self.width / F::lit(12.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NucleusMassReport<F> {
    pub threshold: F,
    /// Softmax mass of the tokens at or above `threshold`.
    pub mass: F,
    pub nucleus_size: usize,
}

fn check_open_unit<F: Real>(p: F, what: &str) -> Result<()> {
    if p > F::zero() && p < F::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} needs p in (0, 1), got {p}")))
    }
}

/// Logit cutoff whose expected nucleus mass is `p` for Gaussian logits:
/// `t = μ + √2·σ·erf⁻¹(1 − 2p) + σ²`.
pub fn gaussian_threshold<F: Real>(params: GaussianParams<F>, p: F) -> Result<F> {
    check_open_unit(p, "gaussian_threshold")?;
    let GaussianParams { mu, sigma } = params;
    let z = erf_inv(F::one() - F::lit(2.0) * p)?;
    Ok(mu + F::SQRT_2() * sigma * z + sigma * sigma)
}

/// Logit cutoff whose expected nucleus mass is `p` for uniform logits:
/// `t = M + ln(1 − p·(1 − e^{−a}))`.
pub fn uniform_threshold<F: Real>(params: UniformParams<F>, p: F) -> Result<F> {
    check_open_unit(p, "uniform_threshold")?;
    let UniformParams { upper, width } = params;
    let arg = F::one() + p * (-width).exp_m1();
    if arg.is_nan() || arg <= F::zero() {
        return Err(Error::Numeric(format!(
            "uniform_threshold: log argument {arg} is not positive"
        )));
    }
    Ok(upper + arg.ln())
}

/// Logit-space form of the min-p rule: `M + ln p`.
pub fn minp_logit_threshold<F: Real>(max: F, p: F) -> Result<F> {
    if !(p > F::zero() && p <= F::one()) {
        return Err(Error::domain(format!("min-p threshold needs p in (0, 1], got {p}")));
    }
    Ok(max + p.ln())
}

/// Softmax mass and size of `{i : l_i ≥ t}`.
pub fn nucleus_mass_empirical<F: Real>(logits: &LogitVector<F>, threshold: F) -> NucleusMassReport<F> {
    let probs = softmax_stable(logits).expect("LogitVector always has a finite entry");
    let inside = || {
        logits
            .values()
            .iter()
            .zip(probs.probs())
            .filter(|(l, _)| **l >= threshold)
    };
    let mass = compensated_sum(inside().map(|(_, p)| *p));
    NucleusMassReport {
        threshold,
        mass: mass.max(F::zero()).min(F::one()),
        nucleus_size: inside().count(),
    }
}

/// `I(t) = ∫_t^∞ eˣ f(x) dx` for Gaussian `f`.
///
/// Completing the square, `x − (x−μ)²/(2σ²) = μ + σ²/2 − (x−μ−σ²)²/(2σ²)`, so
/// the integrand is `e^{μ+σ²/2}` times a normal density centred at `μ + σ²`,
/// giving `I(t) = e^{μ+σ²/2}·Φ((μ + σ² − t)/σ)`.
pub fn integral_i<F: Real>(params: GaussianParams<F>, threshold: F) -> F {
    let GaussianParams { mu, sigma } = params;
    let scale = (mu + sigma * sigma / F::lit(2.0)).exp();
    if threshold == F::neg_infinity() {
        return scale;
    }
    scale * normal_cdf((mu + sigma * sigma - threshold) / sigma)
}

/// `(1/V)·Σ_{l_i > t} e^{l_i}`, the finite-sample estimate of `I(t)`.
pub fn empirical_tail_integral<F: Real>(logits: &[F], threshold: F) -> F {
    let n = F::from_usize(logits.len()).expect("length fits the scalar type");
    compensated_sum(logits.iter().filter(|l| **l > threshold).map(|l| l.exp())) / n
}

/// Nucleus mass top-nσ keeps when the whole vector is `N(μ, σ²)` and the max
/// sits `sigma_distance` standard deviations above the mean:
/// `½·erfc((M − μ − nσ − σ²)/(√2σ))` with `M − μ = sigma_distance·σ`.
pub fn topnsigma_mass_gaussian<F: Real>(sigma: F, sigma_distance: F, n: F) -> Result<F> {
    topnsigma_mass_gaussian_gap(sigma, sigma_distance * sigma, n)
}

/// As [`topnsigma_mass_gaussian`], parameterised by the raw gap `M − μ`.
/// With the gap fixed, the mass vanishes as `σ → 0⁺`.
pub fn topnsigma_mass_gaussian_gap<F: Real>(sigma: F, gap: F, n: F) -> Result<F> {
    if !(sigma.is_finite() && sigma > F::zero()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let arg = (gap - n * sigma - sigma * sigma) / (F::SQRT_2() * sigma);
    Ok(F::lit(0.5) * erfc(arg))
}

fn check_uniform_n<F: Real>(sigma: F, n: F) -> Result<()> {
    if !(sigma.is_finite() && sigma > F::zero()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(n > F::zero() && n <= max_sigma_multiplier::<F>()) {
        return Err(Error::domain(format!("n must lie in (0, 2√3], got {n}")));
    }
    Ok(())
}

/// Lower bound on the top-nσ nucleus mass for a uniform informative region
/// whose width is at most `2√3·σ`: `(1 − e^{−nσ}) / (1 − e^{−2√3σ})`.
pub fn topnsigma_mass_uniform_bound<F: Real>(sigma: F, n: F) -> Result<F> {
    check_uniform_n(sigma, n)?;
    let widest = max_sigma_multiplier::<F>() * sigma;
    Ok((-n * sigma).exp_m1() / (-widest).exp_m1())
}

/// Exact top-nσ mass for uniform logits of the given width,
/// `(1 − e^{−nσ}) / (1 − e^{−a})`, saturating at 1 once `nσ ≥ a`.
pub fn topnsigma_mass_uniform_exact<F: Real>(sigma: F, n: F, width: F) -> Result<F> {
    check_uniform_n(sigma, n)?;
    let widest = max_sigma_multiplier::<F>() * sigma;
    if !(width > F::zero() && width <= widest * F::lit(1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "uniform width must lie in (0, 2√3·σ = {widest}], got {width}"
        )));
    }
    let mass = (-n * sigma).exp_m1() / (-width).exp_m1();
    Ok(mass.min(F::one()))
}
