//! Scalar abstraction.
//!
//! Everything in this crate that touches logits is generic over [`Real`],
//! which is implemented for `f32` and `f64`. Inference engines usually hand
//! out `f32` logits; the theory and Monte Carlo code is normally run at `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable for logits: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Error function.
    fn erf(self) -> Self;
    /// Complementary error function, `1 - erf(x)` without cancellation.
    fn erfc(self) -> Self;

    /// Converts an `f64` literal, saturating to infinity on overflow.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

/// Neumaier-compensated sum. Vocabulary-sized reductions in `f32` lose
/// several digits with a naive loop.
pub fn compensated_sum<F: Real>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut carry = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry = carry + ((sum - t) + v);
        } else {
            carry = carry + ((v - t) + sum);
        }
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive_f32() {
        let values = std::iter::once(1.0e8_f32).chain(std::iter::repeat(1.0).take(10_000));
        assert_eq!(compensated_sum(values), 100_010_000.0);
    }

    #[test]
    fn erf_dispatch_matches_precision() {
        assert!((Real::erf(1.0_f64) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((Real::erf(1.0_f32) - 0.842_700_8).abs() < 1e-6);
    }
}
