//! Truncation samplers.
//!
//! Each sampler is split into a mask step, which picks the nucleus, and a
//! shared step that sets excluded logits to `-inf`, applies the temperature
//! once, renormalizes with softmax and draws a token. All comparisons are
//! inclusive, and when ranks tie the lower token index wins.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::logits::{
    categorical_sample, check_temperature, compute_stats, softmax_stable, temperature_scale,
    LogitVector, NucleusMask, ProbVector,
};
use crate::real::Real;
use crate::rng::{RngState, TokenId};

/// Hard upper bound on the top-nσ multiplier, `2√3`.
pub fn max_sigma_multiplier<F: Real>() -> F {
    F::lit(2.0) * F::lit(3.0).sqrt()
}

/// Below this multiplier top-nσ still works but usually degenerates to greedy.
pub const SOFT_MIN_SIGMA_MULTIPLIER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind<F> {
    Greedy,
    /// Plain temperature sampling over the full vocabulary.
    Temperature,
    TopK { k: usize },
    TopP { p: F },
    MinP { p: F },
    TopNSigma { n: F },
}

impl<F> SamplerKind<F> {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Greedy => "greedy",
            SamplerKind::Temperature => "temperature",
            SamplerKind::TopK { .. } => "top_k",
            SamplerKind::TopP { .. } => "top_p",
            SamplerKind::MinP { .. } => "min_p",
            SamplerKind::TopNSigma { .. } => "top_n_sigma",
        }
    }
}

/// A validated sampler configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerSpec<F> {
    kind: SamplerKind<F>,
    temperature: F,
}

impl<F: Real> SamplerSpec<F> {
    pub fn new(kind: SamplerKind<F>, temperature: F) -> Result<Self> {
        check_temperature(temperature)?;
        match kind {
            SamplerKind::TopK { k } => check_k(k)?,
            SamplerKind::TopP { p } | SamplerKind::MinP { p } => check_p(p)?,
            SamplerKind::TopNSigma { n } => check_n(n)?,
            SamplerKind::Greedy | SamplerKind::Temperature => {}
        }
        Ok(Self { kind, temperature })
    }

    pub fn greedy() -> Self {
        Self {
            kind: SamplerKind::Greedy,
            temperature: F::one(),
        }
    }

    pub fn temperature(temperature: F) -> Result<Self> {
        Self::new(SamplerKind::Temperature, temperature)
    }

    pub fn top_k(k: usize, temperature: F) -> Result<Self> {
        Self::new(SamplerKind::TopK { k }, temperature)
    }

    pub fn top_p(p: F, temperature: F) -> Result<Self> {
        Self::new(SamplerKind::TopP { p }, temperature)
    }

    pub fn min_p(p: F, temperature: F) -> Result<Self> {
        Self::new(SamplerKind::MinP { p }, temperature)
    }

    pub fn top_n_sigma(n: F, temperature: F) -> Result<Self> {
        Self::new(SamplerKind::TopNSigma { n }, temperature)
    }

    pub fn kind(&self) -> SamplerKind<F> {
        self.kind
    }

    pub fn temperature_value(&self) -> F {
        self.temperature
    }

    /// Same sampler at a different temperature.
    pub fn with_temperature(&self, temperature: F) -> Result<Self> {
        Self::new(self.kind, temperature)
    }

    /// Non-fatal configuration concerns.
    pub fn warnings(&self) -> Vec<String> {
        match self.kind {
            SamplerKind::TopNSigma { n } if n < F::lit(SOFT_MIN_SIGMA_MULTIPLIER) => vec![format!(
                "top_n_sigma n={n} is below {SOFT_MIN_SIGMA_MULTIPLIER}; the nucleus will rarely hold more than the argmax"
            )],
            _ => Vec::new(),
        }
    }

    /// The nucleus this sampler would draw from.
    pub fn mask(&self, logits: &LogitVector<F>) -> Result<NucleusMask> {
        let t = self.temperature;
        match self.kind {
            SamplerKind::Greedy => {
                let best = logits.argmax();
                Ok(NucleusMask::from_fn(logits.len(), |i| i == best))
            }
            SamplerKind::Temperature => {
                Ok(NucleusMask::from_fn(logits.len(), |i| logits.values()[i].is_finite()))
            }
            SamplerKind::TopK { k } => mask_top_k(logits, k),
            SamplerKind::TopP { p } => mask_top_p(logits, t, p),
            SamplerKind::MinP { p } => mask_min_p(logits, t, p),
            SamplerKind::TopNSigma { n } => mask_top_nsigma(logits, t, n),
        }
    }

    /// Renormalized distribution over the nucleus, at this temperature.
    pub fn distribution(&self, logits: &LogitVector<F>) -> Result<ProbVector<F>> {
        let masked = self.mask(logits)?.apply(logits)?;
        softmax_stable(&temperature_scale(&masked, self.temperature)?)
    }
}

impl<F: Real> fmt::Display for SamplerSpec<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SamplerKind::Greedy => write!(f, "greedy"),
            SamplerKind::Temperature => write!(f, "temperature(T={})", self.temperature),
            SamplerKind::TopK { k } => write!(f, "top_k(k={k}, T={})", self.temperature),
            SamplerKind::TopP { p } => write!(f, "top_p(p={p}, T={})", self.temperature),
            SamplerKind::MinP { p } => write!(f, "min_p(p={p}, T={})", self.temperature),
            SamplerKind::TopNSigma { n } => write!(f, "top_n_sigma(n={n}, T={})", self.temperature),
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::param("top_k needs k >= 1"))
    } else {
        Ok(())
    }
}

fn check_p<F: Real>(p: F) -> Result<()> {
    if p > F::zero() && p <= F::one() {
        Ok(())
    } else {
        Err(Error::param(format!("p must lie in (0, 1], got {p}")))
    }
}

fn check_n<F: Real>(n: F) -> Result<()> {
    if n > F::zero() && n < max_sigma_multiplier::<F>() {
        Ok(())
    } else {
        Err(Error::param(format!("top_n_sigma n must lie in (0, 2√3), got {n}")))
    }
}

/// Descending by value, then ascending by index.
fn rank_order<F: Real>(values: &[F]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |a, b| {
        values[*b]
            .partial_cmp(&values[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    }
}

/// Keeps tokens whose scaled logit is at least `max - n·std` of the scaled
/// vector. Scaling by a positive temperature moves the max and the std by the
/// same factor, so the mask does not depend on `temperature`.
pub fn mask_top_nsigma<F: Real>(logits: &LogitVector<F>, temperature: F, n: F) -> Result<NucleusMask> {
    check_n(n)?;
    let scaled = temperature_scale(logits, temperature)?;
    let stats = compute_stats(&scaled)?;
    let cutoff = stats.max - n * stats.std;
    let values = scaled.values();
    Ok(NucleusMask::from_fn(values.len(), |i| {
        values[i].is_finite() && values[i] >= cutoff
    }))
}

/// The `k` largest finite logits. When `k` exceeds the finite count, every
/// finite logit is kept.
pub fn mask_top_k<F: Real>(logits: &LogitVector<F>, k: usize) -> Result<NucleusMask> {
    check_k(k)?;
    let values = logits.values();
    let mut finite: Vec<usize> = (0..values.len()).filter(|i| values[*i].is_finite()).collect();
    if k < finite.len() {
        let order = rank_order(values);
        finite.select_nth_unstable_by(k - 1, &order);
        finite.truncate(k);
    }
    let mut included = vec![false; values.len()];
    for i in finite {
        included[i] = true;
    }
    Ok(NucleusMask::from_included(included))
}

/// Nucleus (top-p) sampling mask at the given temperature.
pub fn mask_top_p<F: Real>(logits: &LogitVector<F>, temperature: F, p: F) -> Result<NucleusMask> {
    check_p(p)?;
    let probs = softmax_stable(&temperature_scale(logits, temperature)?)?;
    mask_top_p_probs(&probs, p)
}

/// Smallest prefix of the probability-sorted tokens whose cumulative mass
/// reaches `p`, including the token that crosses it.
pub fn mask_top_p_probs<F: Real>(probs: &ProbVector<F>, p: F) -> Result<NucleusMask> {
    check_p(p)?;
    let q = probs.probs();
    let mut order: Vec<usize> = (0..q.len()).filter(|i| q[*i] > F::zero()).collect();
    order.sort_unstable_by(rank_order(q));
    let mut included = vec![false; q.len()];
    let mut cumulative = F::zero();
    for i in order {
        included[i] = true;
        cumulative = cumulative + q[i];
        if cumulative >= p {
            break;
        }
    }
    Ok(NucleusMask::from_included(included))
}

/// Min-p mask at the given temperature: keeps token `i` iff
/// `q_i >= p · max_j q_j` where `q` is the scaled softmax.
pub fn mask_min_p<F: Real>(logits: &LogitVector<F>, temperature: F, p: F) -> Result<NucleusMask> {
    check_p(p)?;
    let scaled = temperature_scale(logits, temperature)?;
    let max = scaled.max();
    // The softmax denominator is shared by q_i and max q, so compare the
    // unnormalized weights exp(l_i - max) (the largest is exactly 1) to p.
    let values = scaled.values();
    Ok(NucleusMask::from_fn(values.len(), |i| {
        values[i].is_finite() && (values[i] - max).exp() >= p
    }))
}

pub fn mask_min_p_probs<F: Real>(probs: &ProbVector<F>, p: F) -> Result<NucleusMask> {
    check_p(p)?;
    let q = probs.probs();
    let floor = q.iter().copied().fold(F::zero(), F::max) * p;
    Ok(NucleusMask::from_fn(q.len(), |i| q[i] > F::zero() && q[i] >= floor))
}

/// Draws one token. Greedy returns the argmax and leaves `rng` untouched.
pub fn sample<F: Real>(logits: &LogitVector<F>, spec: &SamplerSpec<F>, rng: &mut RngState) -> Result<TokenId> {
    if let SamplerKind::Greedy = spec.kind {
        return Ok(logits.argmax());
    }
    let probs = spec.distribution(logits)?;
    Ok(categorical_sample(&probs, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> LogitVector<f64> {
        LogitVector::new(v.to_vec()).unwrap()
    }

    fn pv(v: &[f64]) -> ProbVector<f64> {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn idx(m: &NucleusMask) -> Vec<usize> {
        m.indices().collect()
    }

    #[test]
    fn top_nsigma_spike_pair() {
        // mean 3.9, population std 4.7791 (hand-computed), cutoff 5.2209.
        let l = lv(&[10.0, 9.5, 0.0, 0.0, 0.0]);
        let stats = compute_stats(&l).unwrap();
        assert!((stats.std - 4.779_121_258_139_408).abs() < 1e-12);
        assert_eq!(idx(&mask_top_nsigma(&l, 1.0, 1.0).unwrap()), vec![0, 1]);
    }

    #[test]
    fn top_nsigma_constant_keeps_all() {
        let m = mask_top_nsigma(&lv(&[5.0, 5.0, 5.0]), 1.0, 1.0).unwrap();
        assert_eq!(m.size(), 3);
    }

    #[test]
    fn top_nsigma_rejects_bad_n() {
        let l = lv(&[1.0, 2.0]);
        for n in [0.0, -1.0, 3.5, 5.0, f64::NAN] {
            assert!(matches!(mask_top_nsigma(&l, 1.0, n), Err(Error::InvalidParameter(_))));
        }
        assert!(mask_top_nsigma(&l, 1.0, 3.46).is_ok());
    }

    #[test]
    fn top_nsigma_skips_masked() {
        let l = lv(&[3.0, f64::NEG_INFINITY, 2.9, 0.0]);
        let m = mask_top_nsigma(&l, 1.0, 1.0).unwrap();
        assert!(!m.contains(1));
        assert!(m.contains(0));
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(idx(&mask_top_k(&lv(&[3.0, 1.0, 2.0]), 2).unwrap()), vec![0, 2]);
        assert_eq!(idx(&mask_top_k(&lv(&[1.0, 1.0, 1.0]), 2).unwrap()), vec![0, 1]);
        assert_eq!(
            idx(&mask_top_k(&lv(&[5.0, f64::NEG_INFINITY, 4.0]), 5).unwrap()),
            vec![0, 2]
        );
        assert!(matches!(mask_top_k(&lv(&[1.0]), 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn top_k_tie_break_inside_selection() {
        let l = lv(&[0.0, 2.0, 1.0, 2.0, 1.0, 1.0]);
        assert_eq!(idx(&mask_top_k(&l, 3).unwrap()), vec![1, 2, 3]);
    }

    #[test]
    fn top_p_examples() {
        assert_eq!(idx(&mask_top_p_probs(&pv(&[0.5, 0.3, 0.2]), 0.7).unwrap()), vec![0, 1]);
        assert_eq!(idx(&mask_top_p_probs(&pv(&[0.6, 0.4]), 0.6).unwrap()), vec![0]);
        let full = mask_top_p_probs(&pv(&[0.2, 0.0, 0.5, 0.3]), 1.0).unwrap();
        assert_eq!(idx(&full), vec![0, 2, 3]);
        for p in [0.0, 1.5, -0.1] {
            assert!(matches!(
                mask_top_p(&lv(&[1.0, 2.0]), 1.0, p),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn top_p_full_mass_from_logits() {
        let l = lv(&[0.0, -1.0, f64::NEG_INFINITY, 2.0]);
        assert_eq!(idx(&mask_top_p(&l, 1.0, 1.0).unwrap()), vec![0, 1, 3]);
    }

    #[test]
    fn min_p_examples() {
        assert_eq!(mask_min_p_probs(&pv(&[0.8, 0.1, 0.1]), 0.1).unwrap().size(), 3);
        assert_eq!(idx(&mask_min_p_probs(&pv(&[0.8, 0.07, 0.13]), 0.1).unwrap()), vec![0, 2]);
        assert!(matches!(
            mask_min_p(&lv(&[1.0, 2.0]), 1.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn min_p_logit_form() {
        // ln 0.5 ≈ -0.693: 1.0 - 2.0 = -1 is out, 1.5 - 2.0 = -0.5 is in.
        let m = mask_min_p(&lv(&[2.0, 1.0, 1.5]), 1.0, 0.5).unwrap();
        assert_eq!(idx(&m), vec![0, 2]);
    }

    #[test]
    fn greedy_returns_argmax() {
        let spec = SamplerSpec::greedy();
        let mut rng = RngState::from_seed(0);
        assert_eq!(sample(&lv(&[1.0, 3.0, 2.0]), &spec, &mut rng).unwrap(), 1);
        assert_eq!(rng, RngState::from_seed(0));
    }

    #[test]
    fn top_k_one_is_greedy() {
        let l = lv(&[0.3, 2.0, 1.9, -1.0]);
        for t in [0.1, 1.0, 5.0] {
            let spec = SamplerSpec::top_k(1, t).unwrap();
            let mut rng = RngState::from_seed(11);
            for _ in 0..200 {
                assert_eq!(sample(&l, &spec, &mut rng).unwrap(), 1);
            }
        }
    }

    #[test]
    fn top_nsigma_samples_two_point_softmax() {
        let l = lv(&[10.0, 9.5, 0.0, 0.0, 0.0]);
        let spec = SamplerSpec::top_n_sigma(1.0, 1.0).unwrap();
        let mut rng = RngState::from_seed(77);
        let draws = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[sample(&l, &spec, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[2..], [0, 0, 0]);
        // softmax([10, 9.5])[0] = 1 / (1 + e^{-0.5})
        let p0 = 0.622_459_331_201_854_6;
        let band = 4.0 * (p0 * (1.0 - p0) / draws as f64).sqrt();
        let freq = counts[0] as f64 / draws as f64;
        assert!((freq - p0).abs() <= band, "{freq} vs {p0} ± {band}");
    }

    #[test]
    fn spec_validation() {
        assert!(SamplerSpec::top_n_sigma(5.0, 1.0).is_err());
        assert!(SamplerSpec::top_n_sigma(1.0, 0.0).is_err());
        assert!(SamplerSpec::top_k(0, 1.0).is_err());
        assert!(SamplerSpec::min_p(0.0, 1.0).is_err());
        assert!(SamplerSpec::top_p(1.0, 1.0).is_ok());
        assert!(SamplerSpec::top_n_sigma(1.0, 1.0).unwrap().warnings().is_empty());
        assert_eq!(SamplerSpec::top_n_sigma(0.3, 1.0).unwrap().warnings().len(), 1);
    }

    #[test]
    fn with_temperature_revalidates() {
        let s = SamplerSpec::top_p(0.9, 1.0).unwrap();
        assert_eq!(s.with_temperature(2.0).unwrap().temperature_value(), 2.0);
        assert!(s.with_temperature(-2.0).is_err());
    }

    #[test]
    fn works_in_f32() {
        let l = LogitVector::new(vec![10.0_f32, 9.5, 0.0, 0.0, 0.0]).unwrap();
        let m = mask_top_nsigma(&l, 1.5, 1.0).unwrap();
        assert_eq!(m.indices().collect::<Vec<_>>(), vec![0, 1]);
    }
}
