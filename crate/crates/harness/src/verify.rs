//! End-to-end checks of the sampler invariants and the closed-form theory.
//!
//! Each check derives its own RNG seed from the run seed and its position in
//! the list. Checks run in parallel and are collected in list order, and the
//! report carries no timings, so a fixed seed always gives a byte-identical
//! report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use topnsigma::samplers::{mask_top_k, max_sigma_multiplier};
use topnsigma::stats::spearman;
use topnsigma::synth::{gaussian_logits, generate_sequence, uniform_logits};
use topnsigma::theory::{
    empirical_tail_integral, erf, erf_inv, gaussian_threshold, integral_i, minp_logit_threshold,
    nucleus_mass_empirical, topnsigma_mass_gaussian, topnsigma_mass_uniform_bound,
    topnsigma_mass_uniform_exact, uniform_threshold, GaussianParams, UniformParams,
};
use topnsigma::{
    compute_stats, mask_min_p, mask_top_nsigma, mask_top_p, temperature_scale, Logits, MixtureSpec,
    NucleusMask, RngState,
};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Exact or closed-form; unaffected by the Monte Carlo tolerance override.
    Deterministic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value - expected| <= tolerance`
    Within,
    /// `value >= expected - tolerance`
    AtLeast,
    /// `value <= expected + tolerance`
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub comparison: Comparison,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    /// Distance to the failure boundary; negative means failed.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failed_names(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }

    /// `Err(Verification)` listing the failed checks, if any.
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(HarnessError::Verification(self.failed_names()))
        }
    }
}

struct Measurement {
    value: f64,
    expected: f64,
    tolerance: f64,
    comparison: Comparison,
}

fn within(value: f64, expected: f64, tolerance: f64) -> Measurement {
    Measurement {
        value,
        expected,
        tolerance,
        comparison: Comparison::Within,
    }
}

struct Check {
    name: String,
    kind: CheckKind,
    run: Box<dyn Fn(u64) -> Measurement + Send + Sync>,
}

fn check(name: impl Into<String>, kind: CheckKind, run: impl Fn(u64) -> Measurement + Send + Sync + 'static) -> Check {
    Check {
        name: name.into(),
        kind,
        run: Box::new(run),
    }
}

fn random_vector(rng: &mut RngState, max_len: u64) -> Logits {
    let len = 2 + (rng.next_u64() % (max_len - 1)) as usize;
    let spread = 0.1 + 10.0 * rng.uniform();
    Logits::new((0..len).map(|_| spread * rng.standard_normal()).collect()).expect("finite")
}

const INVARIANCE_TEMPERATURES: [f64; 7] = [0.01, 0.5, 1.0, 1.5, 2.0, 3.0, 10.0];

fn invariance_mismatches(seed: u64, mask: impl Fn(&Logits, f64) -> NucleusMask) -> f64 {
    let mut rng = RngState::from_seed(seed);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let l = random_vector(&mut rng, 3000);
        let base = mask(&l, 1.0);
        mismatches += INVARIANCE_TEMPERATURES.iter().filter(|t| mask(&l, **t) != base).count();
    }
    mismatches as f64
}

/// 1 when some two-region vector's mask differs between T = 1 and T = 3.
fn non_invariance_witness(seed: u64, mask: impl Fn(&Logits, f64) -> NucleusMask) -> f64 {
    let found = (0..200u64).any(|i| {
        let mut rng = RngState::for_stream(seed, i);
        let gap = 3.0 + 10.0 * rng.uniform();
        let mut v = vec![gap, gap - 0.5];
        v.extend((0..500).map(|_| rng.standard_normal()));
        let l = Logits::new(v).expect("finite");
        mask(&l, 1.0) != mask(&l, 3.0)
    });
    f64::from(u8::from(found))
}

fn checks() -> Vec<Check> {
    use CheckKind::{Deterministic, MonteCarlo};
    const V: usize = 200_000;
    let mut list = vec![
        check("temperature_invariance_top_n_sigma", Deterministic, |seed| {
            within(invariance_mismatches(seed, |l, t| mask_top_nsigma(l, t, 1.0).unwrap()), 0.0, 0.0)
        }),
        check("temperature_invariance_top_k", Deterministic, |seed| {
            within(
                invariance_mismatches(seed, |l, t| mask_top_k(&temperature_scale(l, t).unwrap(), 10).unwrap()),
                0.0,
                0.0,
            )
        }),
        check("top_p_not_temperature_invariant", Deterministic, |seed| {
            within(non_invariance_witness(seed, |l, t| mask_top_p(l, t, 0.9).unwrap()), 1.0, 0.0)
        }),
        check("min_p_not_temperature_invariant", Deterministic, |seed| {
            within(non_invariance_witness(seed, |l, t| mask_min_p(l, t, 0.1).unwrap()), 1.0, 0.0)
        }),
    ];

    for p in [0.1, 0.25, 0.5, 0.9] {
        list.push(check(format!("gaussian_threshold_round_trip_p{p}"), MonteCarlo, move |seed| {
            let params = GaussianParams::new(0.0, 1.0).unwrap();
            let l = Logits::new(gaussian_logits(V, params, &mut RngState::from_seed(seed))).unwrap();
            within(nucleus_mass_empirical(&l, gaussian_threshold(params, p).unwrap()).mass, p, 0.01)
        }));
    }
    for p in [0.1, 0.25, 0.5, 0.9] {
        list.push(check(format!("uniform_threshold_round_trip_p{p}"), MonteCarlo, move |seed| {
            let params = UniformParams::new(0.0, 4.0).unwrap();
            let l = Logits::new(uniform_logits(V, params, &mut RngState::from_seed(seed))).unwrap();
            within(nucleus_mass_empirical(&l, uniform_threshold(params, p).unwrap()).mass, p, 0.01)
        }));
    }

    list.push(check("uniform_bound_closed_form", Deterministic, |_| {
        within(topnsigma_mass_uniform_bound(1.9, 1.0).unwrap(), 0.85, 0.005)
    }));
    list.push(check("uniform_bound_monte_carlo", MonteCarlo, |seed| {
        // Smallest (empirical mass - bound) over random (σ, n, width) draws.
        let mut rng = RngState::from_seed(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let sigma = 0.2 + 3.0 * rng.uniform();
            let n = 0.05 + 3.4 * rng.uniform();
            let width = (0.3 + 0.7 * rng.uniform()) * max_sigma_multiplier::<f64>() * sigma;
            let params = UniformParams::new(0.0, width).unwrap();
            let l = Logits::new(uniform_logits(50_000, params, &mut rng)).unwrap();
            let mass = nucleus_mass_empirical(&l, -n * sigma).mass;
            worst = worst.min(mass - topnsigma_mass_uniform_bound(sigma, n).unwrap());
        }
        Measurement {
            value: worst,
            expected: 0.0,
            tolerance: 0.01,
            comparison: Comparison::AtLeast,
        }
    }));

    for p in [0.05, 0.1, 0.3] {
        list.push(check(format!("uniform_top_p_matches_min_p_p{p}"), Deterministic, move |_| {
            let params = UniformParams::new(0.0, 20.0).unwrap();
            let top = uniform_threshold(params, 1.0 - p).unwrap();
            within(top, minp_logit_threshold(0.0, p).unwrap(), 1e-3)
        }));
    }
    list.push(check("min_p_mask_equals_logit_threshold", Deterministic, |seed| {
        let mut rng = RngState::from_seed(seed);
        let mut mismatches = 0usize;
        for _ in 0..1000 {
            let l = random_vector(&mut rng, 500);
            let p = 0.001 + 0.998 * rng.uniform();
            let t = minp_logit_threshold(l.max(), p).unwrap();
            let m = mask_min_p(&l, 1.0, p).unwrap();
            mismatches += l.values().iter().enumerate().filter(|(i, x)| m.contains(*i) != (**x >= t)).count();
        }
        within(mismatches as f64, 0.0, 0.0)
    }));

    for t in [-1.0, 0.0, 1.0] {
        list.push(check(format!("tail_sum_converges_t{t}"), MonteCarlo, move |seed| {
            let params = GaussianParams::new(0.0, 1.0).unwrap();
            let mean = (0..10u64)
                .map(|i| {
                    let v: Vec<f64> = gaussian_logits(1_000_000, params, &mut RngState::for_stream(seed, i));
                    empirical_tail_integral(&v, t)
                })
                .sum::<f64>()
                / 10.0;
            let exact = integral_i(params, t);
            within(mean / exact, 1.0, 0.01)
        }));
    }

    list.push(check("nucleus_mass_ratio_gaussian", MonteCarlo, |seed| {
        let params = GaussianParams::new(1.0, 0.7).unwrap();
        let l = Logits::new(gaussian_logits(V, params, &mut RngState::from_seed(seed))).unwrap();
        let t = gaussian_threshold(params, 0.5).unwrap();
        let predicted = integral_i(params, t) / integral_i(params, f64::NEG_INFINITY);
        within(nucleus_mass_empirical(&l, t).mass / predicted, 1.0, 0.01)
    }));
    list.push(check("top_n_sigma_mass_gaussian", MonteCarlo, |seed| {
        let params = GaussianParams::new(0.0, 1.0).unwrap();
        let l = Logits::new(gaussian_logits(1_000_000, params, &mut RngState::from_seed(seed))).unwrap();
        within(
            nucleus_mass_empirical(&l, 2.0).mass,
            topnsigma_mass_gaussian(1.0, 3.0, 1.0).unwrap(),
            0.005,
        )
    }));
    list.push(check("top_n_sigma_mass_uniform", MonteCarlo, |seed| {
        let sigma = 1.9;
        let width = max_sigma_multiplier::<f64>() * sigma;
        let params = UniformParams::new(0.0, width).unwrap();
        let l = Logits::new(uniform_logits(1_000_000, params, &mut RngState::from_seed(seed))).unwrap();
        within(
            nucleus_mass_empirical(&l, -sigma).mass,
            topnsigma_mass_uniform_exact(sigma, 1.0, width).unwrap(),
            0.005,
        )
    }));
    list.push(check("erf_inv_round_trip", Deterministic, |_| {
        let worst = (-999..=999)
            .map(|i| {
                let y = i as f64 / 1000.0;
                (erf(erf_inv(y).unwrap()) - y).abs()
            })
            .fold(0.0, f64::max);
        within(worst, 0.0, 1e-14)
    }));
    list.push(check("sigma_distance_vs_nucleus_size_spearman", MonteCarlo, |seed| {
        let spec = MixtureSpec {
            vocab_size: 50_000,
            noise: GaussianParams::new(0.0, 1.0).unwrap(),
            informative_offsets: (0..30).map(|i| 0.2 * i as f64).collect(),
            target_max: 10.0,
            seed,
        };
        let schedule: Vec<f64> = (0..100).map(|i| 5.0 + 15.0 * i as f64 / 99.0).collect();
        let seq: Vec<Logits> = generate_sequence(&spec, 100, &schedule).unwrap();
        let sd: Vec<f64> = seq.iter().map(|l| compute_stats(l).unwrap().sigma_distance).collect();
        let size: Vec<f64> = seq.iter().map(|l| mask_top_nsigma(l, 1.0, 1.0).unwrap().size() as f64).collect();
        Measurement {
            value: spearman(&sd, &size).unwrap(),
            expected: -0.8,
            tolerance: 0.0,
            comparison: Comparison::AtMost,
        }
    }));
    list
}

fn evaluate(name: String, kind: CheckKind, m: Measurement, tolerance: f64) -> CheckResult {
    let margin = match m.comparison {
        Comparison::Within => tolerance - (m.value - m.expected).abs(),
        Comparison::AtLeast => m.value - (m.expected - tolerance),
        Comparison::AtMost => (m.expected + tolerance) - m.value,
    };
    CheckResult {
        name,
        kind,
        comparison: m.comparison,
        value: m.value,
        expected: m.expected,
        tolerance,
        margin,
        passed: margin >= 0.0,
    }
}

/// Runs every check. `mc_tolerance`, when given, replaces the tolerance of
/// all Monte Carlo checks (tightening it shows which checks are stochastic).
pub fn verify_theory(seed: u64, mc_tolerance: Option<f64>) -> Result<VerifyReport> {
    if mc_tolerance.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
        return Err(HarnessError::InvalidParameter(
            "Monte Carlo tolerance must be a finite nonnegative number".into(),
        ));
    }
    let checks: Vec<CheckResult> = checks()
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| {
            let m = (c.run)(RngState::for_stream(seed, i as u64).next_u64());
            let tolerance = match (c.kind, mc_tolerance) {
                (CheckKind::MonteCarlo, Some(t)) => t,
                _ => m.tolerance,
            };
            evaluate(c.name, c.kind, m, tolerance)
        })
        .collect();
    Ok(VerifyReport {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins() {
        let r = evaluate("a".into(), CheckKind::Deterministic, within(1.0, 1.2, 0.5), 0.5);
        assert!((r.margin - 0.3).abs() < 1e-12 && r.passed);
        let m = Measurement {
            value: -0.9,
            expected: -0.8,
            tolerance: 0.0,
            comparison: Comparison::AtMost,
        };
        assert!(evaluate("b".into(), CheckKind::MonteCarlo, m, 0.0).passed);
        let m = Measurement {
            value: -0.02,
            expected: 0.0,
            tolerance: 0.01,
            comparison: Comparison::AtLeast,
        };
        assert!(!evaluate("c".into(), CheckKind::MonteCarlo, m, 0.01).passed);
    }

    #[test]
    fn names_are_unique() {
        let names: Vec<String> = checks().into_iter().map(|c| c.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn rejects_negative_tolerance() {
        assert_eq!(verify_theory(1, Some(-1.0)).unwrap_err().exit_code(), 2);
    }
}
