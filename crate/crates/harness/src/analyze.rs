//! Per-step diagnostics over a sequence of logit vectors.

use serde::{Deserialize, Serialize};
use topnsigma::samplers::mask_top_p;
use topnsigma::{compute_stats, mask_top_nsigma, softmax_stable, temperature_scale, Logits};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub sigma_distance: f64,
    pub nucleus_size_topnsigma: usize,
    /// Softmax mass (at the analysis temperature) of the top-nσ nucleus.
    pub nucleus_mass_topnsigma: f64,
    pub nucleus_size_topp: usize,
    pub chosen_token: Option<usize>,
}

/// A row that could not be analyzed; the remaining rows still are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalyzeReport {
    pub records: Vec<TraceRecord>,
    pub failures: Vec<RowFailure>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeParams {
    pub n: f64,
    pub p: f64,
    pub temperature: f64,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        Self {
            n: 1.0,
            p: 0.9,
            temperature: 1.0,
        }
    }
}

fn analyze_row(step: usize, logits: &Logits, chosen: Option<usize>, params: AnalyzeParams) -> Result<TraceRecord> {
    let stats = compute_stats(logits)?;
    let mask = mask_top_nsigma(logits, params.temperature, params.n)?;
    let probs = softmax_stable(&temperature_scale(logits, params.temperature)?)?;
    let mass: f64 = mask.indices().map(|i| probs.probs()[i]).sum();
    let topp = mask_top_p(logits, params.temperature, params.p)?;
    Ok(TraceRecord {
        step,
        sigma_distance: stats.sigma_distance,
        nucleus_size_topnsigma: mask.size(),
        nucleus_mass_topnsigma: mass.min(1.0),
        nucleus_size_topp: topp.size(),
        chosen_token: chosen,
    })
}

/// Analyzes every row. `chosen` carries the emitted token per row when known
/// and may be shorter than `vectors`. Parameter errors abort; degenerate rows
/// are reported in `failures` and skipped.
pub fn analyze(vectors: &[Logits], chosen: &[Option<usize>], params: AnalyzeParams) -> Result<AnalyzeReport> {
    // Validate parameters once so a bad flag is not reported as N row failures.
    let probe = Logits::new(vec![0.0, 1.0])?;
    mask_top_nsigma(&probe, params.temperature, params.n)?;
    mask_top_p(&probe, params.temperature, params.p)?;

    let mut report = AnalyzeReport::default();
    for (step, logits) in vectors.iter().enumerate() {
        let token = chosen.get(step).copied().flatten();
        match analyze_row(step, logits, token, params) {
            Ok(record) => report.records.push(record),
            Err(e) => report.failures.push(RowFailure {
                step,
                message: e.to_string(),
            }),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use topnsigma::stats::spearman;
    use topnsigma::synth::generate_sequence;
    use topnsigma::theory::GaussianParams;
    use topnsigma::MixtureSpec;

    #[test]
    fn spike_vector_has_unit_nucleus() {
        let mut v = vec![0.0; 1000];
        v[0] = 10.0;
        let report = analyze(&[Logits::new(v).unwrap()], &[], AnalyzeParams::default()).unwrap();
        assert_eq!(report.records[0].nucleus_size_topnsigma, 1);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn constant_vector_keeps_everything() {
        let report = analyze(&[Logits::new(vec![2.0; 8]).unwrap()], &[Some(3)], AnalyzeParams::default()).unwrap();
        let r = &report.records[0];
        assert_eq!(r.sigma_distance, 0.0);
        assert_eq!(r.nucleus_size_topnsigma, 8);
        assert!((r.nucleus_mass_topnsigma - 1.0).abs() < 1e-12);
        assert_eq!(r.chosen_token, Some(3));
    }

    #[test]
    fn degenerate_rows_do_not_stop_the_run() {
        let rows = vec![
            Logits::new(vec![1.0, 0.0]).unwrap(),
            Logits::new(vec![f64::NEG_INFINITY, 1.0]).unwrap(),
            Logits::new(vec![0.0, 3.0, 1.0]).unwrap(),
        ];
        let report = analyze(&rows, &[], AnalyzeParams::default()).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].step, 1);
        assert_eq!(report.records[1].step, 2);
    }

    #[test]
    fn bad_parameters_abort() {
        let rows = vec![Logits::new(vec![1.0, 0.0]).unwrap()];
        let params = AnalyzeParams {
            n: 4.0,
            ..AnalyzeParams::default()
        };
        assert_eq!(analyze(&rows, &[], params).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sweep_shows_inverse_relation() {
        let spec = MixtureSpec {
            vocab_size: 20_000,
            noise: GaussianParams::new(0.0, 1.0).unwrap(),
            informative_offsets: (0..30).map(|i| 0.2 * i as f64).collect(),
            target_max: 10.0,
            seed: 5,
        };
        let schedule: Vec<f64> = (0..100).map(|i| 5.0 + 15.0 * i as f64 / 99.0).collect();
        let rows: Vec<Logits> = generate_sequence(&spec, 100, &schedule).unwrap();
        let report = analyze(&rows, &[], AnalyzeParams::default()).unwrap();
        let sd: Vec<f64> = report.records.iter().map(|r| r.sigma_distance).collect();
        let size: Vec<f64> = report.records.iter().map(|r| r.nucleus_size_topnsigma as f64).collect();
        assert!(spearman(&sd, &size).unwrap() <= -0.8);
    }
}
