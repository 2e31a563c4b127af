//! Majority voting over N samples (Maj@N) on synthetic answer tasks.
//!
//! Each query gets its own logit vector from the task's mixture (query `q`
//! uses seed `spec.seed + q`). Per temperature, N tokens are drawn, mapped to
//! answer labels and the most frequent label wins. Ties go to the lowest
//! label. Tokens with no label (and no `noise_answer`) abstain; a query where
//! every draw abstains counts as wrong.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use topnsigma::{sample, synth, Logits, MixtureSpec, RngState, Sampler};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MajVoteTask {
    pub num_answers: usize,
    /// Token id → answer label in `0..num_answers`.
    pub answer_map: BTreeMap<usize, usize>,
    /// Label for tokens missing from `answer_map`; `None` means they abstain.
    pub noise_answer: Option<usize>,
    pub correct_answer: usize,
    pub logit_spec: MixtureSpec,
    /// Samples per query (the N of Maj@N).
    pub samples: usize,
    pub queries: usize,
    pub temperatures: Vec<f64>,
}

impl MajVoteTask {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidParameter(m));
        self.logit_spec.validate()?;
        if self.num_answers == 0 {
            return bad("num_answers must be at least 1".into());
        }
        if self.correct_answer >= self.num_answers {
            return bad(format!("correct_answer {} is not a valid label", self.correct_answer));
        }
        if !self.answer_map.values().any(|l| *l == self.correct_answer) {
            return bad("correct_answer is not produced by any token in answer_map".into());
        }
        if let Some((tok, label)) = self.answer_map.iter().find(|(_, l)| **l >= self.num_answers) {
            return bad(format!("token {tok} maps to out-of-range label {label}"));
        }
        if let Some(tok) = self.answer_map.keys().find(|t| **t >= self.logit_spec.vocab_size) {
            return bad(format!("answer_map token {tok} is outside the vocabulary"));
        }
        if self.noise_answer.is_some_and(|l| l >= self.num_answers) {
            return bad("noise_answer is not a valid label".into());
        }
        if self.samples == 0 || self.queries == 0 {
            return bad("samples and queries must be at least 1".into());
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("temperatures must be a non-empty list of positive numbers".into());
        }
        Ok(())
    }

    pub fn answer_for(&self, token: usize) -> Option<usize> {
        self.answer_map.get(&token).copied().or(self.noise_answer)
    }

    fn query_vector(&self, query: usize) -> Result<Logits> {
        let spec = MixtureSpec {
            seed: self.logit_spec.seed.wrapping_add(query as u64),
            ..self.logit_spec.clone()
        };
        Ok(synth::generate(&spec)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajVoteResult {
    pub sampler: String,
    pub temperature: f64,
    pub samples: usize,
    pub queries: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Accuracy of the first sample alone (Maj@1) on the same draws.
    pub first_sample_correct: usize,
    pub first_sample_accuracy: f64,
}

/// Winning label for a vote tally; ties go to the lowest label, and an empty
/// tally (all abstentions) has no winner.
pub fn majority(votes: &[usize]) -> Option<usize> {
    let best = *votes.iter().max()?;
    (best > 0).then(|| votes.iter().position(|v| *v == best).expect("max is present"))
}

pub fn majvote(task: &MajVoteTask, sampler: &Sampler, seed: u64) -> Result<Vec<MajVoteResult>> {
    task.validate()?;
    let specs = task
        .temperatures
        .iter()
        .map(|t| sampler.with_temperature(*t))
        .collect::<topnsigma::Result<Vec<_>>>()?;

    // outcomes[q][t] = (majority correct, first sample correct)
    let outcomes = (0..task.queries)
        .into_par_iter()
        .map(|q| -> Result<Vec<(bool, bool)>> {
            let logits = task.query_vector(q)?;
            let mut rng = RngState::for_stream(seed, q as u64);
            specs
                .iter()
                .map(|spec| {
                    let mut votes = vec![0usize; task.num_answers];
                    let mut first = None;
                    for i in 0..task.samples {
                        let answer = task.answer_for(sample(&logits, spec, &mut rng)?);
                        if i == 0 {
                            first = answer;
                        }
                        if let Some(label) = answer {
                            votes[label] += 1;
                        }
                    }
                    Ok((
                        majority(&votes) == Some(task.correct_answer),
                        first == Some(task.correct_answer),
                    ))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(task
        .temperatures
        .iter()
        .enumerate()
        .map(|(t, temperature)| {
            let correct = outcomes.iter().filter(|o| o[t].0).count();
            let first = outcomes.iter().filter(|o| o[t].1).count();
            let q = task.queries as f64;
            MajVoteResult {
                sampler: crate::config::sampler_label(sampler),
                temperature: *temperature,
                samples: task.samples,
                queries: task.queries,
                correct,
                accuracy: correct as f64 / q,
                first_sample_correct: first,
                first_sample_accuracy: first as f64 / q,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use topnsigma::theory::GaussianParams;

    fn task(samples: usize) -> MajVoteTask {
        MajVoteTask {
            num_answers: 2,
            answer_map: [(0, 1), (1, 0)].into_iter().collect(),
            noise_answer: Some(0),
            correct_answer: 1,
            logit_spec: MixtureSpec {
                vocab_size: 200,
                noise: GaussianParams::new(0.0, 1.0).unwrap(),
                informative_offsets: vec![0.0, 1.5f64.ln()],
                target_max: 10.0,
                seed: 0,
            },
            samples,
            queries: 300,
            temperatures: vec![1.0],
        }
    }

    #[test]
    fn tie_goes_to_lowest_label() {
        assert_eq!(majority(&[2, 3, 3]), Some(1));
        assert_eq!(majority(&[4, 0]), Some(0));
        assert_eq!(majority(&[0, 0]), None);
    }

    #[test]
    fn single_sample_majority_equals_first_sample() {
        let r = majvote(&task(1), &Sampler::top_n_sigma(1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(r[0].correct, r[0].first_sample_correct);
    }

    #[test]
    fn reproducible() {
        let s = Sampler::temperature(1.0).unwrap();
        assert_eq!(majvote(&task(5), &s, 8).unwrap(), majvote(&task(5), &s, 8).unwrap());
    }

    #[test]
    fn validation() {
        let mut t = task(3);
        t.correct_answer = 5;
        assert_eq!(t.validate().unwrap_err().exit_code(), 2);
        let mut t = task(3);
        t.answer_map = [(0, 0)].into_iter().collect();
        assert!(t.validate().is_err());
        let mut t = task(0);
        t.samples = 0;
        assert!(t.validate().is_err());
    }
}
