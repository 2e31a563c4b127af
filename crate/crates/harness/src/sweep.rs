//! Sampler × temperature × seed grids.
//!
//! Every cell runs on its own RNG stream derived from the base seed and the
//! cell's position in the grid, so results do not depend on thread count or
//! scheduling. A failing cell records its error and the rest of the grid
//! still runs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use topnsigma::{sample, synth, Logits, MixtureSpec, RngState, Sampler};

use crate::config::sampler_label;
use crate::error::{HarnessError, Result};

/// Where the sweep's logit vectors come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    Vectors(Vec<Logits>),
    /// `count` vectors from the mixture, vector `i` seeded with `spec.seed + i`.
    /// Ground truth is known, so informative-hit fractions are reported.
    Synthetic { spec: MixtureSpec, count: usize },
}

impl SweepSource {
    fn materialize(&self) -> Result<(Vec<Logits>, Option<&MixtureSpec>)> {
        match self {
            SweepSource::Vectors(v) => Ok((v.clone(), None)),
            SweepSource::Synthetic { spec, count } => {
                let vectors = (0..*count as u64)
                    .map(|i| {
                        let spec = MixtureSpec {
                            seed: spec.seed.wrapping_add(i),
                            ..spec.clone()
                        };
                        synth::generate(&spec)
                    })
                    .collect::<topnsigma::Result<Vec<_>>>()?;
                Ok((vectors, Some(spec)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub samplers: Vec<Sampler>,
    pub temperatures: Vec<f64>,
    /// Number of independent seeds per (sampler, temperature).
    pub seeds: usize,
    /// Draws per vector per cell.
    pub draws: usize,
    pub base_seed: u64,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::InvalidParameter(m.into()));
        if self.samplers.is_empty() {
            return bad("sweep needs at least one sampler");
        }
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("temperatures must be a non-empty list of positive numbers");
        }
        if self.seeds == 0 || self.draws == 0 {
            return bad("seeds and draws must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub sampler: String,
    pub temperature: f64,
    pub seed_index: usize,
    pub vectors: usize,
    pub draws: usize,
    pub mean_nucleus_size: Option<f64>,
    /// Synthetic mode only: draws that landed on an informative token.
    pub informative_hits: Option<u64>,
    pub hit_fraction: Option<f64>,
    /// Synthetic mode only: exact informative mass of the sampling
    /// distribution, averaged over vectors.
    pub expected_hit_fraction: Option<f64>,
    /// First draw per vector, `;`-separated.
    pub tokens: String,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn token_list(&self) -> Vec<usize> {
        self.tokens.split(';').filter(|s| !s.is_empty()).filter_map(|s| s.parse().ok()).collect()
    }
}

struct CellOutcome {
    nucleus_total: usize,
    hits: u64,
    expected: f64,
    tokens: Vec<usize>,
}

fn run_cell(
    vectors: &[Logits],
    truth: Option<&MixtureSpec>,
    spec: &Sampler,
    draws: usize,
    rng: &mut RngState,
) -> Result<CellOutcome> {
    let mut out = CellOutcome {
        nucleus_total: 0,
        hits: 0,
        expected: 0.0,
        tokens: Vec::with_capacity(vectors.len()),
    };
    for logits in vectors {
        out.nucleus_total += spec.mask(logits)?.size();
        if let Some(truth) = truth {
            let dist = spec.distribution(logits)?;
            out.expected += dist.probs()[..truth.informative_count()].iter().sum::<f64>();
        }
        for d in 0..draws {
            let token = sample(logits, spec, rng)?;
            if d == 0 {
                out.tokens.push(token);
            }
            if truth.is_some_and(|t| t.is_informative(token)) {
                out.hits += 1;
            }
        }
    }
    Ok(out)
}

pub fn sweep(source: &SweepSource, config: &SweepConfig) -> Result<Vec<SweepCell>> {
    config.validate()?;
    let (vectors, truth) = source.materialize()?;
    if vectors.is_empty() {
        return Err(HarnessError::InvalidParameter("sweep needs at least one vector".into()));
    }
    let grid: Vec<(usize, &Sampler, f64, usize)> = config
        .samplers
        .iter()
        .flat_map(|s| config.temperatures.iter().map(move |t| (s, *t)))
        .flat_map(|(s, t)| (0..config.seeds).map(move |i| (s, t, i)))
        .enumerate()
        .map(|(cell, (s, t, i))| (cell, s, t, i))
        .collect();

    let cells = grid
        .into_par_iter()
        .map(|(cell, sampler, temperature, seed_index)| {
            let mut result = SweepCell {
                sampler: sampler_label(sampler),
                temperature,
                seed_index,
                vectors: vectors.len(),
                draws: config.draws,
                mean_nucleus_size: None,
                informative_hits: None,
                hit_fraction: None,
                expected_hit_fraction: None,
                tokens: String::new(),
                error: None,
            };
            let mut rng = RngState::for_stream(config.base_seed, cell as u64);
            let outcome = sampler
                .with_temperature(temperature)
                .map_err(HarnessError::from)
                .and_then(|spec| run_cell(&vectors, truth, &spec, config.draws, &mut rng));
            match outcome {
                Ok(o) => {
                    let n = vectors.len() as f64;
                    result.mean_nucleus_size = Some(o.nucleus_total as f64 / n);
                    if truth.is_some() {
                        result.informative_hits = Some(o.hits);
                        result.hit_fraction = Some(o.hits as f64 / (n * config.draws as f64));
                        result.expected_hit_fraction = Some(o.expected / n);
                    }
                    result.tokens = o.tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";");
                }
                Err(e) => result.error = Some(e.to_string()),
            }
            result
        })
        .collect();
    Ok(cells)
}

/// Per (sampler, temperature) aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sampler: String,
    pub temperature: f64,
    pub cells: usize,
    pub failed_cells: usize,
    pub mean_nucleus_size: Option<f64>,
    pub hit_fraction: Option<f64>,
}

pub fn summarize(cells: &[SweepCell]) -> Vec<SweepSummary> {
    // Keyed by first appearance so the summary follows the grid order.
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&SweepCell>> = BTreeMap::new();
    for cell in cells {
        let key = (cell.sampler.clone(), cell.temperature.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(cell);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let ok: Vec<&&SweepCell> = group.iter().filter(|c| c.error.is_none()).collect();
            let mean = |f: &dyn Fn(&SweepCell) -> Option<f64>| -> Option<f64> {
                let vals: Option<Vec<f64>> = ok.iter().map(|c| f(c)).collect();
                vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
            };
            SweepSummary {
                sampler: key.0.clone(),
                temperature: f64::from_bits(key.1),
                cells: group.len(),
                failed_cells: group.len() - ok.len(),
                mean_nucleus_size: mean(&|c| c.mean_nucleus_size),
                hit_fraction: mean(&|c| c.hit_fraction),
            }
        })
        .collect()
}

pub fn write_cells_csv<W: Write>(writer: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for cell in cells {
        w.serialize(cell)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))
}

pub fn read_cells_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<SweepCell>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .enumerate()
        .map(|(row, r)| {
            r.map_err(|e| HarnessError::Parse {
                source_name: source_name.to_owned(),
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_cells_json<R: Read>(reader: R, source_name: &str) -> Result<Vec<SweepCell>> {
    serde_json::from_reader(reader).map_err(|e| HarnessError::ParseHeader {
        source_name: source_name.to_owned(),
        message: e.to_string(),
    })
}
