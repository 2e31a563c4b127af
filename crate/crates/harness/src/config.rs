//! Plain `key = value` config files for mixture specs and majority-vote
//! tasks, plus the compact sampler syntax used on the command line.
//!
//! ```text
//! # two-answer task
//! vocab_size = 1000
//! noise_mu = 0
//! noise_sigma = 1
//! informative_offsets = 0, 0.405
//! target_max = 10
//! seed = 3
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use topnsigma::theory::GaussianParams;
use topnsigma::{MixtureSpec, Sampler, SamplerKind};

use crate::error::{HarnessError, Result};
use crate::majvote::MajVoteTask;

const MIXTURE_KEYS: &[&str] = &[
    "vocab_size",
    "noise_mu",
    "noise_sigma",
    "informative_offsets",
    "target_max",
    "seed",
];
const TASK_KEYS: &[&str] = &[
    "num_answers",
    "answer_map",
    "noise_answer",
    "correct_answer",
    "samples",
    "queries",
    "temperatures",
];

/// Parsed `key = value` pairs, remembering the line each came from.
#[derive(Debug, Clone)]
pub struct KeyValues {
    source_name: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
                source_name: source_name.to_owned(),
                row: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_owned();
            if entries.insert(key.clone(), (line_no, value.trim().to_owned())).is_some() {
                return Err(HarnessError::Parse {
                    source_name: source_name.to_owned(),
                    row: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            source_name: source_name.to_owned(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(&name, e))?;
        Self::parse(&text, &name)
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((key, (line, _))) => Err(self.error_at(*line, format!("unknown key `{key}`"))),
            None => Ok(()),
        }
    }

    fn error_at(&self, row: usize, message: String) -> HarnessError {
        HarnessError::Parse {
            source_name: self.source_name.clone(),
            row,
            message,
        }
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|(line, value)| {
                value
                    .parse()
                    .map_err(|e| self.error_at(*line, format!("`{key}`: {e}")))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.optional(key)?.ok_or_else(|| HarnessError::ParseHeader {
            source_name: self.source_name.clone(),
            message: format!("missing key `{key}`"),
        })
    }

    fn required_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let (line, value) = self.raw(key).ok_or_else(|| HarnessError::ParseHeader {
            source_name: self.source_name.clone(),
            message: format!("missing key `{key}`"),
        })?;
        parse_list(value).map_err(|e| self.error_at(*line, format!("`{key}`: {e}")))
    }

    pub fn mixture_spec(&self) -> Result<MixtureSpec> {
        let spec = MixtureSpec {
            vocab_size: self.required("vocab_size")?,
            noise: GaussianParams::new(self.required("noise_mu")?, self.required("noise_sigma")?)?,
            informative_offsets: self.required_list("informative_offsets")?,
            target_max: self.required("target_max")?,
            seed: self.optional("seed")?.unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn majvote_task(&self) -> Result<MajVoteTask> {
        let answer_map = match self.raw("answer_map") {
            Some((line, value)) => {
                parse_answer_map(value).map_err(|e| self.error_at(*line, format!("`answer_map`: {e}")))?
            }
            None => {
                return Err(HarnessError::ParseHeader {
                    source_name: self.source_name.clone(),
                    message: "missing key `answer_map`".into(),
                })
            }
        };
        let task = MajVoteTask {
            num_answers: self.required("num_answers")?,
            answer_map,
            noise_answer: self.optional("noise_answer")?,
            correct_answer: self.required("correct_answer")?,
            logit_spec: self.mixture_spec()?,
            samples: self.required("samples")?,
            queries: self.required("queries")?,
            temperatures: self.required_list("temperatures")?,
        };
        task.validate()?;
        Ok(task)
    }
}

pub fn read_mixture_spec(path: &Path) -> Result<MixtureSpec> {
    let kv = KeyValues::read(path)?;
    kv.reject_unknown(MIXTURE_KEYS)?;
    kv.mixture_spec()
}

pub fn read_majvote_task(path: &Path) -> Result<MajVoteTask> {
    let kv = KeyValues::read(path)?;
    let allowed: Vec<&str> = MIXTURE_KEYS.iter().chain(TASK_KEYS).copied().collect();
    kv.reject_unknown(&allowed)?;
    kv.majvote_task()
}

/// Comma-separated list, e.g. `1, 1.5, 2`.
pub fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

/// `token:label` pairs, e.g. `0:1, 1:0`.
fn parse_answer_map(text: &str) -> std::result::Result<BTreeMap<usize, usize>, String> {
    let mut map = BTreeMap::new();
    for pair in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (tok, label) = pair
            .split_once(':')
            .ok_or_else(|| format!("expected `token:label`, got `{pair}`"))?;
        let tok: usize = tok.trim().parse().map_err(|e| format!("`{tok}`: {e}"))?;
        let label: usize = label.trim().parse().map_err(|e| format!("`{label}`: {e}"))?;
        if map.insert(tok, label).is_some() {
            return Err(format!("token {tok} mapped twice"));
        }
    }
    Ok(map)
}

/// Builds a sampler from a name and the flag values that apply to it.
pub fn build_sampler(
    name: &str,
    temperature: f64,
    n: Option<f64>,
    p: Option<f64>,
    k: Option<usize>,
) -> Result<Sampler> {
    let missing = |flag: &str| HarnessError::InvalidParameter(format!("sampler `{name}` needs {flag}"));
    let kind = match name {
        "greedy" => SamplerKind::Greedy,
        "temperature" => SamplerKind::Temperature,
        "top_k" => SamplerKind::TopK {
            k: k.ok_or_else(|| missing("k"))?,
        },
        "top_p" => SamplerKind::TopP {
            p: p.ok_or_else(|| missing("p"))?,
        },
        "min_p" => SamplerKind::MinP {
            p: p.ok_or_else(|| missing("p"))?,
        },
        "top_n_sigma" => SamplerKind::TopNSigma { n: n.unwrap_or(1.0) },
        other => return Err(HarnessError::InvalidParameter(format!("unknown sampler `{other}`"))),
    };
    Ok(Sampler::new(kind, temperature)?)
}

/// Parses one sampler in list syntax: `name` or `name:key=value`, with keys
/// `n`, `p` and `k` (e.g. `top_n_sigma:n=1`, `top_p:p=0.9`, `greedy`).
pub fn parse_sampler(item: &str) -> Result<Sampler> {
    let bad = |msg: String| HarnessError::InvalidParameter(format!("sampler `{item}`: {msg}"));
    let (name, params) = item.split_once(':').unwrap_or((item, ""));
    let (mut n, mut p, mut k) = (None, None, None);
    for assignment in params.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got `{assignment}`")))?;
        let value = value.trim();
        match key.trim() {
            "n" => n = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
            "p" => p = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
            "k" => k = Some(value.parse().map_err(|e| bad(format!("{e}")))?),
            other => return Err(bad(format!("unknown parameter `{other}`"))),
        }
    }
    build_sampler(name.trim(), 1.0, n, p, k)
}

/// Short, parseable label for a sampler, e.g. `top_p:p=0.9`.
pub fn sampler_label(spec: &Sampler) -> String {
    match spec.kind() {
        SamplerKind::Greedy | SamplerKind::Temperature => spec.kind().name().to_owned(),
        SamplerKind::TopK { k } => format!("top_k:k={k}"),
        SamplerKind::TopP { p } => format!("top_p:p={p}"),
        SamplerKind::MinP { p } => format!("min_p:p={p}"),
        SamplerKind::TopNSigma { n } => format!("top_n_sigma:n={n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIXTURE: &str = "\
# noise plus two informative tokens
vocab_size = 100
noise_mu = 0
noise_sigma = 1
informative_offsets = 0, 0.5
target_max = 10   # well above the noise
seed = 9
";

    #[test]
    fn mixture_round_trip() {
        let kv = KeyValues::parse(MIXTURE, "m").unwrap();
        kv.reject_unknown(MIXTURE_KEYS).unwrap();
        let spec = kv.mixture_spec().unwrap();
        assert_eq!(spec.vocab_size, 100);
        assert_eq!(spec.informative_offsets, vec![0.0, 0.5]);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.noise.sigma, 1.0);
    }

    #[test]
    fn errors_name_the_line() {
        match KeyValues::parse("a = 1\nnonsense\n", "m") {
            Err(HarnessError::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        let kv = KeyValues::parse("vocab_size = ten\n", "m").unwrap();
        assert!(matches!(kv.mixture_spec(), Err(HarnessError::Parse { row: 0, .. })));
        let kv = KeyValues::parse("bogus = 1\n", "m").unwrap();
        assert!(matches!(kv.reject_unknown(MIXTURE_KEYS), Err(HarnessError::Parse { row: 0, .. })));
        let kv = KeyValues::parse("vocab_size = 10\n", "m").unwrap();
        assert!(matches!(kv.mixture_spec(), Err(HarnessError::ParseHeader { .. })));
    }

    #[test]
    fn invalid_spec_is_a_parameter_error() {
        let text = MIXTURE.replace("target_max = 10", "target_max = -1");
        let err = KeyValues::parse(&text, "m").unwrap().mixture_spec().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn task_parses() {
        let text = format!(
            "{MIXTURE}num_answers = 2\nanswer_map = 0:1, 1:0\nnoise_answer = 0\ncorrect_answer = 1\n\
             samples = 20\nqueries = 50\ntemperatures = 1, 3\n"
        );
        let task = KeyValues::parse(&text, "t").unwrap().majvote_task().unwrap();
        assert_eq!(task.answer_map.get(&0), Some(&1));
        assert_eq!(task.noise_answer, Some(0));
        assert_eq!(task.temperatures, vec![1.0, 3.0]);
    }

    #[test]
    fn sampler_syntax() {
        let s = parse_sampler("top_n_sigma:n=1.5").unwrap();
        assert_eq!(s.kind(), SamplerKind::TopNSigma { n: 1.5 });
        assert_eq!(parse_sampler("top_k:k=20").unwrap().kind(), SamplerKind::TopK { k: 20 });
        assert_eq!(parse_sampler("greedy").unwrap().kind(), SamplerKind::Greedy);
        for label in ["top_p:p=0.9", "min_p:p=0.1", "top_n_sigma:n=1", "temperature"] {
            assert_eq!(sampler_label(&parse_sampler(label).unwrap()), label);
        }
        assert_eq!(parse_sampler("top_n_sigma:n=5").unwrap_err().exit_code(), 2);
        assert_eq!(parse_sampler("top_p").unwrap_err().exit_code(), 2);
        assert_eq!(parse_sampler("beam").unwrap_err().exit_code(), 2);
    }
}
