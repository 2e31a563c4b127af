use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use topnsigma::{sample, synth, Logits, Sampler};

use topnsigma_harness::analyze::{analyze, AnalyzeParams};
use topnsigma_harness::config::{build_sampler, parse_list, parse_sampler, read_majvote_task, read_mixture_spec};
use topnsigma_harness::dump::{read_dump, write_dump, DumpFormat};
use topnsigma_harness::majvote::majvote;
use topnsigma_harness::output::{open, write_rows, Format};
use topnsigma_harness::sweep::{summarize, sweep, SweepConfig, SweepSource};
use topnsigma_harness::verify::verify_theory;
use topnsigma_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "topnsigma", version, about = "Top-nσ sampling diagnostics, sweeps and theory checks")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format (verify-theory defaults to json, everything else to csv).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormatArg {
    Binary,
    Ndjson,
}

#[derive(Args)]
struct SamplerArgs {
    /// greedy, temperature, top_k, top_p, min_p or top_n_sigma.
    #[arg(long, default_value = "top_n_sigma")]
    sampler: String,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Top-nσ multiplier (default 1).
    #[arg(long)]
    n: Option<f64>,
    /// Top-p / min-p parameter.
    #[arg(long)]
    p: Option<f64>,
    /// Top-k size.
    #[arg(long)]
    k: Option<usize>,
}

impl SamplerArgs {
    fn build(&self) -> Result<Sampler> {
        let spec = build_sampler(&self.sampler, self.temperature, self.n, self.p, self.k)?;
        for w in spec.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-step σ-distance and nucleus sizes for a logit dump.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        n: f64,
        #[arg(long, default_value_t = 0.9)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
    },
    /// Draw tokens from each vector of a dump or of a synthetic spec.
    Sample {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        input: Option<PathBuf>,
        /// Mixture config; generates one vector.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Run a sampler × temperature × seed grid.
    Sweep {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        input: Option<PathBuf>,
        /// Mixture config for synthetic mode (reports informative-hit fractions).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of synthetic vectors.
        #[arg(long, default_value_t = 100)]
        vectors: usize,
        /// Comma-separated samplers, e.g. `top_n_sigma:n=1,top_p:p=0.9,top_k:k=20,temperature`.
        #[arg(long, default_value = "top_n_sigma:n=1,temperature")]
        samplers: String,
        #[arg(long, default_value = "1,1.5,2,3")]
        temperatures: String,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        draws: usize,
    },
    /// Majority-vote accuracy per temperature on a synthetic answer task.
    Majvote {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Check sampler invariants and closed-form formulas; exits 4 on failure.
    VerifyTheory {
        /// Replace the tolerance of every Monte Carlo check.
        #[arg(long)]
        mc_tolerance: Option<f64>,
    },
    /// Write a synthetic logit dump.
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        /// σ-distance per step: `start:end` (linear) or a comma list.
        #[arg(long)]
        schedule: Option<String>,
        /// Defaults to the output file's extension.
        #[arg(long, value_enum)]
        dump_format: Option<DumpFormatArg>,
    },
}

#[derive(Serialize)]
struct SampleRow {
    step: usize,
    draw: usize,
    token: usize,
}

fn format_or(cli: &Cli, default: Format) -> Format {
    match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => default,
    }
}

fn emit<T: Serialize>(cli: &Cli, rows: &[T], default: Format) -> Result<()> {
    write_rows(open(cli.out.as_deref())?, rows, format_or(cli, default))
}

fn parse_schedule(text: &str, steps: usize) -> Result<Vec<f64>> {
    let bad = |m: String| HarnessError::InvalidParameter(format!("--schedule: {m}"));
    if let Some((a, b)) = text.split_once(':') {
        let a: f64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let b: f64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let last = steps.saturating_sub(1).max(1) as f64;
        Ok((0..steps).map(|i| a + (b - a) * i as f64 / last).collect())
    } else {
        parse_list(text).map_err(bad)
    }
}

fn load_vectors(input: Option<&Path>, config: Option<&Path>) -> Result<Vec<Logits>> {
    match (input, config) {
        (Some(path), _) => Ok(read_dump(path)?.rows),
        (None, Some(path)) => Ok(vec![synth::generate(&read_mixture_spec(path)?)?]),
        (None, None) => Err(HarnessError::InvalidParameter("need --input or --config".into())),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Analyze {
            input,
            n,
            p,
            temperature,
        } => {
            let dump = read_dump(input)?;
            let params = AnalyzeParams {
                n: *n,
                p: *p,
                temperature: *temperature,
            };
            let report = analyze(&dump.rows, &dump.tokens, params)?;
            for f in &report.failures {
                eprintln!("warning: step {}: {}", f.step, f.message);
            }
            emit(cli, &report.records, Format::Csv)
        }
        Command::Sample {
            input,
            config,
            draws,
            sampler,
        } => {
            let spec = sampler.build()?;
            let vectors = load_vectors(input.as_deref(), config.as_deref())?;
            let mut rng = topnsigma::RngState::from_seed(seed);
            let mut rows = Vec::with_capacity(vectors.len() * draws);
            for (step, logits) in vectors.iter().enumerate() {
                for draw in 0..*draws {
                    rows.push(SampleRow {
                        step,
                        draw,
                        token: sample(logits, &spec, &mut rng)?,
                    });
                }
            }
            emit(cli, &rows, Format::Csv)
        }
        Command::Sweep {
            input,
            config,
            vectors,
            samplers,
            temperatures,
            seeds,
            draws,
        } => {
            let source = match (input, config) {
                (Some(path), _) => SweepSource::Vectors(read_dump(path)?.rows),
                (None, Some(path)) => SweepSource::Synthetic {
                    spec: read_mixture_spec(path)?,
                    count: *vectors,
                },
                (None, None) => return Err(HarnessError::InvalidParameter("need --input or --config".into())),
            };
            let samplers = samplers
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_sampler)
                .collect::<Result<Vec<_>>>()?;
            let temperatures = parse_list(temperatures)
                .map_err(|e| HarnessError::InvalidParameter(format!("--temperatures: {e}")))?;
            let cfg = SweepConfig {
                samplers,
                temperatures,
                seeds: *seeds,
                draws: *draws,
                base_seed: seed,
            };
            let cells = sweep(&source, &cfg)?;
            for s in summarize(&cells) {
                eprintln!(
                    "{} T={}: cells={} failed={} mean_nucleus={:?} hit_fraction={:?}",
                    s.sampler, s.temperature, s.cells, s.failed_cells, s.mean_nucleus_size, s.hit_fraction
                );
            }
            emit(cli, &cells, Format::Csv)
        }
        Command::Majvote { config, sampler } => {
            let task = read_majvote_task(config)?;
            let results = majvote(&task, &sampler.build()?, seed)?;
            emit(cli, &results, Format::Csv)
        }
        Command::VerifyTheory { mc_tolerance } => {
            let report = verify_theory(seed, *mc_tolerance)?;
            match format_or(cli, Format::Json) {
                Format::Json => {
                    let mut out = open(cli.out.as_deref())?;
                    serde_json::to_writer_pretty(&mut out, &report)?;
                    writeln!(out).and_then(|_| out.flush()).map_err(|e| HarnessError::io("<output>", e))?;
                }
                Format::Csv => emit(cli, &report.checks, Format::Csv)?,
            }
            report.into_result().map(|_| ())
        }
        Command::GenSynth {
            config,
            steps,
            schedule,
            dump_format,
        } => {
            let out = cli
                .out
                .as_deref()
                .ok_or_else(|| HarnessError::InvalidParameter("gen-synth needs --out".into()))?;
            let mut spec = read_mixture_spec(config)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let rows: Vec<Logits> = match schedule {
                Some(text) => synth::generate_sequence(&spec, *steps, &parse_schedule(text, *steps)?)?,
                None if *steps == 1 => vec![synth::generate(&spec)?],
                None => (0..*steps as u64)
                    .map(|i| {
                        synth::generate(&topnsigma::MixtureSpec {
                            seed: spec.seed.wrapping_add(i),
                            ..spec.clone()
                        })
                    })
                    .collect::<topnsigma::Result<_>>()?,
            };
            let format = match dump_format {
                Some(DumpFormatArg::Binary) => DumpFormat::Binary,
                Some(DumpFormatArg::Ndjson) => DumpFormat::Ndjson,
                None => DumpFormat::from_path(out),
            };
            write_dump(out, &rows, &[], format)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
