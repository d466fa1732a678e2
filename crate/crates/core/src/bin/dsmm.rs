use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsmm::error::{Error, Result};
use dsmm::experiment::{exit, resolve_jobs, run_experiment, ExperimentConfig};
use dsmm::problems::LabeledDataset;
use dsmm::rng::RngStream;
use dsmm::spanning::{self, SpanningKind};
use dsmm::validate::{run_suite, Suite, SuiteOutcome, TheoryConstants};

/// Direct-search minimization and min-max experiments.
#[derive(Parser)]
#[command(name = "dsmm", version)]
struct Cli {
    /// Worker threads; DSMM_JOBS takes precedence when set.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Run a validation suite: lyapunov, walk, lemma2, pl-implications,
    /// complexity-slope or all.
    Validate {
        suite: String,
        /// TOML file with c, eps_f, v, p_f, gamma, l_f, sigma_f.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Positive spanning sets.
    Pss {
        #[command(subcommand)]
        action: PssAction,
    },
    /// Labeled datasets.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
}

#[derive(Subcommand)]
enum PssAction {
    /// Print the directions as a row-per-direction matrix.
    Dump {
        #[arg(long)]
        kind: SpanningKind,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum DatasetAction {
    /// Write a synthetic dataset as CSV.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(config: &Path, jobs: usize) -> Result<i32> {
    let cfg = ExperimentConfig::load(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let outcome = run_experiment(&cfg, base, jobs)?;
    if outcome.exit_code == exit::INFEASIBLE {
        eprintln!("infeasible constants:");
        for i in outcome.summary.feasibility.violated() {
            eprintln!("  {}: {} vs {}", i.name, i.lhs, i.rhs);
        }
        return Ok(exit::INFEASIBLE);
    }
    for r in &outcome.summary.runs {
        match &r.error {
            Some(e) => println!("replicate {}: error: {e}", r.replicate),
            None => println!(
                "replicate {}: {:?} after {} iterations, {} calls",
                r.replicate, r.status, r.iterations, r.calls
            ),
        }
    }
    if let Some(dir) = &outcome.output_dir {
        println!("wrote {}", dir.join("summary.json").display());
    }
    Ok(outcome.exit_code)
}

fn validate(suite: &str, constants: Option<&Path>) -> Result<i32> {
    let suite: Suite = suite.parse()?;
    let constants = match constants {
        Some(p) => TheoryConstants::load(p)?,
        None => TheoryConstants::default(),
    };
    let out = run_suite(suite, &constants, |l| println!("{l}"))?;
    match out {
        SuiteOutcome::Infeasible(report) => {
            eprintln!("infeasible constants:");
            for i in report.violated() {
                eprintln!("  {}: {} vs {}", i.name, i.lhs, i.rhs);
            }
            Ok(exit::INFEASIBLE)
        }
        SuiteOutcome::Checked(_) if out.passed() => Ok(exit::OK),
        SuiteOutcome::Checked(_) => Ok(exit::FAILURE),
    }
}

fn pss_dump(kind: SpanningKind, dim: usize, seed: u64) -> Result<i32> {
    let set = spanning::make(kind, dim, RngStream::new(seed, 0))?;
    io::stdout().write_all(set.to_matrix_string().as_bytes())?;
    Ok(exit::OK)
}

fn dataset_gen(seed: u64, n: usize, d: usize, out: Option<&Path>) -> Result<i32> {
    let data = LabeledDataset::synthetic(seed, n, d)?;
    match out {
        Some(p) => data.write_csv(std::fs::File::create(p)?)?,
        None => data.write_csv(io::stdout().lock())?,
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let jobs = resolve_jobs(cli.jobs);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    let result = match &cli.command {
        Command::Run { config } => run(config, jobs),
        Command::Validate { suite, constants } => validate(suite, constants.as_deref()),
        Command::Pss {
            action: PssAction::Dump { kind, dim, seed },
        } => pss_dump(*kind, *dim, *seed),
        Command::Dataset {
            action: DatasetAction::Gen { seed, n, d, out },
        } => dataset_gen(*seed, *n, *d, out.as_deref()),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::InvalidDimension(_)
                | Error::InvalidProbability(_) => exit::USAGE,
                Error::InfeasibleConstants(_) => exit::INFEASIBLE,
                _ => exit::FAILURE,
            }
        }
    };
    ExitCode::from(code as u8)
}
