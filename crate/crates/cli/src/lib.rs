//! Batch experiment driver: load a JSON config, run assumption checks,
//! execute one or several algorithms and write traces plus a summary.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use consensus_subgrad::engine::AlgorithmId;
use consensus_subgrad::graph::graph_from_matrix;
use serde::Serialize;

use config::{ConfigInvalid, ExperimentConfig};
use experiment::{execute, merged_diagnostics, RunOutput, Status};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CHECKS: u8 = 2;
pub const THREADS_ENV: &str = "CONSENSUS_SUBGRAD_THREADS";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "consensus-subgrad", version, about = "Distributed subgradient experiments over time-varying digraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 2 and skip the run when a check fails.
    #[arg(long)]
    pub strict: bool,
    /// Re-run and compare against existing outputs instead of writing.
    #[arg(long)]
    pub verify: bool,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `geometric` or `every:k`; overrides the config.
    #[arg(long)]
    pub snapshots: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured algorithm.
    Run(CommonArgs),
    /// Run several algorithms on one problem and topology.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated algorithm ids.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        algorithms: Vec<String>,
    },
    /// Print the support graph of P(t) in DOT format.
    Dot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        t: usize,
        /// Use `column_sequence` instead of `sequence`.
        #[arg(long)]
        column: bool,
    },
}

fn load(args: &CommonArgs) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(s) = &args.snapshots {
        cfg.snapshots = s.clone();
    }
    let out = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| DEFAULT_OUT.into());
    Ok((cfg, out))
}

/// Writes the files, or in verify mode compares them; returns whether
/// every file matched.
fn emit(dir: &Path, files: &[(&str, String)], hash: &str, verify: bool) -> anyhow::Result<bool> {
    if verify {
        let mismatches = output::verify_against(dir, files, hash);
        for m in &mismatches {
            eprintln!("verify: {m}");
        }
        return Ok(mismatches.is_empty());
    }
    output::write_all(dir, files)?;
    Ok(true)
}

fn report(o: &RunOutput) {
    match (&o.status, &o.summary) {
        (Status::Halted, _) => println!("{}: checks failed, run skipped", o.algorithm),
        (_, Some(s)) => println!(
            "{}: final_error={:e} consensus_error={:e} converged={} checks_passed={}",
            o.algorithm, s.final_error, s.final_consensus_error, s.converged, s.checks_passed
        ),
        _ => {}
    }
}

fn cmd_run(args: &CommonArgs) -> anyhow::Result<u8> {
    let (cfg, out) = load(args)?;
    let algorithm = cfg.algorithm()?;
    let result = execute(&cfg, algorithm, args.strict)?;
    let matched = emit(&out, &result.files, &result.checks.config_hash, args.verify)?;
    report(&result);
    if !matched {
        return Ok(EXIT_CHECKS);
    }
    Ok(if result.status == Status::Halted { EXIT_CHECKS } else { EXIT_OK })
}

fn parse_algorithms(raw: &[String]) -> Result<Vec<AlgorithmId>, ConfigInvalid> {
    let ids: Vec<&str> = raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if ids.is_empty() {
        return Err(ConfigInvalid::new("--algorithms", "the algorithm list is empty"));
    }
    let mut out: Vec<AlgorithmId> = Vec::new();
    for id in ids {
        let a: AlgorithmId = id.parse().map_err(|_| ConfigInvalid::new("--algorithms", format!("unknown algorithm `{id}`")))?;
        if out.contains(&a) {
            return Err(ConfigInvalid::new("--algorithms", format!("`{id}` listed twice")));
        }
        out.push(a);
    }
    Ok(out)
}

/// Worker count from the environment, capped by the number of jobs.
pub fn thread_cap(jobs: usize) -> Result<usize, ConfigInvalid> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| ConfigInvalid::new(THREADS_ENV, format!("expected a positive integer, found `{v}`")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |k| k.get()),
    };
    Ok(cap.min(jobs).max(1))
}

#[derive(Serialize)]
struct CompareEntry {
    algorithm: AlgorithmId,
    status: &'static str,
    converged: Option<bool>,
    checks_passed: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct CompareDoc {
    config_hash: String,
    entries: Vec<CompareEntry>,
}

fn cmd_compare(args: &CommonArgs, algorithms: &[String]) -> anyhow::Result<u8> {
    let (cfg, out) = load(args)?;
    let algorithms = parse_algorithms(algorithms)?;
    for &a in &algorithms {
        cfg.validate(a)?;
    }
    let workers = thread_cap(algorithms.len())?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<anyhow::Result<RunOutput>>>> = Mutex::new((0..algorithms.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&a) = algorithms.get(i) else { break };
                let mut per_run = cfg.clone();
                per_run.algorithm = Some(a);
                let r = execute(&per_run, a, args.strict);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("workers have finished");
    let hash = cfg.hash();
    let mut outputs = Vec::new();
    let mut entries = Vec::new();
    let (mut failed, mut halted, mut matched) = (false, false, true);
    for (a, r) in algorithms.iter().zip(results) {
        match r.expect("every job ran") {
            Ok(o) => {
                matched &= emit(&out.join(a.as_str()), &o.files, &o.checks.config_hash, args.verify)?;
                report(&o);
                halted |= o.status == Status::Halted;
                entries.push(CompareEntry {
                    algorithm: *a,
                    status: if o.status == Status::Halted { "halted" } else { "completed" },
                    converged: o.summary.as_ref().map(|s| s.converged),
                    checks_passed: o.checks.passed,
                    error: None,
                });
                outputs.push(o);
            }
            Err(e) => {
                eprintln!("{a}: error: {e:#}");
                failed = true;
                entries.push(CompareEntry {
                    algorithm: *a,
                    status: "error",
                    converged: None,
                    checks_passed: false,
                    error: Some(format!("{e:#}")),
                });
            }
        }
    }
    let mut doc = serde_json::to_string_pretty(&CompareDoc { config_hash: hash.clone(), entries })?;
    doc.push('\n');
    let files = vec![("compare.csv", merged_diagnostics(&hash, &outputs)), ("compare.json", doc)];
    matched &= emit(&out, &files, &hash, args.verify)?;
    Ok(if failed {
        EXIT_RUNTIME
    } else if halted || !matched {
        EXIT_CHECKS
    } else {
        EXIT_OK
    })
}

fn cmd_dot(config: &Path, t: usize, column: bool) -> anyhow::Result<u8> {
    let cfg = ExperimentConfig::load(config)?;
    let spec = match (&cfg.column_sequence, column) {
        (Some(col), true) => col,
        (None, true) => return Err(ConfigInvalid::new("column_sequence", "not present in the config").into()),
        _ => &cfg.sequence,
    };
    let seq = experiment::build_sequence(spec, cfg.seed)?;
    print!("{}", graph_from_matrix(&seq.at(t)).to_dot(&format!("P_{t}")));
    Ok(EXIT_OK)
}

/// Runs a parsed command and maps the outcome to an exit status.
pub fn dispatch(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare { common, algorithms } => cmd_compare(common, algorithms),
        Command::Dot { config, t, column } => cmd_dot(config, *t, *column).context("dot"),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
