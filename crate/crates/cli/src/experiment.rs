//! Turning a validated config into checks, a trajectory and output files.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use consensus_subgrad::diagnostics::{diagnostics_csv, measure_trajectory, DiagnosticsRow, MeasureContext};
use consensus_subgrad::engine::{run, verify_embedding, AlgorithmId, EmbeddingReport, RunOptions, RunnerInputs, Trajectory};
use consensus_subgrad::graph::{default_probe, default_t0_max, default_t_max};
use consensus_subgrad::schedule::{audit_assumptions, Verdict};
use consensus_subgrad::{
    check_a1, check_a1_prime, check_a1_star, compute_abs_prob, pushsum_abs_prob, AbsProbMethod, AbsProbSequence,
    AssumptionAudit, ConditionReport, ConvexProblem, L1Median, L1Regression, MatrixSequence, ProbabilityVector,
    StepRule, StepSchedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigInvalid, ExperimentConfig, InitSpec, ProblemSpec, SequenceSpec};

pub const ABS_PROB_TOL: f64 = 1e-10;
pub const EMBEDDING_TOL: f64 = 1e-10;
/// Embedding verification replays at most this many steps.
pub const EMBEDDING_STEPS_MAX: usize = 1000;
/// Stream for seeded initial states, distinct from the anchors' stream.
const X0_STREAM: u64 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    #[serde(flatten)]
    pub report: ConditionReport,
    pub scope: &'static str,
}

impl From<ConditionReport> for CheckEntry {
    fn from(report: ConditionReport) -> Self {
        let scope = report.scope();
        Self { report, scope }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksDoc {
    pub config_hash: String,
    pub algorithm: AlgorithmId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1prime: Option<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1star: Option<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2a3: Option<AssumptionAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingReport>,
    pub notes: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub algorithm: AlgorithmId,
    pub steps: usize,
    /// Max distance to the argmin set when an oracle exists, else the
    /// consensus error.
    pub final_error: f64,
    pub final_consensus_error: f64,
    pub final_distance: Option<f64>,
    pub final_objective_gap: Option<f64>,
    /// `pi`, `push_sum_mass` or `uniform` (when pi is unavailable).
    pub averaging: &'static str,
    pub distance_threshold: f64,
    pub consensus_threshold: f64,
    pub converged: bool,
    pub checks_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    /// Checks failed under `--strict`; nothing was run.
    Halted,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub algorithm: AlgorithmId,
    pub status: Status,
    pub checks: ChecksDoc,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub summary: Option<Summary>,
    /// File name and contents, in write order.
    pub files: Vec<(&'static str, String)>,
}

pub fn hash_line(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output documents serialize");
    s.push('\n');
    s
}

fn read_anchor_csv(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading anchors from {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {line}", path.display()))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {line} is not numeric", path.display()))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn build_problem(cfg: &ExperimentConfig) -> anyhow::Result<Box<dyn ConvexProblem>> {
    let problem: Box<dyn ConvexProblem> = match &cfg.problem {
        ProblemSpec::L1Median { anchors } => Box::new(L1Median::new(anchors.clone()).context("problem.anchors")?),
        ProblemSpec::L1MedianCsv { path } => Box::new(L1Median::new(read_anchor_csv(path)?).context("problem.path")?),
        ProblemSpec::L1MedianSeeded { n, d } => {
            let seed = cfg.seed.ok_or_else(|| ConfigInvalid::new("seed", "required by problem"))?;
            Box::new(L1Median::seeded(*n, *d, seed).context("problem")?)
        }
        ProblemSpec::L1Regression { a, b } => Box::new(L1Regression::new(a.clone(), b.clone()).context("problem")?),
    };
    Ok(problem)
}

pub fn build_sequence(spec: &SequenceSpec, seed: Option<u64>) -> anyhow::Result<MatrixSequence> {
    let seq = match spec {
        SequenceSpec::Constant { matrix } => MatrixSequence::constant(matrix.clone()),
        SequenceSpec::Periodic { matrices } => MatrixSequence::periodic(matrices.clone()).context("sequence.matrices")?,
        SequenceSpec::Explicit { matrices } => MatrixSequence::explicit(matrices.clone()).context("sequence.matrices")?,
        SequenceSpec::SeededRandom { n, kind, family } => {
            let seed = seed.ok_or_else(|| ConfigInvalid::new("seed", "required by sequence"))?;
            MatrixSequence::seeded_random(*n, *kind, family.clone(), seed).context("sequence")?
        }
    };
    Ok(seq)
}

fn build_x0(cfg: &ExperimentConfig, problem: &dyn ConvexProblem) -> anyhow::Result<Vec<Vec<f64>>> {
    let (n, d) = (problem.n(), problem.dim());
    let x0 = match cfg.x0.as_ref().unwrap_or(&InitSpec::Anchors) {
        InitSpec::Anchors => problem.default_x0(),
        InitSpec::Explicit { rows } => {
            if rows.len() != n || rows.iter().any(|r| r.len() != d) {
                bail!(ConfigInvalid::new("x0.rows", format!("expected {n} rows of length {d}")));
            }
            rows.clone()
        }
        InitSpec::SeededRandom { scale } => {
            if !(scale.is_finite() && *scale > 0.0) {
                bail!(ConfigInvalid::new("x0.scale", "must be positive and finite"));
            }
            let seed = cfg.seed.ok_or_else(|| ConfigInvalid::new("seed", "required by x0"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(X0_STREAM);
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-scale..=*scale)).collect()).collect()
        }
    };
    Ok(x0)
}

fn power(rule: &StepRule) -> (f64, f64) {
    rule.power().expect("validated as a power rule")
}

struct Setup {
    problem: Box<dyn ConvexProblem>,
    inputs: RunnerInputs,
    abs_prob: Option<Arc<AbsProbSequence>>,
    /// A1 on the mixing sequence of non-push runs, always evaluated.
    a1: Option<ConditionReport>,
    seq: MatrixSequence,
    y0: Vec<f64>,
    notes: Vec<String>,
}

fn setup(cfg: &ExperimentConfig, algorithm: AlgorithmId) -> anyhow::Result<Setup> {
    let problem = build_problem(cfg)?;
    let seq = build_sequence(cfg.mixing_spec(algorithm), cfg.seed)?;
    let n = problem.n();
    if seq.n() != n {
        bail!(ConfigInvalid::new("sequence", format!("{} agents in the sequence, {n} in the problem", seq.n())));
    }
    let x0 = build_x0(cfg, problem.as_ref())?;
    let y0 = cfg.y0.clone().unwrap_or_else(|| vec![1.0; n]);
    if y0.len() != n || y0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        bail!(ConfigInvalid::new("y0", format!("expected {n} positive masses")));
    }
    let mut notes = Vec::new();
    if !seq.exact_window().is_some() {
        notes.push("seeded-random sequence: condition verdicts cover the probe window only".into());
    }
    let (a1, abs_prob) = if algorithm.is_push() {
        (None, None)
    } else {
        let report = check_a1(&seq, default_t_max(&seq), default_probe(&seq));
        let pi = if report.holds {
            match compute_abs_prob(&seq, Some(&report), cfg.steps + 1, ABS_PROB_TOL) {
                Ok(pi) => Some(Arc::new(pi)),
                Err(e) => {
                    notes.push(format!("absolute probability vectors unavailable: {e}"));
                    None
                }
            }
        } else {
            notes.push(format!("A1 fails, so pi is unavailable: {}", report.failure_reason));
            None
        };
        (Some(report), pi)
    };
    let inputs = match algorithm {
        AlgorithmId::Unified | AlgorithmId::Dgd | AlgorithmId::DgdPost => {
            if cfg.schedule.needs_abs_prob() && abs_prob.is_none() {
                bail!(ConfigInvalid::new("schedule", "a pi-scaled rule needs A1 and absolute probability vectors"));
            }
            let schedule = StepSchedule::new(n, cfg.schedule.clone(), abs_prob.clone()).context("schedule")?;
            match algorithm {
                AlgorithmId::Unified => RunnerInputs::Unified { seq: seq.clone(), schedule, x0 },
                AlgorithmId::Dgd => RunnerInputs::Dgd { seq: seq.clone(), schedule, x0 },
                _ => RunnerInputs::DgdPost { seq: seq.clone(), schedule, x0 },
            }
        }
        AlgorithmId::RowStochastic => {
            let (c, alpha) = power(&cfg.schedule);
            RunnerInputs::RowStochastic { p: seq.at(0).into_owned(), c, alpha, x0 }
        }
        AlgorithmId::SubgradientPush | AlgorithmId::PushFirst => {
            let (c, alpha) = power(&cfg.schedule);
            let w0: Vec<Vec<f64>> = x0.iter().zip(&y0).map(|(x, y)| x.iter().map(|v| v * y).collect()).collect();
            let (a_seq, y0c) = (seq.clone(), y0.clone());
            if algorithm == AlgorithmId::SubgradientPush {
                RunnerInputs::SubgradientPush { a_seq, c, alpha, w0, y0: y0c }
            } else {
                RunnerInputs::PushFirst { a_seq, c, alpha, w0, y0: y0c }
            }
        }
    };
    Ok(Setup { problem, inputs, abs_prob, a1, seq, y0, notes })
}

fn audit_passes(a: &AssumptionAudit) -> bool {
    a.a2_verdict != Verdict::AnalyticFail && a.a3_verdict != Verdict::AnalyticFail
}

fn run_checks(cfg: &ExperimentConfig, algorithm: AlgorithmId, s: &mut Setup, hash: &str) -> anyhow::Result<ChecksDoc> {
    let flags = cfg.checks;
    let seq = &s.seq;
    // Row-stochastic runs need a primitive P and pi-scaled schedules need
    // pi, so A1 is reported for them whether or not it was requested.
    let a1_required = algorithm == AlgorithmId::RowStochastic || cfg.schedule.needs_abs_prob();
    let a1 = if flags.a1 || a1_required {
        Some(s.a1.clone().unwrap_or_else(|| check_a1(seq, default_t_max(seq), default_probe(seq))))
    } else {
        None
    };
    let a1prime = flags.a1prime.then(|| check_a1_prime(seq, default_t0_max(seq), default_probe(seq)));
    let a1star = if flags.a1star {
        if !seq.kind().is_column() {
            bail!(ConfigInvalid::new("checks.a1star", format!("needs a column-stochastic sequence, found {}", seq.kind())));
        }
        Some(check_a1_star(seq, default_t_max(seq), default_probe(seq))?)
    } else {
        None
    };
    let a2a3 = if flags.a2a3 {
        let horizon = cfg.steps.max(1);
        let pi = match (&s.abs_prob, algorithm.is_push()) {
            (Some(pi), _) => Some(pi.clone()),
            (None, true) => Some(Arc::new(pushsum_abs_prob(seq, &s.y0, horizon + 1).context("checks.a2a3")?)),
            (None, false) => None,
        };
        let pi = pi.unwrap_or_else(|| {
            s.notes.push("a2a3 audited against uniform weights because pi is unavailable".into());
            Arc::new(AbsProbSequence::stationary(ProbabilityVector::uniform(seq.n()), AbsProbMethod::UniformDoubly))
        });
        let schedule = if algorithm.is_push() || algorithm == AlgorithmId::RowStochastic {
            let (c, alpha) = power(&cfg.schedule);
            StepSchedule::common_power(seq.n(), c, alpha)?
        } else {
            StepSchedule::new(seq.n(), cfg.schedule.clone(), s.abs_prob.clone()).context("schedule")?
        };
        Some(audit_assumptions(&schedule, &pi, horizon)?)
    } else {
        None
    };
    let embedding = if flags.embedding {
        let opts = RunOptions {
            skip_descent_until_positive: cfg.skip_descent_until_positive,
            ..RunOptions::new(cfg.steps.min(EMBEDDING_STEPS_MAX))
        };
        match verify_embedding(s.problem.as_ref(), &s.inputs, &opts, EMBEDDING_TOL) {
            Ok(r) => Some(r),
            Err(e) => {
                s.notes.push(format!("embedding replay failed: {e}"));
                Some(EmbeddingReport {
                    algorithm,
                    steps: opts.steps,
                    time_map: consensus_subgrad::engine::TimeMap::Identity,
                    max_deviation: f64::INFINITY,
                    tol: EMBEDDING_TOL,
                    passed: false,
                })
            }
        }
    } else {
        None
    };
    let passed = [&a1, &a1prime, &a1star].iter().all(|r| r.as_ref().is_none_or(|r| r.holds))
        && a2a3.as_ref().is_none_or(audit_passes)
        && embedding.as_ref().is_none_or(|e| e.passed);
    Ok(ChecksDoc {
        config_hash: hash.to_string(),
        algorithm,
        a1: a1.map(Into::into),
        a1prime: a1prime.map(Into::into),
        a1star: a1star.map(Into::into),
        a2a3,
        embedding,
        notes: s.notes.clone(),
        passed,
    })
}

fn summarize(cfg: &ExperimentConfig, traj: &Trajectory, rows: &[DiagnosticsRow], averaging: &'static str, hash: &str, checks_passed: bool) -> Summary {
    let last = rows.last().expect("t = 0 is always measured");
    let final_error = last.max_distance.unwrap_or(last.consensus_error);
    let converged = final_error <= cfg.thresholds.distance && last.consensus_error <= cfg.thresholds.consensus;
    Summary {
        config_hash: hash.to_string(),
        seed: cfg.seed,
        algorithm: traj.algorithm,
        steps: traj.steps,
        final_error,
        final_consensus_error: last.consensus_error,
        final_distance: last.max_distance,
        final_objective_gap: last.objective_gap,
        averaging,
        distance_threshold: cfg.thresholds.distance,
        consensus_threshold: cfg.thresholds.consensus,
        converged,
        checks_passed,
    }
}

/// Runs checks and, unless they fail under `strict`, the algorithm.
pub fn execute(cfg: &ExperimentConfig, algorithm: AlgorithmId, strict: bool) -> anyhow::Result<RunOutput> {
    cfg.validate(algorithm)?;
    let hash = cfg.hash();
    let mut s = setup(cfg, algorithm)?;
    let checks = run_checks(cfg, algorithm, &mut s, &hash)?;
    let checks_json = json(&checks);
    if strict && !checks.passed {
        return Ok(RunOutput {
            algorithm,
            status: Status::Halted,
            checks,
            diagnostics: Vec::new(),
            summary: None,
            files: vec![("checks.json", checks_json)],
        });
    }
    let opts = RunOptions {
        steps: cfg.steps,
        cadence: cfg.cadence()?,
        skip_descent_until_positive: cfg.skip_descent_until_positive,
    };
    let mut traj = run(s.problem.as_ref(), &s.inputs, &opts).with_context(|| format!("running {algorithm}"))?;
    traj.config_hash = Some(hash.clone());
    traj.seed = cfg.seed;
    let argmin = s.problem.argmin().ok();
    let uniform;
    let (abs_prob, averaging) = match (&s.abs_prob, algorithm.is_push()) {
        (_, true) => (None, "push_sum_mass"),
        (Some(pi), false) => (Some(pi.as_ref()), "pi"),
        (None, false) => {
            uniform = AbsProbSequence::stationary(ProbabilityVector::uniform(s.seq.n()), AbsProbMethod::UniformDoubly);
            (Some(&uniform), "uniform")
        }
    };
    let ctx = MeasureContext { problem: s.problem.as_ref(), abs_prob, argmin: argmin.as_ref() };
    let rows = measure_trajectory(&traj, &ctx).context("measuring diagnostics")?;
    let summary = summarize(cfg, &traj, &rows, averaging, &hash, checks.passed);
    let files = vec![
        ("trajectory.csv", hash_line(&hash) + &traj.to_csv()),
        ("diagnostics.csv", hash_line(&hash) + &diagnostics_csv(&rows)),
        ("checks.json", checks_json),
        ("summary.json", json(&summary)),
    ];
    Ok(RunOutput { algorithm, status: Status::Completed, checks, diagnostics: rows, summary: Some(summary), files })
}

/// Diagnostics of several runs in one CSV with a leading algorithm column.
pub fn merged_diagnostics(hash: &str, outputs: &[RunOutput]) -> String {
    let mut out = hash_line(hash);
    out.push_str("algorithm,t,consensus_error,objective_gap,state_norm,sqrt_t_ratio\n");
    for o in outputs {
        for line in diagnostics_csv(&o.diagnostics).lines().skip(1) {
            out.push_str(o.algorithm.as_str());
            out.push(',');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}
