//! Rewriting each specialized runner as an instance of the unified
//! iteration, and checking the two trajectories agree.

use serde::{Deserialize, Serialize};

use crate::abs_prob::{induced_row_stochastic, pushsum_masses};
use crate::error::Result;
use crate::matrix::StochasticMatrix;
use crate::problem::ConvexProblem;
use crate::schedule::StepSchedule;
use crate::sequence::MatrixSequence;

use super::runners::{divided_steps, power_diagonals, power_step, run, run_unified, RunnerInputs};
use super::{AlgorithmId, Cadence, RunOptions};

/// Maps a specialized time index to the unified one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMap {
    Identity,
    /// `t -> 2t`: one mixing step and one descent step per specialized step.
    Double,
}

impl TimeMap {
    pub fn apply(self, t: usize) -> usize {
        match self {
            TimeMap::Identity => t,
            TimeMap::Double => 2 * t,
        }
    }
}

/// Which mass divides `theta(t)` in the push-first embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassIndex {
    /// `theta_i(t) / y_i(t+1)`, the value the derivation produces.
    Next,
    /// `theta_i(t) / y_i(t)`.
    Current,
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub algorithm: AlgorithmId,
    pub seq: MatrixSequence,
    pub schedule: StepSchedule,
    pub x0: Vec<Vec<f64>>,
    pub time_map: TimeMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub algorithm: AlgorithmId,
    pub steps: usize,
    pub time_map: TimeMap,
    /// Max over compared times of `|a - b| / max(1, |a|, |b|)`.
    pub max_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

fn ratios(w0: &[Vec<f64>], y0: &[f64]) -> Vec<Vec<f64>> {
    w0.iter().zip(y0).map(|(w, y)| w.iter().map(|v| v / y).collect()).collect()
}

fn interleave_identity(ms: Vec<StochasticMatrix>) -> Result<MatrixSequence> {
    let n = ms[0].n();
    let id = StochasticMatrix::identity(n);
    MatrixSequence::explicit(ms.into_iter().flat_map(|m| [id.clone(), m]).collect())
}

fn interleave_zero(rows: Vec<Vec<f64>>) -> Result<StepSchedule> {
    let n = rows[0].len();
    StepSchedule::explicit(rows.into_iter().flat_map(|r| [r, vec![0.0; n]]).collect())
}

pub fn embed(inputs: &RunnerInputs, opts: &RunOptions) -> Result<Embedding> {
    embed_with(inputs, opts, MassIndex::Next)
}

/// Unified-iteration inputs reproducing `inputs` over `opts.steps` steps.
/// `mass_index` only affects the push-first construction.
pub fn embed_with(inputs: &RunnerInputs, opts: &RunOptions, mass_index: MassIndex) -> Result<Embedding> {
    let algorithm = inputs.algorithm();
    let len = opts.steps.max(1);
    let (seq, schedule, x0, time_map) = match inputs {
        RunnerInputs::Unified { seq, schedule, x0 } | RunnerInputs::Dgd { seq, schedule, x0 } => {
            (seq.clone(), schedule.clone(), x0.clone(), TimeMap::Identity)
        }
        RunnerInputs::DgdPost { seq, schedule, x0 } => {
            let ms = (0..len).map(|t| seq.at(t).into_owned()).collect();
            let rows = (0..len).map(|t| schedule.delta_at(t)).collect::<Result<Vec<_>>>()?;
            (interleave_identity(ms)?, interleave_zero(rows)?, x0.clone(), TimeMap::Double)
        }
        RunnerInputs::RowStochastic { p, c, alpha, x0 } => {
            let rows = power_diagonals(p, len)
                .iter()
                .enumerate()
                .map(|(t, z)| divided_steps(*c, *alpha, t, z, opts.skip_descent_until_positive))
                .collect::<Result<Vec<_>>>()?;
            (MatrixSequence::constant(p.clone()), StepSchedule::explicit(rows)?, x0.clone(), TimeMap::Identity)
        }
        RunnerInputs::SubgradientPush { a_seq, c, alpha, w0, y0 } => {
            let ys = pushsum_masses(a_seq, y0, len)?;
            let ms = (0..len)
                .map(|t| induced_row_stochastic(&a_seq.at(t), &ys[t], &ys[t + 1]))
                .collect::<Result<Vec<_>>>()?;
            let rows = (0..len)
                .map(|t| {
                    let theta = power_step(*c, *alpha, t);
                    ys[t].iter().map(|y| theta / y).collect()
                })
                .collect();
            (interleave_identity(ms)?, interleave_zero(rows)?, ratios(w0, y0), TimeMap::Double)
        }
        RunnerInputs::PushFirst { a_seq, c, alpha, w0, y0 } => {
            let ys = pushsum_masses(a_seq, y0, len)?;
            let ms = (0..len)
                .map(|t| induced_row_stochastic(&a_seq.at(t), &ys[t], &ys[t + 1]))
                .collect::<Result<Vec<_>>>()?;
            let rows = (0..len)
                .map(|t| {
                    let theta = power_step(*c, *alpha, t);
                    let y = match mass_index {
                        MassIndex::Next => &ys[t + 1],
                        MassIndex::Current => &ys[t],
                    };
                    y.iter().map(|y| theta / y).collect()
                })
                .collect();
            (MatrixSequence::explicit(ms)?, StepSchedule::explicit(rows)?, ratios(w0, y0), TimeMap::Identity)
        }
    };
    Ok(Embedding { algorithm, seq, schedule, x0, time_map })
}

pub fn verify_embedding(problem: &dyn ConvexProblem, inputs: &RunnerInputs, opts: &RunOptions, tol: f64) -> Result<EmbeddingReport> {
    verify_embedding_with(problem, inputs, opts, tol, MassIndex::Next)
}

/// Runs the specialized runner and the unified runner on the embedded
/// inputs and compares every specialized step with its mapped time.
pub fn verify_embedding_with(
    problem: &dyn ConvexProblem,
    inputs: &RunnerInputs,
    opts: &RunOptions,
    tol: f64,
    mass_index: MassIndex,
) -> Result<EmbeddingReport> {
    let every = RunOptions { cadence: Cadence::Every(1), ..*opts };
    let special = run(problem, inputs, &every)?;
    let emb = embed_with(inputs, opts, mass_index)?;
    let unified_opts = RunOptions { steps: emb.time_map.apply(opts.steps), ..every };
    let unified = run_unified(problem, &emb.seq, &emb.schedule, &emb.x0, &unified_opts)?;
    let mut max_deviation = 0.0_f64;
    for snap in &special.snapshots {
        let other = unified.at(emb.time_map.apply(snap.t)).expect("every step is recorded");
        for (a, b) in snap.iterates.as_slice().iter().zip(other.iterates.as_slice()) {
            let dev = (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs());
            max_deviation = max_deviation.max(if dev.is_nan() { f64::INFINITY } else { dev });
        }
    }
    Ok(EmbeddingReport {
        algorithm: inputs.algorithm(),
        steps: opts.steps,
        time_map: emb.time_map,
        max_deviation,
        tol,
        passed: max_deviation <= tol,
    })
}
