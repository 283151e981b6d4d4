//! The unified iteration, the specialized runners and their embeddings.

mod embed;
mod runners;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;

pub use embed::{embed, embed_with, verify_embedding, verify_embedding_with, Embedding, EmbeddingReport, MassIndex, TimeMap};
pub use runners::{
    run, run_dgd, run_dgd_post, run_push_first, run_row_stochastic, run_subgradient_push, run_unified, RunnerInputs,
};

pub const ZERO_DIVISOR_TOL: f64 = 1e-14;
pub const SKIP_DESCENT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Unified,
    Dgd,
    DgdPost,
    RowStochastic,
    SubgradientPush,
    PushFirst,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::Unified,
        AlgorithmId::Dgd,
        AlgorithmId::DgdPost,
        AlgorithmId::RowStochastic,
        AlgorithmId::SubgradientPush,
        AlgorithmId::PushFirst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::Unified => "unified",
            AlgorithmId::Dgd => "dgd",
            AlgorithmId::DgdPost => "dgd_post",
            AlgorithmId::RowStochastic => "row_stochastic",
            AlgorithmId::SubgradientPush => "subgradient_push",
            AlgorithmId::PushFirst => "push_first",
        }
    }

    pub fn is_push(self) -> bool {
        matches!(self, AlgorithmId::SubgradientPush | AlgorithmId::PushFirst)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::EmbeddingUnavailable(s.to_string()))
    }
}

/// An `N x d` block stored row-major; row `i` belongs to agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBlock {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl StateBlock {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![0.0; n * d] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptyMatrix)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n: rows.len(), d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.data.chunks(self.d).map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `X^T w`.
    pub fn weighted_average(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (i, wi) in w.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += wi * v;
            }
        }
        out
    }

    fn check_finite(&self, t: usize) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFiniteState { t, agent: p / self.d, coord: p % self.d }),
            None => Ok(()),
        }
    }
}

/// `out = P x`, accumulated over `j` in increasing order.
pub(crate) fn mix_into(p: &StochasticMatrix, x: &StateBlock, out: &mut StateBlock) {
    let (n, d) = (x.n, x.d);
    for i in 0..n {
        let row = p.row(i);
        let o = &mut out.data[i * d..(i + 1) * d];
        o.iter_mut().for_each(|v| *v = 0.0);
        for (j, &pij) in row.iter().enumerate() {
            if pij == 0.0 {
                continue;
            }
            for (ov, xv) in o.iter_mut().zip(&x.data[j * d..(j + 1) * d]) {
                *ov += pij * xv;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStates {
    pub t: usize,
    pub x: StateBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushSumStates {
    pub t: usize,
    pub w: StateBlock,
    pub y: Vec<f64>,
}

impl PushSumStates {
    /// Ratios `z_i = w_i / y_i`.
    pub fn z(&self) -> StateBlock {
        let mut z = self.w.clone();
        for (i, y) in self.y.iter().enumerate() {
            z.row_mut(i).iter_mut().for_each(|v| *v /= y);
        }
        z
    }
}

/// One step of `X(t+1) = P(t) X(t) - Delta(t) G(t)`.
pub fn unified_step(x: &AgentStates, p: &StochasticMatrix, delta: &[f64], g: &StateBlock) -> Result<AgentStates> {
    let (n, d) = (x.x.n, x.x.d);
    if p.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.n() });
    }
    if delta.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: delta.len() });
    }
    if g.n != n || g.d != d {
        return Err(Error::DimensionMismatch { expected: n * d, found: g.n * g.d });
    }
    let mut out = StateBlock::zeros(n, d);
    mix_into(p, &x.x, &mut out);
    descend(&mut out, delta, g);
    out.check_finite(x.t + 1)?;
    Ok(AgentStates { t: x.t + 1, x: out })
}

pub(crate) fn descend(x: &mut StateBlock, delta: &[f64], g: &StateBlock) {
    for (i, &di) in delta.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        for (v, gv) in x.row_mut(i).iter_mut().zip(g.row(i)) {
            *v -= di * gv;
        }
    }
}

/// Which times are kept in a trajectory. `t = 0` and the final step are
/// always kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// `t` in `{0, 1, 2, 4, 8, ...}`.
    Geometric,
    Every(usize),
}

impl Cadence {
    pub fn keeps(self, t: usize, steps: usize) -> bool {
        t == 0
            || t == steps
            || match self {
                Cadence::Geometric => t.is_power_of_two(),
                Cadence::Every(k) => t.is_multiple_of(k.max(1)),
            }
    }
}

impl FromStr for Cadence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "geometric" {
            return Ok(Cadence::Geometric);
        }
        s.strip_prefix("every:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k > 0)
            .map(Cadence::Every)
            .ok_or_else(|| Error::InvalidParameter(format!("snapshot cadence `{s}` is not `geometric` or `every:k`")))
    }
}

impl fmt::Display for Cadence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cadence::Geometric => f.write_str("geometric"),
            Cadence::Every(k) => write!(f, "every:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub steps: usize,
    pub cadence: Cadence,
    /// Row-stochastic runner only: agents skip descent while their
    /// diagonal divisor is at most `SKIP_DESCENT_THRESHOLD`.
    pub skip_descent_until_positive: bool,
}

impl RunOptions {
    pub fn new(steps: usize) -> Self {
        Self { steps, cadence: Cadence::Geometric, skip_descent_until_positive: false }
    }

    pub fn every(steps: usize, k: usize) -> Self {
        Self { steps, cadence: Cadence::Every(k), skip_descent_until_positive: false }
    }
}

/// Recorded state at one time. For push-sum runs `iterates` holds the
/// ratios `w / y` and `mass` holds `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub iterates: StateBlock,
    pub mass: Option<Vec<f64>>,
    /// `sum_{k<t} ||Delta(k)||_inf` for the effective unified step matrices.
    pub step_sum: f64,
    /// `sum_{k<t} ||Delta(k)||_inf^2`.
    pub step_sq_sum: f64,
    /// Number of `k < t` with a nonzero `Delta(k)`.
    pub descent_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub algorithm: AlgorithmId,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("t = 0 is always recorded")
    }

    pub fn at(&self, t: usize) -> Option<&Snapshot> {
        self.snapshots.binary_search_by_key(&t, |s| s.t).ok().map(|i| &self.snapshots[i])
    }

    /// CSV with columns `t, agent, coordinate, value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,agent,coordinate,value\n");
        for s in &self.snapshots {
            for i in 0..s.iterates.n() {
                for (k, v) in s.iterates.row(i).iter().enumerate() {
                    let _ = writeln!(out, "{},{i},{k},{v}", s.t);
                }
            }
        }
        out
    }
}

pub(crate) struct Recorder {
    steps: usize,
    cadence: Cadence,
    snapshots: Vec<Snapshot>,
    step_sum: f64,
    step_sq_sum: f64,
    descent_steps: usize,
}

impl Recorder {
    pub(crate) fn new(opts: &RunOptions) -> Self {
        Self {
            steps: opts.steps,
            cadence: opts.cadence,
            snapshots: Vec::new(),
            step_sum: 0.0,
            step_sq_sum: 0.0,
            descent_steps: 0,
        }
    }

    pub(crate) fn add_step(&mut self, delta: &[f64]) {
        let norm = delta.iter().copied().fold(0.0, f64::max);
        self.step_sum += norm;
        self.step_sq_sum += norm * norm;
        if norm > 0.0 {
            self.descent_steps += 1;
        }
    }

    pub(crate) fn record(&mut self, t: usize, iterates: &StateBlock, mass: Option<&[f64]>) -> Result<()> {
        iterates.check_finite(t)?;
        if self.cadence.keeps(t, self.steps) {
            self.snapshots.push(Snapshot {
                t,
                iterates: iterates.clone(),
                mass: mass.map(<[f64]>::to_vec),
                step_sum: self.step_sum,
                step_sq_sum: self.step_sq_sum,
                descent_steps: self.descent_steps,
            });
        }
        Ok(())
    }

    pub(crate) fn finish(self, algorithm: AlgorithmId) -> Trajectory {
        Trajectory { algorithm, steps: self.steps, snapshots: self.snapshots, config_hash: None, seed: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(rows: &[&[f64]]) -> StateBlock {
        StateBlock::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn unified_step_examples() {
        let x = AgentStates { t: 0, x: block(&[&[0.0], &[2.0]]) };
        let g = block(&[&[1.0], &[-1.0]]);
        let next = unified_step(&x, &StochasticMatrix::uniform(2), &[0.1, 0.1], &g).unwrap();
        assert_eq!(next.t, 1);
        assert!((next.x.row(0)[0] - 0.9).abs() < 1e-15);
        assert!((next.x.row(1)[0] - 1.1).abs() < 1e-15);

        let x = AgentStates { t: 3, x: block(&[&[1.0, 2.0], &[3.0, -4.0], &[0.5, 0.5]]) };
        let zero = StateBlock::zeros(3, 2);
        let same = unified_step(&x, &StochasticMatrix::identity(3), &[0.0; 3], &zero).unwrap();
        assert_eq!(same.x, x.x);
        let avg = unified_step(&x, &StochasticMatrix::uniform(3), &[0.0; 3], &zero).unwrap();
        for i in 0..3 {
            assert!((avg.x.row(i)[0] - 1.5).abs() < 1e-15);
            assert!((avg.x.row(i)[1] + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unified_step_rejects_bad_shapes_and_nan() {
        let x = AgentStates { t: 0, x: block(&[&[0.0], &[2.0]]) };
        let g = block(&[&[1.0], &[-1.0]]);
        assert!(unified_step(&x, &StochasticMatrix::identity(3), &[0.0; 2], &g).is_err());
        let bad = block(&[&[f64::NAN], &[0.0]]);
        let err = unified_step(&x, &StochasticMatrix::identity(2), &[1.0, 1.0], &bad).unwrap_err();
        assert_eq!(err, Error::NonFiniteState { t: 1, agent: 0, coord: 0 });
    }

    #[test]
    fn cadence_parsing_and_membership() {
        assert_eq!("geometric".parse::<Cadence>().unwrap(), Cadence::Geometric);
        assert_eq!("every:5".parse::<Cadence>().unwrap(), Cadence::Every(5));
        assert!("every:0".parse::<Cadence>().is_err());
        assert!("sometimes".parse::<Cadence>().is_err());
        let kept: Vec<usize> = (0..=10).filter(|&t| Cadence::Geometric.keeps(t, 10)).collect();
        assert_eq!(kept, vec![0, 1, 2, 4, 8, 10]);
        assert_eq!(Cadence::Every(3).to_string(), "every:3");
    }

    #[test]
    fn algorithm_ids_round_trip() {
        for a in AlgorithmId::ALL {
            assert_eq!(a.as_str().parse::<AlgorithmId>().unwrap(), a);
        }
        assert!(matches!("admm".parse::<AlgorithmId>(), Err(Error::EmbeddingUnavailable(_))));
    }
}
