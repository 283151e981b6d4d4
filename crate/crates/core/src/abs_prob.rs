//! Absolute probability vectors: probability vectors `pi(t)` with
//! `pi(t+1)^T P(t) = pi(t)^T`. Under A1 they exist, are unique, and
//! `pi(t0)^T` is the common row of `lim_t P(t, t0)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Condition, ConditionReport};
use crate::matrix::{mat_mul, tau_unchecked, Kind, ProbabilityVector, StochasticMatrix, PRODUCT_TOL};
use crate::sequence::MatrixSequence;

pub const DEFAULT_TOL: f64 = 1e-10;
const PERRON_RESIDUAL: f64 = 1e-12;
const PERRON_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsProbMethod {
    BackwardLimit,
    PerronPower,
    UniformDoubly,
    PushsumMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsProbSequence {
    horizon: usize,
    /// `pi(0..=horizon+1)`; a single entry when `stationary`.
    vectors: Vec<ProbabilityVector>,
    /// `|| pi(t+1)^T P(t) - pi(t)^T ||_1` for `t` in `0..=horizon`.
    residuals: Vec<f64>,
    method: AbsProbMethod,
    stationary: bool,
    /// Factors multiplied to push tau below tolerance (backward limit only).
    pub factors_used: Option<usize>,
}

impl AbsProbSequence {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn method(&self) -> AbsProbMethod {
        self.method
    }

    /// True when one vector serves every `t` (constant or doubly-stochastic
    /// sequences); such sequences answer `at(t)` for any `t`.
    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn at(&self, t: usize) -> Result<&ProbabilityVector> {
        if self.stationary {
            return Ok(&self.vectors[0]);
        }
        self.vectors.get(t).ok_or(Error::HorizonExceeded { t, horizon: self.horizon + 1 })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest entry over `pi(0..=horizon)`.
    pub fn min_entry(&self) -> f64 {
        let last = if self.stationary { 0 } else { self.horizon };
        self.vectors[..=last].iter().map(ProbabilityVector::min).fold(f64::INFINITY, f64::min)
    }

    /// A constant sequence carrying a single vector.
    pub fn stationary(pi: ProbabilityVector, method: AbsProbMethod) -> Self {
        Self { horizon: 0, vectors: vec![pi], residuals: vec![0.0], method, stationary: true, factors_used: None }
    }

    /// CSV with columns `t, pi_0..pi_{N-1}, residual`.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",pi_{i}");
        }
        out.push_str(",residual\n");
        for t in 0..=self.horizon {
            let _ = write!(out, "{t}");
            let pi = self.at(t).expect("t within horizon");
            for v in pi.as_slice() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.residuals.get(t).copied().unwrap_or(0.0));
        }
        out
    }
}

fn l1_residual(pi_next: &[f64], p: &StochasticMatrix, pi: &[f64]) -> f64 {
    p.left_mul(pi_next).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

fn require_a1(a1: Option<&ConditionReport>) -> Result<usize> {
    let report = a1.ok_or_else(|| Error::PreconditionA1("no A1 report supplied".into()))?;
    if report.condition != Condition::A1 {
        return Err(Error::PreconditionA1(format!("report is for {:?}, not A1", report.condition)));
    }
    if !report.holds {
        return Err(Error::PreconditionA1(report.failure_reason.clone()));
    }
    Ok(report.witness_t.unwrap_or(1).max(1))
}

/// Picks the cheapest exact method: uniform for doubly-stochastic
/// sequences, power iteration for constant ones, the backward limit
/// otherwise.
pub fn compute_abs_prob(
    seq: &MatrixSequence,
    a1: Option<&ConditionReport>,
    horizon: usize,
    tol: f64,
) -> Result<AbsProbSequence> {
    let method = if seq.kind() == Kind::Doubly {
        AbsProbMethod::UniformDoubly
    } else if seq.is_constant() {
        AbsProbMethod::PerronPower
    } else {
        AbsProbMethod::BackwardLimit
    };
    compute_abs_prob_with(seq, a1, horizon, tol, method)
}

pub fn compute_abs_prob_with(
    seq: &MatrixSequence,
    a1: Option<&ConditionReport>,
    horizon: usize,
    tol: f64,
    method: AbsProbMethod,
) -> Result<AbsProbSequence> {
    let witness = require_a1(a1)?;
    if !seq.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: seq.kind() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    match method {
        AbsProbMethod::UniformDoubly => {
            if seq.kind() != Kind::Doubly {
                return Err(Error::KindMismatch { expected: Kind::Doubly, found: seq.kind() });
            }
            Ok(AbsProbSequence::stationary(ProbabilityVector::uniform(seq.n()), method))
        }
        AbsProbMethod::PerronPower => perron_power(seq),
        AbsProbMethod::BackwardLimit => backward_limit(seq, witness, horizon, tol),
        AbsProbMethod::PushsumMass => Err(Error::InvalidParameter("use pushsum_abs_prob for push-sum masses".into())),
    }
}

fn perron_power(seq: &MatrixSequence) -> Result<AbsProbSequence> {
    if !seq.is_constant() {
        return Err(Error::InvalidParameter("power iteration needs a constant sequence".into()));
    }
    let p = seq.at(0);
    let n = p.n();
    let mut v = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..PERRON_MAX_ITERS {
        let mut next = p.left_mul(&v);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        residual = l1_residual(&next, &p, &next);
        v = next;
        if residual < PERRON_RESIDUAL {
            break;
        }
    }
    if residual >= PERRON_RESIDUAL {
        return Err(Error::NoConvergence { t0: 0, max_factors: PERRON_MAX_ITERS, tau: residual, tol: PERRON_RESIDUAL });
    }
    let mut out = AbsProbSequence::stationary(ProbabilityVector::with_tol(v, PRODUCT_TOL)?, AbsProbMethod::PerronPower);
    out.residuals = vec![residual];
    Ok(out)
}

fn backward_limit(seq: &MatrixSequence, witness: usize, horizon: usize, tol: f64) -> Result<AbsProbSequence> {
    let n = seq.n();
    let max_factors = 100 * witness;
    let start = horizon + 1;

    // Extend P(t_end, start) = P(t_end - 1) ... P(start) until it is nearly
    // rank one. Every earlier t0 reuses the same t_end, so
    // P(t_end, t0) = P(t_end, t0 + 1) P(t0) and the extracted vectors satisfy
    // the stationarity relation up to roundoff.
    let mut acc = identity(n);
    let mut factors = 0;
    let mut tau = 1.0;
    while factors == 0 || tau >= tol {
        if factors == max_factors {
            return Err(Error::NoConvergence { t0: start, max_factors, tau, tol });
        }
        acc = mat_mul(n, seq.at(start + factors).as_slice(), &acc);
        factors += 1;
        tau = tau_unchecked(n, &acc);
    }

    let mut vectors = vec![ProbabilityVector::uniform(n); start + 1];
    vectors[start] = ProbabilityVector::with_tol(column_mean(n, &acc), PRODUCT_TOL)?;
    for t0 in (0..start).rev() {
        acc = mat_mul(n, &acc, seq.at(t0).as_slice());
        vectors[t0] = ProbabilityVector::with_tol(column_mean(n, &acc), PRODUCT_TOL)?;
    }
    let residuals = (0..=horizon)
        .map(|t| l1_residual(vectors[t + 1].as_slice(), &seq.at(t), vectors[t].as_slice()))
        .collect();
    Ok(AbsProbSequence {
        horizon,
        vectors,
        residuals,
        method: AbsProbMethod::BackwardLimit,
        stationary: false,
        factors_used: Some(factors),
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    (0..n).for_each(|i| m[i * n + i] = 1.0);
    m
}

fn column_mean(n: usize, m: &[f64]) -> Vec<f64> {
    (0..n).map(|j| (0..n).map(|i| m[i * n + j]).sum::<f64>() / n as f64).collect()
}

/// `diag(y_next)^-1 A diag(y_now)`, row-stochastic whenever
/// `y_next = A y_now`.
pub fn induced_row_stochastic(a: &StochasticMatrix, y_now: &[f64], y_next: &[f64]) -> Result<StochasticMatrix> {
    if !a.kind().is_column() {
        return Err(Error::KindMismatch { expected: Kind::Column, found: a.kind() });
    }
    let n = a.n();
    for (y, t) in [(y_now, 0), (y_next, 1)] {
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if let Some((agent, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonpositiveMass { t, agent, value });
        }
    }
    let ay = a.right_mul(y_now);
    for (agent, (&expected, &found)) in ay.iter().zip(y_next).enumerate() {
        if (expected - found).abs() > 1e-12 * expected.abs().max(1.0) {
            return Err(Error::MassMismatch { agent, expected, found });
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = a.get(i, j) * y_now[j] / y_next[i];
        }
    }
    StochasticMatrix::validate_with_tol(n, data, Kind::Row, PRODUCT_TOL)
}

/// Masses `Y(0..=len)` under `Y(t+1) = A(t) Y(t)`.
pub fn pushsum_masses(a_seq: &MatrixSequence, y0: &[f64], len: usize) -> Result<Vec<Vec<f64>>> {
    if !a_seq.kind().is_column() {
        return Err(Error::KindMismatch { expected: Kind::Column, found: a_seq.kind() });
    }
    if y0.len() != a_seq.n() {
        return Err(Error::DimensionMismatch { expected: a_seq.n(), found: y0.len() });
    }
    let mut ys = Vec::with_capacity(len + 1);
    ys.push(y0.to_vec());
    for t in 0..=len {
        let y = &ys[t];
        if let Some((agent, &value)) = y.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonpositiveMass { t, agent, value });
        }
        if t == len {
            break;
        }
        let next = a_seq.at(t).right_mul(y);
        ys.push(next);
    }
    Ok(ys)
}

/// The induced row-stochastic sequence `P(0..len)` as an explicit rule.
pub fn induced_sequence(a_seq: &MatrixSequence, y0: &[f64], len: usize) -> Result<MatrixSequence> {
    let ys = pushsum_masses(a_seq, y0, len)?;
    let ms = (0..len.max(1))
        .map(|t| induced_row_stochastic(&a_seq.at(t), &ys[t], &ys[t + 1]))
        .collect::<Result<Vec<_>>>()?;
    MatrixSequence::explicit(ms)
}

/// `pi(t) = Y(t) / 1^T Y(0)` for the push-sum masses.
pub fn pushsum_abs_prob(a_seq: &MatrixSequence, y0: &[f64], horizon: usize) -> Result<AbsProbSequence> {
    let ys = pushsum_masses(a_seq, y0, horizon + 1)?;
    let total: f64 = y0.iter().sum();
    let vectors = ys
        .iter()
        .map(|y| ProbabilityVector::with_tol(y.iter().map(|v| v / total).collect(), PRODUCT_TOL))
        .collect::<Result<Vec<_>>>()?;
    let residuals = (0..=horizon)
        .map(|t| {
            let p = induced_row_stochastic(&a_seq.at(t), &ys[t], &ys[t + 1])?;
            Ok(l1_residual(vectors[t + 1].as_slice(), &p, vectors[t].as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbsProbSequence {
        horizon,
        vectors,
        residuals,
        method: AbsProbMethod::PushsumMass,
        stationary: false,
        factors_used: None,
    })
}
