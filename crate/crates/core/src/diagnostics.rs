//! Per-snapshot measurements: consensus error around the pi-weighted
//! average, objective gap, state growth, tau decay and the terms of the
//! one-step descent inequality.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::abs_prob::AbsProbSequence;
use crate::engine::{Snapshot, StateBlock, Trajectory};
use crate::error::{Error, Result};
use crate::matrix::{mat_mul, tau_unchecked, Kind};
use crate::problem::{ArgminSet, ConvexProblem};
use crate::sequence::MatrixSequence;

pub const TAU_PROFILE_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: usize,
    /// `max_i || x_i(t) - X(t)^T pi(t) ||_2`.
    pub consensus_error: f64,
    /// `f(X(t)^T pi(t)) - f(x*)`, when a minimizer oracle exists.
    pub objective_gap: Option<f64>,
    /// `max_i dist(x_i(t), argmin)`, when a minimizer oracle exists.
    pub max_distance: Option<f64>,
    /// `||X(t)||_inf`.
    pub state_norm: f64,
    pub sqrt_t_ratio: f64,
}

pub struct MeasureContext<'a> {
    pub problem: &'a dyn ConvexProblem,
    /// Needed unless the snapshot carries push-sum masses.
    pub abs_prob: Option<&'a AbsProbSequence>,
    pub argmin: Option<&'a ArgminSet>,
}

/// Weights defining the network average at a snapshot: `y / 1^T y` for
/// push-sum states, `pi(t)` otherwise.
pub fn averaging_weights(snapshot: &Snapshot, abs_prob: Option<&AbsProbSequence>) -> Result<Vec<f64>> {
    if let Some(y) = &snapshot.mass {
        let total: f64 = y.iter().sum();
        return Ok(y.iter().map(|v| v / total).collect());
    }
    let pi = abs_prob.ok_or_else(|| Error::InvalidParameter("measuring needs absolute probability vectors".into()))?;
    Ok(pi.at(snapshot.t)?.as_slice().to_vec())
}

pub fn consensus_error(x: &StateBlock, weights: &[f64]) -> f64 {
    let avg = x.weighted_average(weights);
    (0..x.n())
        .map(|i| x.row(i).iter().zip(&avg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub fn measure(snapshot: &Snapshot, ctx: &MeasureContext<'_>) -> Result<DiagnosticsRow> {
    let weights = averaging_weights(snapshot, ctx.abs_prob)?;
    let x = &snapshot.iterates;
    let avg = x.weighted_average(&weights);
    let (objective_gap, max_distance) = match ctx.argmin {
        Some(set) => {
            let best = ctx.problem.global_cost(&set.midpoint());
            let dist = (0..x.n()).map(|i| set.distance(x.row(i))).fold(0.0, f64::max);
            (Some(ctx.problem.global_cost(&avg) - best), Some(dist))
        }
        None => (None, None),
    };
    let state_norm = x.inf_norm();
    Ok(DiagnosticsRow {
        t: snapshot.t,
        consensus_error: consensus_error(x, &weights),
        objective_gap,
        max_distance,
        state_norm,
        sqrt_t_ratio: state_norm / ((snapshot.t + 1) as f64).sqrt(),
    })
}

pub fn measure_trajectory(traj: &Trajectory, ctx: &MeasureContext<'_>) -> Result<Vec<DiagnosticsRow>> {
    traj.snapshots.iter().map(|s| measure(s, ctx)).collect()
}

/// CSV with columns `t, consensus_error, objective_gap, state_norm,
/// sqrt_t_ratio`; a missing gap is an empty field.
pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from("t,consensus_error,objective_gap,state_norm,sqrt_t_ratio\n");
    for r in rows {
        let gap = r.objective_gap.map(|g| g.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", r.t, r.consensus_error, gap, r.state_norm, r.sqrt_t_ratio);
    }
    out
}

/// Right-hand side of the state growth bound at a snapshot:
/// `||X(0)||_inf + max_i L_i * sqrt(sum_k ||Delta(k)||_inf^2) * sqrt(t)`.
pub fn sqrt_t_bound(snapshot: &Snapshot, x0_norm: f64, max_l: f64) -> f64 {
    x0_norm + max_l * snapshot.step_sq_sum.sqrt() * (snapshot.t as f64).sqrt()
}

/// Smallest `bound - ||X(t)||_inf` over the trajectory; negative means the
/// bound is violated somewhere.
pub fn sqrt_t_margin(traj: &Trajectory, max_l: f64) -> f64 {
    let x0 = traj.first().iterates.inf_norm();
    traj.snapshots
        .iter()
        .map(|s| sqrt_t_bound(s, x0, max_l) - s.iterates.inf_norm())
        .fold(f64::INFINITY, f64::min)
}

/// `(t, tau(P(t, 0)))` for `t` in `0..=t_max`.
pub fn tau_decay_profile(seq: &MatrixSequence, t_max: usize) -> Result<Vec<(usize, f64)>> {
    if t_max > TAU_PROFILE_MAX {
        return Err(Error::InvalidParameter(format!("t_max {t_max} exceeds {TAU_PROFILE_MAX}")));
    }
    if !seq.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: seq.kind() });
    }
    let n = seq.n();
    let mut acc = crate::matrix::StochasticMatrix::identity(n).as_slice().to_vec();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        out.push((t, tau_unchecked(n, &acc)));
        acc = mat_mul(n, seq.at(t).as_slice(), &acc);
    }
    Ok(out)
}

/// Terms of the one-step bound
/// `||xbar(t+1) - u||^2 <= base + t1 + t2 + t3 + t4` with
/// `xbar(t) = X(t)^T pi(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStepTerms {
    /// `||xbar(t) - u||_2^2`.
    pub base: f64,
    /// `||Delta||_inf^2 (max L_i)^2`.
    pub t1: f64,
    /// `(2/N) ||Delta pi(t+1)||_1 sum_i (f_i(u) - f_i(xbar))`.
    pub t2: f64,
    /// `2 max_{i,j} |pi_i delta_i - pi_j delta_j| sum_i L_i ||xbar - u||_2`.
    pub t3: f64,
    /// `4 ||Delta||_inf sum_i L_i ||X^T (pi(t) - e_i)||_2`.
    pub t4: f64,
}

impl OneStepTerms {
    pub fn rhs(&self) -> f64 {
        self.base + self.t1 + self.t2 + self.t3 + self.t4
    }
}

pub fn one_step_terms(
    problem: &dyn ConvexProblem,
    x: &StateBlock,
    pi_t: &[f64],
    pi_next: &[f64],
    delta: &[f64],
    u: &[f64],
) -> OneStepTerms {
    let n = x.n();
    let xbar = x.weighted_average(pi_t);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let d_u = dist(&xbar, u);
    let delta_inf = delta.iter().copied().fold(0.0, f64::max);
    let max_l = problem.max_l();
    let weighted: Vec<f64> = pi_next.iter().zip(delta).map(|(p, d)| p * d).collect();
    let spread = weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max) - weighted.iter().copied().fold(f64::INFINITY, f64::min);
    let l_sum: f64 = (0..n).map(|i| problem.l_bound(i)).sum();
    let cost_diff: f64 = (0..n).map(|i| problem.cost(i, u) - problem.cost(i, &xbar)).sum();
    let t4_sum: f64 = (0..n).map(|i| problem.l_bound(i) * dist(&xbar, x.row(i))).sum();
    OneStepTerms {
        base: d_u * d_u,
        t1: delta_inf * delta_inf * max_l * max_l,
        t2: 2.0 / n as f64 * weighted.iter().map(|v| v.abs()).sum::<f64>() * cost_diff,
        t3: 2.0 * spread * l_sum * d_u,
        t4: 4.0 * delta_inf * t4_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abs_prob::AbsProbMethod;
    use crate::matrix::{separation_example, ProbabilityVector, StochasticMatrix};
    use crate::problem::L1Median;

    fn snapshot(rows: &[Vec<f64>], t: usize) -> Snapshot {
        Snapshot { t, iterates: StateBlock::from_rows(rows).unwrap(), mass: None, step_sum: 0.0, step_sq_sum: 0.0, descent_steps: 0 }
    }

    #[test]
    fn equal_rows_have_zero_consensus_error() {
        let x = StateBlock::from_rows(&vec![vec![1.5, -2.0]; 3]).unwrap();
        assert_eq!(consensus_error(&x, &[0.2, 0.3, 0.5]), 0.0);
    }

    #[test]
    fn objective_gap_example() {
        let p = L1Median::new(vec![vec![0.0], vec![1.0], vec![4.0]]).unwrap();
        let pi = AbsProbSequence::stationary(ProbabilityVector::uniform(3), AbsProbMethod::UniformDoubly);
        let set = p.argmin().unwrap();
        let ctx = MeasureContext { problem: &p, abs_prob: Some(&pi), argmin: Some(&set) };
        let row = measure(&snapshot(&p.default_x0(), 0), &ctx).unwrap();
        assert!((row.objective_gap.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(row.state_norm, 4.0);
        assert_eq!(row.max_distance, Some(3.0));
    }

    #[test]
    fn push_snapshots_use_masses() {
        let p = L1Median::new(vec![vec![0.0], vec![4.0]]).unwrap();
        let mut s = snapshot(&[vec![0.0], vec![4.0]], 3);
        s.mass = Some(vec![3.0, 1.0]);
        let ctx = MeasureContext { problem: &p, abs_prob: None, argmin: None };
        let row = measure(&s, &ctx).unwrap();
        // average is 1, so agent 1 sits 3 away
        assert_eq!(row.consensus_error, 3.0);
        assert!(measure(&snapshot(&[vec![0.0], vec![4.0]], 0), &ctx).is_err());
    }

    #[test]
    fn horizon_is_checked() {
        let p = L1Median::new(vec![vec![0.0], vec![4.0]]).unwrap();
        let m = StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]], Kind::Row).unwrap();
        let seq = MatrixSequence::explicit(vec![m]).unwrap();
        let report = crate::graph::check_a1(&seq, 4, 4);
        let pi = crate::abs_prob::compute_abs_prob(&seq, Some(&report), 2, 1e-10).unwrap();
        let ctx = MeasureContext { problem: &p, abs_prob: Some(&pi), argmin: None };
        assert!(matches!(measure(&snapshot(&[vec![0.0], vec![4.0]], 9), &ctx), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn tau_profiles() {
        let uni = tau_decay_profile(&MatrixSequence::constant(StochasticMatrix::uniform(3)), 5).unwrap();
        assert_eq!(uni[0].1, 1.0);
        assert!(uni[1..].iter().all(|&(_, tau)| tau < 1e-15));
        let id = tau_decay_profile(&MatrixSequence::constant(StochasticMatrix::identity(3)), 5).unwrap();
        assert!(id.iter().all(|&(_, tau)| tau == 1.0));
        assert!(tau_decay_profile(&MatrixSequence::constant(separation_example()), 1001).is_err());
    }

    #[test]
    fn csv_layout() {
        let row = DiagnosticsRow { t: 2, consensus_error: 0.5, objective_gap: None, max_distance: None, state_norm: 1.0, sqrt_t_ratio: 0.25 };
        assert_eq!(diagnostics_csv(&[row]), "t,consensus_error,objective_gap,state_norm,sqrt_t_ratio\n2,0.5,,1,0.25\n");
    }
}
