use crate::error::{Error, Result};
use crate::matrix::{mat_mul, Kind, StochasticMatrix};
use crate::problem::ConvexProblem;
use crate::schedule::{StepRule, StepSchedule};
use crate::sequence::MatrixSequence;

use super::{descend, mix_into, AlgorithmId, Recorder, RunOptions, StateBlock, Trajectory, SKIP_DESCENT_THRESHOLD, ZERO_DIVISOR_TOL};

/// Everything a runner needs besides the problem and run options.
#[derive(Debug, Clone)]
pub enum RunnerInputs {
    Unified { seq: MatrixSequence, schedule: StepSchedule, x0: Vec<Vec<f64>> },
    Dgd { seq: MatrixSequence, schedule: StepSchedule, x0: Vec<Vec<f64>> },
    DgdPost { seq: MatrixSequence, schedule: StepSchedule, x0: Vec<Vec<f64>> },
    RowStochastic { p: StochasticMatrix, c: f64, alpha: f64, x0: Vec<Vec<f64>> },
    SubgradientPush { a_seq: MatrixSequence, c: f64, alpha: f64, w0: Vec<Vec<f64>>, y0: Vec<f64> },
    PushFirst { a_seq: MatrixSequence, c: f64, alpha: f64, w0: Vec<Vec<f64>>, y0: Vec<f64> },
}

impl RunnerInputs {
    pub fn algorithm(&self) -> AlgorithmId {
        match self {
            RunnerInputs::Unified { .. } => AlgorithmId::Unified,
            RunnerInputs::Dgd { .. } => AlgorithmId::Dgd,
            RunnerInputs::DgdPost { .. } => AlgorithmId::DgdPost,
            RunnerInputs::RowStochastic { .. } => AlgorithmId::RowStochastic,
            RunnerInputs::SubgradientPush { .. } => AlgorithmId::SubgradientPush,
            RunnerInputs::PushFirst { .. } => AlgorithmId::PushFirst,
        }
    }
}

pub fn run(problem: &dyn ConvexProblem, inputs: &RunnerInputs, opts: &RunOptions) -> Result<Trajectory> {
    match inputs {
        RunnerInputs::Unified { seq, schedule, x0 } => run_unified(problem, seq, schedule, x0, opts),
        RunnerInputs::Dgd { seq, schedule, x0 } => run_dgd(problem, seq, schedule, x0, opts),
        RunnerInputs::DgdPost { seq, schedule, x0 } => run_dgd_post(problem, seq, schedule, x0, opts),
        RunnerInputs::RowStochastic { p, c, alpha, x0 } => run_row_stochastic(problem, p, *c, *alpha, x0, opts),
        RunnerInputs::SubgradientPush { a_seq, c, alpha, w0, y0 } => {
            run_subgradient_push(problem, a_seq, *c, *alpha, w0, y0, opts)
        }
        RunnerInputs::PushFirst { a_seq, c, alpha, w0, y0 } => run_push_first(problem, a_seq, *c, *alpha, w0, y0, opts),
    }
}

fn initial_block(problem: &dyn ConvexProblem, x0: &[Vec<f64>]) -> Result<StateBlock> {
    if x0.len() != problem.n() {
        return Err(Error::DimensionMismatch { expected: problem.n(), found: x0.len() });
    }
    let x = StateBlock::from_rows(x0)?;
    if x.d() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: x.d() });
    }
    Ok(x)
}

fn check_n(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn subgradients(problem: &dyn ConvexProblem, x: &StateBlock, g: &mut StateBlock) {
    for i in 0..x.n() {
        problem.subgradient_into(i, x.row(i), g.row_mut(i));
    }
}

pub(crate) fn power_step(c: f64, alpha: f64, t: usize) -> f64 {
    c * ((t + 1) as f64).powf(alpha)
}

fn check_power(c: f64, alpha: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step rule needs c > 0 and finite alpha, got c={c}, alpha={alpha}")))
    }
}

fn check_masses(y: &[f64], t: usize) -> Result<()> {
    match y.iter().position(|v| !(*v > 0.0)) {
        Some(agent) => Err(Error::NonpositiveMass { t, agent, value: y[agent] }),
        None => Ok(()),
    }
}

fn mix_then_descend(
    algorithm: AlgorithmId,
    problem: &dyn ConvexProblem,
    seq: &MatrixSequence,
    schedule: &StepSchedule,
    x0: &[Vec<f64>],
    opts: &RunOptions,
) -> Result<Trajectory> {
    if !seq.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: seq.kind() });
    }
    check_n(problem.n(), seq.n())?;
    check_n(problem.n(), schedule.n())?;
    let mut x = initial_block(problem, x0)?;
    let mut next = x.clone();
    let mut g = x.clone();
    let mut rec = Recorder::new(opts);
    for t in 0..opts.steps {
        rec.record(t, &x, None)?;
        subgradients(problem, &x, &mut g);
        let delta = schedule.delta_at(t)?;
        mix_into(&seq.at(t), &x, &mut next);
        descend(&mut next, &delta, &g);
        rec.add_step(&delta);
        std::mem::swap(&mut x, &mut next);
    }
    rec.record(opts.steps, &x, None)?;
    Ok(rec.finish(algorithm))
}

/// `X(t+1) = P(t) X(t) - Delta(t) G(t)` for any row-stochastic sequence and
/// per-agent schedule.
pub fn run_unified(
    problem: &dyn ConvexProblem,
    seq: &MatrixSequence,
    schedule: &StepSchedule,
    x0: &[Vec<f64>],
    opts: &RunOptions,
) -> Result<Trajectory> {
    mix_then_descend(AlgorithmId::Unified, problem, seq, schedule, x0, opts)
}

/// Decentralized subgradient descent: doubly-stochastic mixing and one
/// step size shared by every agent.
pub fn run_dgd(
    problem: &dyn ConvexProblem,
    seq: &MatrixSequence,
    schedule: &StepSchedule,
    x0: &[Vec<f64>],
    opts: &RunOptions,
) -> Result<Trajectory> {
    if seq.kind() != Kind::Doubly {
        return Err(Error::KindMismatch { expected: Kind::Doubly, found: seq.kind() });
    }
    let common = match schedule.rule() {
        StepRule::CommonPower { .. } => true,
        StepRule::PerAgentExplicit { table } => table.iter().all(|r| r.iter().all(|v| *v == r[0])),
        _ => false,
    };
    if !common {
        return Err(Error::InvalidParameter("dgd needs an agent-independent step size".into()));
    }
    mix_then_descend(AlgorithmId::Dgd, problem, seq, schedule, x0, opts)
}

/// Descend, then mix: `x_i(t+1) = sum_j p_ij(t) (x_j(t) - delta_j(t) g_j(t))`.
pub fn run_dgd_post(
    problem: &dyn ConvexProblem,
    seq: &MatrixSequence,
    schedule: &StepSchedule,
    x0: &[Vec<f64>],
    opts: &RunOptions,
) -> Result<Trajectory> {
    if !seq.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: seq.kind() });
    }
    check_n(problem.n(), seq.n())?;
    check_n(problem.n(), schedule.n())?;
    let mut x = initial_block(problem, x0)?;
    let mut next = x.clone();
    let mut g = x.clone();
    let mut rec = Recorder::new(opts);
    for t in 0..opts.steps {
        rec.record(t, &x, None)?;
        subgradients(problem, &x, &mut g);
        let delta = schedule.delta_at(t)?;
        descend(&mut x, &delta, &g);
        mix_into(&seq.at(t), &x, &mut next);
        rec.add_step(&delta);
        std::mem::swap(&mut x, &mut next);
    }
    rec.record(opts.steps, &x, None)?;
    Ok(rec.finish(AlgorithmId::DgdPost))
}

/// Diagonals of `Z(t) = P^t` for `t` in `0..len`.
pub(crate) fn power_diagonals(p: &StochasticMatrix, len: usize) -> Vec<Vec<f64>> {
    let n = p.n();
    let mut z = StochasticMatrix::identity(n).as_slice().to_vec();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((0..n).map(|i| z[i * n + i]).collect());
        z = mat_mul(n, p.as_slice(), &z);
    }
    out
}

/// Per-agent steps `delta(t) / z_ii(t)` with the divisor rules applied.
pub(crate) fn divided_steps(c: f64, alpha: f64, t: usize, z_diag: &[f64], skip: bool) -> Result<Vec<f64>> {
    let base = power_step(c, alpha, t);
    z_diag
        .iter()
        .enumerate()
        .map(|(agent, &z)| {
            if skip {
                Ok(if z > SKIP_DESCENT_THRESHOLD { base / z } else { 0.0 })
            } else if z <= ZERO_DIVISOR_TOL {
                Err(Error::ZeroDiagonalDivisor { t, agent, value: z })
            } else {
                Ok(base / z)
            }
        })
        .collect()
}

/// Constant row-stochastic mixing with steps `c (t+1)^alpha / z_ii(t)`,
/// where `z_i(t+1) = sum_j p_ij z_j(t)` and `z_i(0) = e_i`.
pub fn run_row_stochastic(
    problem: &dyn ConvexProblem,
    p: &StochasticMatrix,
    c: f64,
    alpha: f64,
    x0: &[Vec<f64>],
    opts: &RunOptions,
) -> Result<Trajectory> {
    if !p.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: p.kind() });
    }
    check_power(c, alpha)?;
    check_n(problem.n(), p.n())?;
    let n = p.n();
    let mut x = initial_block(problem, x0)?;
    let mut next = x.clone();
    let mut g = x.clone();
    let mut z = StochasticMatrix::identity(n).as_slice().to_vec();
    let mut rec = Recorder::new(opts);
    for t in 0..opts.steps {
        rec.record(t, &x, None)?;
        let diag: Vec<f64> = (0..n).map(|i| z[i * n + i]).collect();
        let delta = divided_steps(c, alpha, t, &diag, opts.skip_descent_until_positive)?;
        subgradients(problem, &x, &mut g);
        mix_into(p, &x, &mut next);
        descend(&mut next, &delta, &g);
        rec.add_step(&delta);
        std::mem::swap(&mut x, &mut next);
        z = mat_mul(n, p.as_slice(), &z);
    }
    rec.record(opts.steps, &x, None)?;
    Ok(rec.finish(AlgorithmId::RowStochastic))
}

fn push_setup(
    problem: &dyn ConvexProblem,
    a_seq: &MatrixSequence,
    c: f64,
    alpha: f64,
    w0: &[Vec<f64>],
    y0: &[f64],
) -> Result<StateBlock> {
    if !a_seq.kind().is_column() {
        return Err(Error::KindMismatch { expected: Kind::Column, found: a_seq.kind() });
    }
    check_power(c, alpha)?;
    check_n(problem.n(), a_seq.n())?;
    check_n(problem.n(), y0.len())?;
    check_masses(y0, 0)?;
    initial_block(problem, w0)
}

fn ratios(w: &StateBlock, y: &[f64], z: &mut StateBlock) {
    for (i, yi) in y.iter().enumerate() {
        for (zv, wv) in z.row_mut(i).iter_mut().zip(w.row(i)) {
            *zv = wv / yi;
        }
    }
}

/// Subgradient-push: descend on the current ratio, then push both the
/// values and the masses through `A(t)`. Recorded iterates are `w / y`.
pub fn run_subgradient_push(
    problem: &dyn ConvexProblem,
    a_seq: &MatrixSequence,
    c: f64,
    alpha: f64,
    w0: &[Vec<f64>],
    y0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    let mut w = push_setup(problem, a_seq, c, alpha, w0, y0)?;
    let mut y = y0.to_vec();
    let mut z = w.clone();
    let mut g = w.clone();
    let mut rec = Recorder::new(opts);
    for t in 0..opts.steps {
        ratios(&w, &y, &mut z);
        rec.record(t, &z, Some(&y))?;
        subgradients(problem, &z, &mut g);
        let theta = power_step(c, alpha, t);
        let effective: Vec<f64> = y.iter().map(|yi| theta / yi).collect();
        descend(&mut w, &vec![theta; y.len()], &g);
        let a = a_seq.at(t);
        mix_into(&a, &w, &mut z);
        std::mem::swap(&mut w, &mut z);
        y = a.right_mul(&y);
        check_masses(&y, t + 1)?;
        rec.add_step(&effective);
    }
    ratios(&w, &y, &mut z);
    rec.record(opts.steps, &z, Some(&y))?;
    Ok(rec.finish(AlgorithmId::SubgradientPush))
}

/// Push first: `w(t+1) = A(t) w(t) - theta(t) g(t)` with `g` taken at the
/// pre-mix ratio `w(t) / y(t)`, and `y(t+1) = A(t) y(t)`.
pub fn run_push_first(
    problem: &dyn ConvexProblem,
    a_seq: &MatrixSequence,
    c: f64,
    alpha: f64,
    w0: &[Vec<f64>],
    y0: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    let mut w = push_setup(problem, a_seq, c, alpha, w0, y0)?;
    let mut y = y0.to_vec();
    let mut z = w.clone();
    let mut g = w.clone();
    let mut next = w.clone();
    let mut rec = Recorder::new(opts);
    for t in 0..opts.steps {
        ratios(&w, &y, &mut z);
        rec.record(t, &z, Some(&y))?;
        subgradients(problem, &z, &mut g);
        let theta = power_step(c, alpha, t);
        let a = a_seq.at(t);
        let y_next = a.right_mul(&y);
        check_masses(&y_next, t + 1)?;
        let effective: Vec<f64> = y_next.iter().map(|yi| theta / yi).collect();
        mix_into(&a, &w, &mut next);
        descend(&mut next, &vec![theta; y.len()], &g);
        std::mem::swap(&mut w, &mut next);
        y = y_next;
        rec.add_step(&effective);
    }
    ratios(&w, &y, &mut z);
    rec.record(opts.steps, &z, Some(&y))?;
    Ok(rec.finish(AlgorithmId::PushFirst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::separation_example;
    use crate::problem::L1Median;
    use crate::sequence::RandomFamily;

    fn median3() -> L1Median {
        L1Median::new(vec![vec![0.0], vec![1.0], vec![4.0]]).unwrap()
    }

    fn max_dist(traj: &Trajectory, target: f64) -> f64 {
        let s = traj.last();
        (0..s.iterates.n()).map(|i| (s.iterates.row(i)[0] - target).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_steps_is_just_x0() {
        let p = median3();
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(3));
        let s = StepSchedule::common_power(3, 1.0, -0.75).unwrap();
        let traj = run_dgd(&p, &seq, &s, &p.default_x0(), &RunOptions::new(0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.last().iterates.rows(), p.default_x0());
    }

    #[test]
    fn dgd_reaches_median() {
        let p = median3();
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(3));
        let s = StepSchedule::common_power(3, 1.0, -0.75).unwrap();
        let traj = run_dgd(&p, &seq, &s, &p.default_x0(), &RunOptions::new(100_000)).unwrap();
        assert!(max_dist(&traj, 1.0) <= 1e-2, "{}", max_dist(&traj, 1.0));
    }

    #[test]
    fn dgd_rejects_row_only_and_pi_scaled() {
        let p = median3();
        let row = MatrixSequence::constant(StochasticMatrix::uniform(3).with_kind(Kind::Row).unwrap());
        let s = StepSchedule::common_power(3, 1.0, -0.75).unwrap();
        assert!(matches!(run_dgd(&p, &row, &s, &p.default_x0(), &RunOptions::new(1)), Err(Error::KindMismatch { .. })));
        let uneven = StepSchedule::explicit(vec![vec![0.1, 0.2, 0.1]]).unwrap();
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(3));
        assert!(run_dgd(&p, &seq, &uneven, &p.default_x0(), &RunOptions::new(1)).is_err());
    }

    #[test]
    fn identical_agents_stay_identical() {
        let p = L1Median::new(vec![vec![2.0]; 3]).unwrap();
        let seq = MatrixSequence::seeded_random(3, Kind::Doubly, RandomFamily::Metropolis { edge_prob: 0.5 }, 3).unwrap();
        let s = StepSchedule::common_power(3, 1.0, -0.75).unwrap();
        let x0 = vec![vec![-1.0]; 3];
        let traj = run_dgd(&p, &seq, &s, &x0, &RunOptions::every(50, 1)).unwrap();
        let mut central = -1.0_f64;
        for snap in &traj.snapshots {
            assert!(snap.iterates.rows().iter().all(|v| (v[0] - central).abs() < 1e-12));
            let g = if central > 2.0 { 1.0 } else if central < 2.0 { -1.0 } else { 0.0 };
            central -= power_step(1.0, -0.75, snap.t) * g;
        }
    }

    #[test]
    fn dgd_post_pure_consensus_hits_pi_average() {
        let p = L1Median::new(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let seq = MatrixSequence::constant(separation_example());
        let traj = run_dgd_post(&p, &seq, &StepSchedule::zero(4), &p.default_x0(), &RunOptions::new(400)).unwrap();
        // pi = (0.2, 0.2, 0.4, 0.2)
        let want = 0.2 * 0.0 + 0.2 * 1.0 + 0.4 * 2.0 + 0.2 * 3.0;
        assert!(max_dist(&traj, want) < 1e-6);
    }

    #[test]
    fn identity_mixing_is_independent_descent() {
        let p = median3();
        let seq = MatrixSequence::constant(StochasticMatrix::identity(3));
        let s = StepSchedule::explicit(vec![vec![0.5; 3]]).unwrap();
        let traj = run_dgd_post(&p, &seq, &s, &[vec![1.0], vec![0.0], vec![4.25]], &RunOptions::every(2, 1)).unwrap();
        assert_eq!(traj.last().iterates.rows(), vec![vec![0.0], vec![1.0], vec![4.25]]);
    }

    #[test]
    fn row_stochastic_zero_diagonal_error_and_skip() {
        let p = L1Median::new(vec![vec![0.0]; 4]).unwrap();
        let x0 = vec![vec![1.0]; 4];
        let err = run_row_stochastic(&p, &separation_example(), 1.0, -0.75, &x0, &RunOptions::new(5)).unwrap_err();
        assert!(matches!(err, Error::ZeroDiagonalDivisor { t: 1, .. }));
        let opts = RunOptions { skip_descent_until_positive: true, ..RunOptions::new(50) };
        assert!(run_row_stochastic(&p, &separation_example(), 1.0, -0.75, &x0, &opts).is_ok());
    }

    #[test]
    fn power_diagonals_examples() {
        let z = power_diagonals(&StochasticMatrix::uniform(4), 3);
        assert_eq!(z[0], vec![1.0; 4]);
        assert!(z[1..].iter().flatten().all(|&v| (v - 0.25).abs() < 1e-15));
        let z = power_diagonals(&separation_example(), 200);
        for (a, b) in z[199].iter().zip([0.2, 0.2, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(z[1][0], 0.0);
    }

    #[test]
    fn single_agent_row_stochastic_is_centralized() {
        let p = L1Median::new(vec![vec![0.0]]).unwrap();
        let traj = run_row_stochastic(&p, &StochasticMatrix::identity(1), 1.0, -0.75, &[vec![3.0]], &RunOptions::every(3, 1)).unwrap();
        let mut x = 3.0_f64;
        for t in 0..3 {
            x -= power_step(1.0, -0.75, t) * x.signum();
        }
        assert_eq!(traj.last().iterates.row(0)[0], x);
    }

    #[test]
    fn push_variants_conserve_mass() {
        let p = L1Median::seeded(5, 2, 1).unwrap();
        let a = MatrixSequence::seeded_random(5, Kind::Column, RandomFamily::LazyDigraph { edge_prob: 0.3 }, 9).unwrap();
        let y0 = vec![1.0; 5];
        for traj in [
            run_subgradient_push(&p, &a, 1.0, -0.75, &p.default_x0(), &y0, &RunOptions::every(1000, 1)).unwrap(),
            run_push_first(&p, &a, 1.0, -0.75, &p.default_x0(), &y0, &RunOptions::every(1000, 1)).unwrap(),
        ] {
            for s in &traj.snapshots {
                let total: f64 = s.mass.as_ref().unwrap().iter().sum();
                assert!((total - 5.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn doubly_push_sum_keeps_unit_mass() {
        let p = median3();
        let a = MatrixSequence::constant(StochasticMatrix::uniform(3));
        let traj = run_subgradient_push(&p, &a, 1.0, -0.75, &p.default_x0(), &[1.0; 3], &RunOptions::every(20, 1)).unwrap();
        for s in &traj.snapshots {
            assert!(s.mass.as_ref().unwrap().iter().all(|&y| (y - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn pure_push_sum_reaches_ratio_consensus() {
        let p = L1Median::seeded(4, 2, 2).unwrap();
        let a = MatrixSequence::constant(separation_example().transpose());
        // A tiny c stands in for theta = 0, which the power rule excludes.
        let traj = run_push_first(&p, &a, 1e-300, -0.75, &p.default_x0(), &[1.0; 4], &RunOptions::new(500)).unwrap();
        let last = traj.last().iterates.rows();
        for r in &last[1..] {
            for (u, v) in r.iter().zip(&last[0]) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn push_rejects_bad_masses() {
        let p = median3();
        let a = MatrixSequence::constant(StochasticMatrix::uniform(3));
        let err = run_push_first(&p, &a, 1.0, -0.75, &p.default_x0(), &[1.0, 0.0, 1.0], &RunOptions::new(2)).unwrap_err();
        assert!(matches!(err, Error::NonpositiveMass { t: 0, agent: 1, .. }));
        let zero_row = StochasticMatrix::from_rows(&[vec![0.5, 0.5, 1.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 0.0]], Kind::Column).unwrap();
        let err = run_subgradient_push(&p, &MatrixSequence::constant(zero_row), 1.0, -0.75, &p.default_x0(), &[1.0; 3], &RunOptions::new(2)).unwrap_err();
        assert!(matches!(err, Error::NonpositiveMass { t: 1, agent: 2, .. }));
    }

    #[test]
    fn state_growth_bound_on_snapshots() {
        let p = L1Median::seeded(6, 3, 4).unwrap();
        let seq = MatrixSequence::seeded_random(6, Kind::Row, RandomFamily::Dense { min_weight: 0.1 }, 4).unwrap();
        let s = StepSchedule::explicit(vec![vec![0.3, 0.1, 0.2, 0.05, 0.4, 0.0]]).unwrap();
        let traj = run_unified(&p, &seq, &s, &p.default_x0(), &RunOptions::every(200, 1)).unwrap();
        let x0 = traj.first().iterates.inf_norm();
        for snap in &traj.snapshots {
            let linear = x0 + p.max_l() * snap.step_sum;
            let sqrt = x0 + p.max_l() * snap.step_sq_sum.sqrt() * (snap.t as f64).sqrt();
            assert!(snap.iterates.inf_norm() <= linear + 1e-9);
            assert!(linear <= sqrt + 1e-9);
        }
    }

    #[test]
    fn deterministic_reruns() {
        let p = L1Median::seeded(5, 2, 8).unwrap();
        let seq = MatrixSequence::seeded_random(5, Kind::Row, RandomFamily::LazyDigraph { edge_prob: 0.4 }, 21).unwrap();
        let s = StepSchedule::common_power(5, 1.0, -0.75).unwrap();
        let a = run_unified(&p, &seq, &s, &p.default_x0(), &RunOptions::new(300)).unwrap();
        let b = run_unified(&p, &seq, &s, &p.default_x0(), &RunOptions::new(300)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
