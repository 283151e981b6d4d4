use std::sync::Arc;

use consensus_subgrad::abs_prob::{induced_sequence, pushsum_masses};
use consensus_subgrad::diagnostics::one_step_terms;
use consensus_subgrad::engine::{unified_step, AgentStates, StateBlock};
use consensus_subgrad::graph::{graph_from_matrix, strongly_connected};
use consensus_subgrad::matrix::separation_example;
use consensus_subgrad::schedule::audit_assumptions;
use consensus_subgrad::{
    backward_product, check_a1, check_a1_prime, compute_abs_prob, ergodicity_coefficient, pushsum_abs_prob,
    ConvexProblem, Kind, L1Median, MatrixSequence, RandomFamily, StepSchedule, StochasticMatrix,
};
use proptest::prelude::*;

/// Row-stochastic matrix from raw weights; `mask` zeroes entries, keeping
/// at least one positive entry per row.
fn row_matrix(n: usize, raw: &[f64], mask: &[bool]) -> StochasticMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = (0..n).map(|j| if mask[i * n + j] { 0.0 } else { raw[i * n + j] + 1e-3 }).collect();
            if r.iter().all(|&v| v == 0.0) {
                r[i] = 1.0;
            }
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::from_rows(&rows, Kind::Row).unwrap()
}

fn arb_row_matrix() -> impl Strategy<Value = StochasticMatrix> {
    (2usize..=6).prop_flat_map(|n| {
        (Just(n), prop::collection::vec(0.0f64..1.0, n * n), prop::collection::vec(prop::bool::weighted(0.3), n * n))
            .prop_map(|(n, raw, mask)| row_matrix(n, &raw, &mask))
    })
}

fn arb_pair() -> impl Strategy<Value = (StochasticMatrix, StochasticMatrix)> {
    (2usize..=6).prop_flat_map(|n| {
        let side = (prop::collection::vec(0.0f64..1.0, n * n), prop::collection::vec(prop::bool::weighted(0.3), n * n));
        (Just(n), side.clone(), side).prop_map(|(n, (r1, m1), (r2, m2))| (row_matrix(n, &r1, &m1), row_matrix(n, &r2, &m2)))
    })
}

fn positive_power(p: &StochasticMatrix, limit: usize) -> Option<usize> {
    let mut acc = p.clone();
    for k in 1..=limit {
        if acc.is_positive() {
            return Some(k);
        }
        acc = p.mul(&acc).unwrap();
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tau_is_a_unit_interval_value(p in arb_row_matrix()) {
        let t = ergodicity_coefficient(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
    }

    #[test]
    fn tau_is_submultiplicative((p1, p2) in arb_pair()) {
        let prod = ergodicity_coefficient(&p1.mul(&p2).unwrap()).unwrap();
        let bound = ergodicity_coefficient(&p1).unwrap() * ergodicity_coefficient(&p2).unwrap();
        prop_assert!(prod <= bound + 1e-12, "{prod} > {bound}");
    }

    #[test]
    fn tau_bounds_mean_zero_contraction(p in arb_row_matrix(), raw in prop::collection::vec(-1.0f64..1.0, 6)) {
        let n = p.n();
        let mean = raw[..n].iter().sum::<f64>() / n as f64;
        let u: Vec<f64> = raw[..n].iter().map(|v| v - mean).collect();
        let lhs: f64 = p.left_mul(&u).iter().map(|v| v.abs()).sum();
        let rhs = ergodicity_coefficient(&p).unwrap() * u.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    #[test]
    fn backward_products_compose(seed in any::<u64>(), n in 2usize..=5, t0 in 0usize..10, a in 0usize..10, b in 0usize..10) {
        let seq = MatrixSequence::seeded_random(n, Kind::Row, RandomFamily::Dense { min_weight: 0.01 }, seed).unwrap();
        let (t1, t2) = (t0 + a, t0 + a + b);
        let whole = backward_product(&seq, t0, t2).unwrap().matrix;
        let split = backward_product(&seq, t1, t2).unwrap().matrix.mul(&backward_product(&seq, t0, t1).unwrap().matrix).unwrap();
        for (x, y) in whole.as_slice().iter().zip(split.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn products_of_irreducible_positive_diagonal_factors_fill_rows(seed in any::<u64>(), n in 2usize..=6) {
        let seq = MatrixSequence::seeded_random(n, Kind::Row, RandomFamily::LazyDigraph { edge_prob: 0.6 }, seed).unwrap();
        let factors: Vec<StochasticMatrix> = (0..n - 1).map(|t| seq.at(t).into_owned()).collect();
        prop_assume!(factors.iter().all(|m| strongly_connected(&graph_from_matrix(m))));
        let mut acc = StochasticMatrix::identity(n);
        for (k, m) in factors.iter().enumerate() {
            acc = m.mul(&acc).unwrap();
            for i in 0..n {
                let positive = acc.row(i).iter().filter(|&&v| v > 0.0).count();
                prop_assert!(positive >= k + 2, "row {i} of a {}-fold product has {positive} positive entries", k + 1);
            }
        }
    }

    #[test]
    fn a1_prime_implies_a1(seed in any::<u64>(), n in 2usize..=5, p in 0.2f64..0.6) {
        let seq = MatrixSequence::seeded_random(n, Kind::Row, RandomFamily::LazyDigraph { edge_prob: p }, seed).unwrap();
        let t0_max = n;
        let prime = check_a1_prime(&seq, t0_max, 4);
        if prime.holds {
            let a1 = check_a1(&seq, (n - 1) * t0_max, 4);
            prop_assert!(a1.holds, "A1' holds but A1 fails: {}", a1.failure_reason);
        }
    }

    #[test]
    fn a1_witness_of_constant_primitive_matrix_is_its_exponent(p in arb_row_matrix()) {
        let n = p.n();
        let wielandt = n * n - 2 * n + 2;
        let k = positive_power(&p, wielandt);
        let report = check_a1(&MatrixSequence::constant(p), n * n, 4);
        match k {
            Some(k) => {
                prop_assert!(report.holds);
                prop_assert_eq!(report.witness_t, Some(k));
            }
            None => prop_assert!(!report.holds),
        }
    }

    #[test]
    fn tiny_entries_count_as_edges(p in arb_row_matrix()) {
        let n = p.n();
        let mut rows = p.rows();
        let zero = (0..n * n).find(|&k| rows[k / n][k % n] == 0.0);
        prop_assume!(zero.is_some());
        let k = zero.unwrap();
        let before = graph_from_matrix(&p);
        rows[k / n][k % n] = 1e-300;
        let bumped = StochasticMatrix::from_rows(&rows, Kind::Row).unwrap();
        let after = graph_from_matrix(&bumped);
        prop_assert_eq!(after.edge_count(), before.edge_count() + 1);
    }

    #[test]
    fn abs_prob_residual_and_lower_bound(seed in any::<u64>(), n in 2usize..=5) {
        let seq = MatrixSequence::seeded_random(n, Kind::Row, RandomFamily::Dense { min_weight: 0.05 }, seed).unwrap();
        let report = check_a1(&seq, n * n, 60);
        prop_assert!(report.holds);
        let pi = compute_abs_prob(&seq, Some(&report), 50, 1e-10).unwrap();
        prop_assert!(pi.max_residual() <= 1e-10);
        let t = report.witness_t.unwrap() as i32;
        prop_assert!(pi.min_entry() >= report.p_plus.powi(t) - 1e-10);
    }

    #[test]
    fn pushsum_matches_backward_limit(seed in any::<u64>()) {
        let a = MatrixSequence::seeded_random(4, Kind::Column, RandomFamily::Dense { min_weight: 0.05 }, seed).unwrap();
        let y0 = vec![1.0, 2.0, 0.5, 0.5];
        let horizon = 30;
        let push = pushsum_abs_prob(&a, &y0, horizon).unwrap();
        let induced = induced_sequence(&a, &y0, horizon + 200).unwrap();
        let report = check_a1(&induced, 16, 4);
        prop_assert!(report.holds);
        let limit = compute_abs_prob(&induced, Some(&report), horizon, 1e-10).unwrap();
        for t in 0..=horizon {
            for (u, v) in push.at(t).unwrap().as_slice().iter().zip(limit.at(t).unwrap().as_slice()) {
                prop_assert!((u - v).abs() <= 1e-8);
            }
        }
        for y in pushsum_masses(&a, &y0, 100).unwrap() {
            prop_assert!((y.iter().sum::<f64>() - 4.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn mixing_is_a_convex_combination(
        p in arb_row_matrix(),
        xs in prop::collection::vec(-5.0f64..5.0, 12),
        ds in prop::collection::vec(0.0f64..0.5, 6),
        seed in any::<u64>(),
    ) {
        let n = p.n();
        let d = 2;
        let problem = L1Median::seeded(n, d, seed).unwrap();
        let x = StateBlock::from_rows(&(0..n).map(|i| xs[i * d..(i + 1) * d].to_vec()).collect::<Vec<_>>()).unwrap();
        let g = StateBlock::from_rows(&(0..n).map(|i| problem.subgradient(i, x.row(i))).collect::<Vec<_>>()).unwrap();
        let delta = &ds[..n];
        let slack = (0..n).map(|i| delta[i] * problem.l_bound(i)).fold(0.0, f64::max);
        let next = unified_step(&AgentStates { t: 0, x: x.clone() }, &p, delta, &g).unwrap();
        for k in 0..d {
            let lo = (0..n).map(|j| x.row(j)[k]).fold(f64::INFINITY, f64::min);
            let hi = (0..n).map(|j| x.row(j)[k]).fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                let v = next.x.row(i)[k];
                prop_assert!(v >= lo - slack - 1e-12 && v <= hi + slack + 1e-12);
            }
        }
    }

    #[test]
    fn step_rules_are_nonnegative_and_audits_monotone(c in 0.01f64..5.0, alpha in -1.5f64..-0.1, h in 1usize..200) {
        let s = StepSchedule::common_power(3, c, alpha).unwrap();
        for t in [0, 1, h, 10 * h] {
            prop_assert!(s.delta_at(t).unwrap().iter().all(|&v| v >= 0.0));
        }
        let pi = consensus_subgrad::AbsProbSequence::stationary(
            consensus_subgrad::ProbabilityVector::uniform(3),
            consensus_subgrad::AbsProbMethod::UniformDoubly,
        );
        let short = audit_assumptions(&s, &pi, h).unwrap();
        let long = audit_assumptions(&s, &pi, 2 * h).unwrap();
        prop_assert!(long.a2_partial_sum >= short.a2_partial_sum);
        prop_assert!(long.a3_divergence_proxy >= short.a3_divergence_proxy);
        prop_assert!(long.a3_sqrt_t_sum >= short.a3_sqrt_t_sum);
    }

    #[test]
    fn seeded_sequences_are_reproducible(seed in any::<u64>(), t in 0usize..1000) {
        let make = || MatrixSequence::seeded_random(5, Kind::Column, RandomFamily::LazyDigraph { edge_prob: 0.3 }, seed).unwrap();
        let (a, b) = (make(), make());
        let (x, y) = (a.at(t).into_owned(), b.at(t).into_owned());
        prop_assert_eq!(x.as_slice(), y.as_slice());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// One step of the pi-scaled unified iteration on the separation
    /// example never exceeds the one-step bound on the weighted average.
    #[test]
    fn one_step_average_bound(xs in prop::collection::vec(-3.0f64..3.0, 8), t in 0usize..500, seed in 0u64..50) {
        let p = separation_example();
        let seq = MatrixSequence::constant(p.clone());
        let report = check_a1(&seq, 16, 4);
        let pi = Arc::new(compute_abs_prob(&seq, Some(&report), 0, 1e-10).unwrap());
        let schedule = StepSchedule::pi_scaled_power(0.25, -0.75, pi.clone()).unwrap();
        let problem = L1Median::seeded(4, 2, seed).unwrap();
        let u = problem.argmin().unwrap().midpoint();
        let x = StateBlock::from_rows(&(0..4).map(|i| xs[2 * i..2 * i + 2].to_vec()).collect::<Vec<_>>()).unwrap();
        let g = StateBlock::from_rows(&(0..4).map(|i| problem.subgradient(i, x.row(i))).collect::<Vec<_>>()).unwrap();
        let delta = schedule.delta_at(t).unwrap();
        let next = unified_step(&AgentStates { t, x: x.clone() }, &p, &delta, &g).unwrap();
        let (pi_t, pi_next) = (pi.at(t).unwrap().as_slice().to_vec(), pi.at(t + 1).unwrap().as_slice().to_vec());
        let avg = next.x.weighted_average(&pi_next);
        let lhs: f64 = avg.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        let terms = one_step_terms(&problem, &x, &pi_t, &pi_next, &delta, &u);
        prop_assert!(lhs <= terms.rhs() + 1e-12, "{lhs} > {}", terms.rhs());
    }
}

#[test]
fn long_backward_products_stay_row_stochastic() {
    let seq = MatrixSequence::seeded_random(5, Kind::Row, RandomFamily::Dense { min_weight: 0.01 }, 11).unwrap();
    let prod = backward_product(&seq, 0, 10_000).unwrap().matrix;
    for i in 0..5 {
        assert!((prod.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn constant_primitive_witness_respects_wielandt_bound() {
    let p = separation_example();
    let report = check_a1(&MatrixSequence::constant(p.clone()), 16, 4);
    assert_eq!(report.witness_t, positive_power(&p, 10));
    assert!(report.witness_t.unwrap() <= 16 - 8 + 2);
}
