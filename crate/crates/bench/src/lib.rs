//! Benchmark fixtures shared by the bench targets.

use consensus_subgrad::{Kind, MatrixSequence, RandomFamily, StochasticMatrix};

/// Ring with self-loops and offset-`k` chords, all weights equal.
pub fn chorded_ring(n: usize, k: usize) -> StochasticMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for o in [0, 1, n - 1, k % n, (n - k % n) % n] {
            row[(i + o) % n] += 0.2;
        }
    }
    StochasticMatrix::from_rows(&rows, Kind::Doubly).expect("circulant rows and columns sum to 1")
}

pub fn random_row_sequence(n: usize, seed: u64) -> MatrixSequence {
    MatrixSequence::seeded_random(n, Kind::Row, RandomFamily::Dense { min_weight: 0.01 }, seed).expect("valid family")
}

pub fn random_column_sequence(n: usize, seed: u64) -> MatrixSequence {
    MatrixSequence::seeded_random(n, Kind::Column, RandomFamily::LazyDigraph { edge_prob: 0.4 }, seed).expect("valid family")
}
