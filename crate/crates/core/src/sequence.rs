//! Time-indexed sequences of stochastic matrices `P(0), P(1), ...`.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mat_mul, BackwardProduct, Kind, StochasticMatrix, PRODUCT_TOL};

/// Parametrized families for seeded random sequences. Every draw at time `t`
/// uses its own ChaCha stream, so `P(t)` is a pure function of `(seed, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RandomFamily {
    /// Directed Erdos-Renyi graph plus self-loops, equal weights over the
    /// in-neighbourhood (row kind) or out-neighbourhood (column kind).
    LazyDigraph { edge_prob: f64 },
    /// Undirected Erdos-Renyi graph with Metropolis-Hastings weights;
    /// always doubly stochastic.
    Metropolis { edge_prob: f64 },
    /// All entries drawn from `[min_weight, 1]` then normalized along rows
    /// (row kind) or columns (column kind).
    Dense { min_weight: f64 },
}

impl RandomFamily {
    fn check(&self, kind: Kind) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match *self {
            RandomFamily::LazyDigraph { edge_prob } | RandomFamily::Metropolis { edge_prob } => {
                if !(0.0..=1.0).contains(&edge_prob) {
                    return bad("edge_prob must lie in [0, 1]");
                }
            }
            RandomFamily::Dense { min_weight } => {
                if !(min_weight > 0.0 && min_weight <= 1.0) {
                    return bad("min_weight must lie in (0, 1]");
                }
            }
        }
        match (self, kind) {
            (RandomFamily::LazyDigraph { .. } | RandomFamily::Dense { .. }, Kind::Doubly) => {
                bad("only the metropolis family produces doubly-stochastic matrices")
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, n: usize, kind: Kind, seed: u64, t: usize) -> StochasticMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut w = vec![0.0; n * n];
        match *self {
            RandomFamily::LazyDigraph { edge_prob } => {
                // adjacency[i][j]: j -> i edge (i hears from j)
                for i in 0..n {
                    for j in 0..n {
                        if i == j || rng.random_bool(edge_prob) {
                            w[i * n + j] = 1.0;
                        }
                    }
                }
                normalize(n, &mut w, kind);
            }
            RandomFamily::Metropolis { edge_prob } => {
                let mut adj = vec![false; n * n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random_bool(edge_prob) {
                            adj[i * n + j] = true;
                            adj[j * n + i] = true;
                        }
                    }
                }
                let deg: Vec<usize> = (0..n).map(|i| adj[i * n..(i + 1) * n].iter().filter(|&&a| a).count()).collect();
                for i in 0..n {
                    let mut off = 0.0;
                    for j in 0..n {
                        if adj[i * n + j] {
                            let v = 1.0 / (1 + deg[i].max(deg[j])) as f64;
                            w[i * n + j] = v;
                            off += v;
                        }
                    }
                    w[i * n + i] = 1.0 - off;
                }
                return StochasticMatrix::validate_with_tol(n, w, Kind::Doubly, PRODUCT_TOL)
                    .and_then(|m| m.with_kind(kind))
                    .expect("metropolis weights are doubly stochastic");
            }
            RandomFamily::Dense { min_weight } => {
                for v in w.iter_mut() {
                    *v = rng.random_range(min_weight..=1.0);
                }
                normalize(n, &mut w, kind);
            }
        }
        StochasticMatrix::validate(n, w, kind).expect("normalized weights are stochastic")
    }
}

fn normalize(n: usize, w: &mut [f64], kind: Kind) {
    if kind == Kind::Column {
        for j in 0..n {
            let s: f64 = (0..n).map(|i| w[i * n + j]).sum();
            for i in 0..n {
                w[i * n + j] /= s;
            }
        }
    } else {
        for row in w.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceRule {
    Constant(StochasticMatrix),
    Periodic(Vec<StochasticMatrix>),
    /// The listed matrices, then the last one held forever.
    Explicit(Vec<StochasticMatrix>),
    SeededRandom { family: RandomFamily, seed: u64 },
}

/// A row- or column-stochastic sequence `{P(t)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSequence {
    n: usize,
    kind: Kind,
    rule: SequenceRule,
    declared_period: Option<usize>,
}

impl MatrixSequence {
    pub fn constant(m: StochasticMatrix) -> Self {
        Self { n: m.n(), kind: m.kind(), rule: SequenceRule::Constant(m), declared_period: Some(1) }
    }

    pub fn periodic(ms: Vec<StochasticMatrix>) -> Result<Self> {
        let (n, kind) = common_shape(&ms)?;
        let p = ms.len();
        Ok(Self { n, kind, rule: SequenceRule::Periodic(ms), declared_period: Some(p) })
    }

    pub fn explicit(ms: Vec<StochasticMatrix>) -> Result<Self> {
        let (n, kind) = common_shape(&ms)?;
        Ok(Self { n, kind, rule: SequenceRule::Explicit(ms), declared_period: None })
    }

    pub fn seeded_random(n: usize, kind: Kind, family: RandomFamily, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        family.check(kind)?;
        Ok(Self { n, kind, rule: SequenceRule::SeededRandom { family, seed }, declared_period: None })
    }

    /// Declares a period for probe sizing; only meaningful for random rules.
    pub fn with_declared_period(mut self, period: usize) -> Self {
        self.declared_period = Some(period.max(1));
        self
    }

    /// Views every matrix under a weaker kind (e.g. doubly as row).
    pub fn as_kind(&self, kind: Kind) -> Result<Self> {
        if (kind.is_row() && !self.kind.is_row()) || (kind.is_column() && !self.kind.is_column()) {
            return Err(Error::KindMismatch { expected: kind, found: self.kind });
        }
        let relabel = |ms: &[StochasticMatrix]| ms.iter().map(|m| m.with_kind(kind)).collect::<Result<Vec<_>>>();
        let rule = match &self.rule {
            SequenceRule::Constant(m) => SequenceRule::Constant(m.with_kind(kind)?),
            SequenceRule::Periodic(ms) => SequenceRule::Periodic(relabel(ms)?),
            SequenceRule::Explicit(ms) => SequenceRule::Explicit(relabel(ms)?),
            SequenceRule::SeededRandom { family, seed } => {
                family.check(kind)?;
                SequenceRule::SeededRandom { family: family.clone(), seed: *seed }
            }
        };
        Ok(Self { n: self.n, kind, rule, declared_period: self.declared_period })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn rule(&self) -> &SequenceRule {
        &self.rule
    }

    pub fn declared_period(&self) -> Option<usize> {
        self.declared_period
    }

    /// Number of start times that covers every distinct behaviour of the
    /// rule, or `None` when the rule is not finitely describable.
    pub fn exact_window(&self) -> Option<usize> {
        match &self.rule {
            SequenceRule::Constant(_) => Some(1),
            SequenceRule::Periodic(ms) | SequenceRule::Explicit(ms) => Some(ms.len()),
            SequenceRule::SeededRandom { .. } => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.rule, SequenceRule::Constant(_))
    }

    pub fn at(&self, t: usize) -> Cow<'_, StochasticMatrix> {
        match &self.rule {
            SequenceRule::Constant(m) => Cow::Borrowed(m),
            SequenceRule::Periodic(ms) => Cow::Borrowed(&ms[t % ms.len()]),
            SequenceRule::Explicit(ms) => Cow::Borrowed(&ms[t.min(ms.len() - 1)]),
            SequenceRule::SeededRandom { family, seed } => Cow::Owned(family.draw(self.n, self.kind, *seed, t)),
        }
    }

    /// The first `len` matrices as an explicit sequence.
    pub fn materialize(&self, len: usize) -> Result<Self> {
        Self::explicit((0..len.max(1)).map(|t| self.at(t).into_owned()).collect())
    }
}

fn common_shape(ms: &[StochasticMatrix]) -> Result<(usize, Kind)> {
    let first = ms.first().ok_or(Error::EmptySequence)?;
    let n = first.n();
    let mut kind = first.kind();
    for m in ms {
        if m.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.n() });
        }
        kind = weakest(kind, m.kind()).ok_or(Error::KindMismatch { expected: kind, found: m.kind() })?;
    }
    Ok((n, kind))
}

/// Strongest kind satisfied by both.
fn weakest(a: Kind, b: Kind) -> Option<Kind> {
    match (a, b) {
        (Kind::Doubly, k) | (k, Kind::Doubly) => Some(k),
        (x, y) if x == y => Some(x),
        _ => None,
    }
}

/// `P(t, t0) = P(t-1) ... P(t0)`, with `P(t0, t0) = I`.
pub fn backward_product(seq: &MatrixSequence, t0: usize, t: usize) -> Result<BackwardProduct> {
    if t < t0 {
        return Err(Error::TimeOrder { from: t0, to: t });
    }
    let n = seq.n();
    if t == t0 {
        return Ok(BackwardProduct { from: t0, to: t, matrix: StochasticMatrix::identity(n) });
    }
    let mut acc = seq.at(t0).as_slice().to_vec();
    for s in (t0 + 1)..t {
        acc = mat_mul(n, seq.at(s).as_slice(), &acc);
    }
    let matrix = StochasticMatrix::validate_with_tol(n, acc, seq.kind(), PRODUCT_TOL)?;
    Ok(BackwardProduct { from: t0, to: t, matrix })
}

/// Smallest positive entry over `P(0..=t_probe)`; for finitely described
/// rules the window is widened to cover every distinct matrix, making the
/// result exact.
pub fn min_positive_entry(seq: &MatrixSequence, t_probe: usize) -> f64 {
    let window = (t_probe + 1).max(seq.exact_window().unwrap_or(0));
    (0..window).map(|t| seq.at(t).min_positive()).fold(f64::INFINITY, f64::min)
}
