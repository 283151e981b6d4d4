//! Support graphs of matrix sequences and decision procedures for the
//! mixing conditions:
//!
//! * **A1**: a uniform floor `p+` on nonzero weights and some `T` with every
//!   length-`T` backward product strictly positive;
//! * **A1'**: positive diagonals plus strongly connected unions over windows
//!   of length `t0` (sufficient for A1, strictly stronger);
//! * **A1\***: the column-stochastic analogue of A1 with no zero rows.
//!
//! All three quantify over every `t >= 0`. For constant, periodic and
//! explicit rules the probed start times cover every distinct window and the
//! verdict is exact; for seeded-random rules the verdict only holds on the
//! probe and the report says so.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mat_mul, Kind, StochasticMatrix};
use crate::sequence::{min_positive_entry, MatrixSequence};

/// Directed graph on vertices `0..n`; `(i, j)` is an edge when agent `i`
/// weights agent `j`, i.e. `p_ij > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        if let Some(&(i, j)) = edges.iter().find(|(i, j)| *i >= n || *j >= n) {
            return Err(Error::InvalidParameter(format!("edge ({i}, {j}) out of range for n={n}")));
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
        }
        adj
    }

    /// Graphviz rendering for inspection.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n");
        for v in 0..self.n {
            let _ = writeln!(out, "  {v};");
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "  {i} -> {j};");
        }
        out.push_str("}\n");
        out
    }
}

pub fn graph_from_matrix(p: &StochasticMatrix) -> DirectedGraph {
    let n = p.n();
    let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| p.get(i, j) > 0.0);
    DirectedGraph { n, edges: edges.collect() }
}

/// Tarjan's algorithm, iterative. Components come out in reverse
/// topological order.
pub fn strongly_connected_components(g: &DirectedGraph) -> Vec<Vec<usize>> {
    let n = g.n;
    let adj = g.adjacency();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    // (vertex, next neighbour position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

pub fn strongly_connected(g: &DirectedGraph) -> bool {
    strongly_connected_components(g).len() == 1
}

/// Edge union of the support graphs of `P(t), ..., P(t + window - 1)`.
pub fn union_graph(seq: &MatrixSequence, t: usize, window: usize) -> DirectedGraph {
    let mut edges = BTreeSet::new();
    for s in t..t + window.max(1) {
        edges.extend(graph_from_matrix(&seq.at(s)).edges);
    }
    DirectedGraph { n: seq.n(), edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A1,
    #[serde(rename = "A1prime")]
    A1Prime,
    #[serde(rename = "A1star")]
    A1Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    /// `T` for A1/A1*, `t0` for A1'.
    pub witness_t: Option<usize>,
    /// Number of probed start times.
    pub probe_window: usize,
    /// False when the verdict only covers the probe window.
    pub exact: bool,
    /// Smallest positive entry over the probed matrices.
    pub p_plus: f64,
    pub failure_reason: String,
}

impl ConditionReport {
    fn pass(condition: Condition, witness: usize, probe_window: usize, exact: bool, p_plus: f64) -> Self {
        Self { condition, holds: true, witness_t: Some(witness), probe_window, exact, p_plus, failure_reason: String::new() }
    }

    fn fail(condition: Condition, reason: String, probe_window: usize, exact: bool, p_plus: f64) -> Self {
        Self { condition, holds: false, witness_t: None, probe_window, exact, p_plus, failure_reason: reason }
    }

    pub fn scope(&self) -> &'static str {
        if self.exact {
            "exact"
        } else {
            "holds on probe"
        }
    }
}

/// Default probe: four periods (or four steps when no period is known).
pub fn default_probe(seq: &MatrixSequence) -> usize {
    4 * seq.declared_period().unwrap_or(1)
}

/// Default search bound for `T`: `N^2`, above Wielandt's `N^2 - 2N + 2`.
pub fn default_t_max(seq: &MatrixSequence) -> usize {
    seq.n() * seq.n()
}

pub fn default_t0_max(seq: &MatrixSequence) -> usize {
    seq.n()
}

fn probe_starts(seq: &MatrixSequence, probe: usize) -> (usize, bool) {
    match seq.exact_window() {
        Some(w) => (probe.max(w), true),
        None => (probe.max(1), false),
    }
}

/// Largest over probed starts of the first `T` with `P(t+T, t) > 0`.
fn positivity_witness(seq: &MatrixSequence, starts: usize, t_max: usize) -> std::result::Result<usize, String> {
    let n = seq.n();
    let mut witness = 0;
    for t in 0..starts {
        let mut acc = seq.at(t).as_slice().to_vec();
        let mut len = 1;
        // Rows of stochastic factors are nonzero, so positivity persists
        // once reached and the first hit is the minimal T for this start.
        while !acc.iter().all(|&v| v > 0.0) {
            if len == t_max {
                return Err(format!(
                    "no T <= {t_max} on probe: product starting at t={t} keeps a zero entry"
                ));
            }
            acc = mat_mul(n, seq.at(t + len).as_slice(), &acc);
            len += 1;
        }
        witness = witness.max(len);
    }
    Ok(witness)
}

pub fn check_a1(seq: &MatrixSequence, t_max: usize, probe: usize) -> ConditionReport {
    let (starts, exact) = probe_starts(seq, probe);
    let t_max = t_max.max(1);
    let p_plus = min_positive_entry(seq, starts + t_max - 1);
    if !seq.kind().is_row() {
        return ConditionReport::fail(Condition::A1, format!("sequence is {}, not row-stochastic", seq.kind()), starts, exact, p_plus);
    }
    match positivity_witness(seq, starts, t_max) {
        Ok(t) => ConditionReport::pass(Condition::A1, t, starts, exact, p_plus),
        Err(reason) => ConditionReport::fail(Condition::A1, reason, starts, exact, p_plus),
    }
}

pub fn check_a1_prime(seq: &MatrixSequence, t0_max: usize, probe: usize) -> ConditionReport {
    let (base, exact) = probe_starts(seq, probe);
    let t0_max = t0_max.max(1);
    // Cover every window an A1 search of length (N-1) t0 would touch.
    let starts = if exact { base } else { base + (seq.n().saturating_sub(1)) * t0_max };
    let horizon = starts + t0_max - 1;
    let p_plus = min_positive_entry(seq, horizon);
    if !seq.kind().is_row() {
        return ConditionReport::fail(Condition::A1Prime, format!("sequence is {}, not row-stochastic", seq.kind()), starts, exact, p_plus);
    }
    for t in 0..=horizon {
        let p = seq.at(t);
        if let Some(i) = (0..p.n()).find(|&i| p.get(i, i) <= 0.0) {
            return ConditionReport::fail(
                Condition::A1Prime,
                format!("zero diagonal entry: P({t})[{i}][{i}] = 0"),
                starts,
                exact,
                p_plus,
            );
        }
    }
    if p_plus <= 0.0 {
        return ConditionReport::fail(Condition::A1Prime, "no positive lower bound p+".into(), starts, exact, p_plus);
    }
    for t0 in 1..=t0_max {
        if (0..starts).all(|t| strongly_connected(&union_graph(seq, t, t0))) {
            return ConditionReport::pass(Condition::A1Prime, t0, starts, exact, p_plus);
        }
    }
    ConditionReport::fail(
        Condition::A1Prime,
        format!("no window t0 <= {t0_max} makes every probed union graph strongly connected"),
        starts,
        exact,
        p_plus,
    )
}

/// Column-stochastic analogue: no zero rows and `A(t+T-1) ... A(t) > 0`.
pub fn check_a1_star(seq: &MatrixSequence, t_max: usize, probe: usize) -> Result<ConditionReport> {
    if !seq.kind().is_column() {
        return Err(Error::KindMismatch { expected: Kind::Column, found: seq.kind() });
    }
    let (starts, exact) = probe_starts(seq, probe);
    let t_max = t_max.max(1);
    let horizon = starts + t_max - 1;
    let a_plus = min_positive_entry(seq, horizon);
    for t in 0..=horizon {
        if let Some(i) = seq.at(t).has_zero_row() {
            return Ok(ConditionReport::fail(Condition::A1Star, format!("zero row {i} in A({t})"), starts, exact, a_plus));
        }
    }
    Ok(match positivity_witness(seq, starts, t_max) {
        Ok(t) => ConditionReport::pass(Condition::A1Star, t, starts, exact, a_plus),
        Err(reason) => ConditionReport::fail(Condition::A1Star, reason, starts, exact, a_plus),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationDemo {
    pub a1: ConditionReport,
    pub a1prime: ConditionReport,
}

/// Both row-stochastic checks with default parameters.
pub fn implication_demo(seq: &MatrixSequence) -> ImplicationDemo {
    let probe = default_probe(seq);
    ImplicationDemo {
        a1: check_a1(seq, default_t_max(seq), probe),
        a1prime: check_a1_prime(seq, default_t0_max(seq), probe),
    }
}
