//! Dense row-, column- and doubly-stochastic matrices and the ergodicity
//! coefficient.
//!
//! Matrices are validated on construction and never renormalized: a row
//! that sums to `1 + 1e-9` is an error, not something to be repaired.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row/column sums for matrices built from user input.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Looser tolerance for matrices produced by multiplying validated factors.
pub const PRODUCT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Row,
    Column,
    Doubly,
}

impl Kind {
    pub fn is_row(self) -> bool {
        matches!(self, Kind::Row | Kind::Doubly)
    }

    pub fn is_column(self) -> bool {
        matches!(self, Kind::Column | Kind::Doubly)
    }

    /// The kind guaranteed for a product of a `self` matrix and an `other` one.
    pub fn product(self, other: Kind) -> Option<Kind> {
        match (self.is_row() && other.is_row(), self.is_column() && other.is_column()) {
            (true, true) => Some(Kind::Doubly),
            (true, false) => Some(Kind::Row),
            (false, true) => Some(Kind::Column),
            (false, false) => None,
        }
    }

    pub fn transpose(self) -> Kind {
        match self {
            Kind::Row => Kind::Column,
            Kind::Column => Kind::Row,
            Kind::Doubly => Kind::Doubly,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Row => "row-stochastic",
            Kind::Column => "column-stochastic",
            Kind::Doubly => "doubly-stochastic",
        })
    }
}

/// A validated nonnegative `n x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct StochasticMatrix {
    n: usize,
    data: Vec<f64>,
    kind: Kind,
}

impl StochasticMatrix {
    /// Validates a row-major buffer against `kind` at [`STOCHASTIC_TOL`].
    pub fn validate(n: usize, data: Vec<f64>, kind: Kind) -> Result<Self> {
        Self::validate_with_tol(n, data, kind, STOCHASTIC_TOL)
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: Kind) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::validate(n, data, kind)
    }

    pub(crate) fn validate_with_tol(n: usize, data: Vec<f64>, kind: Kind, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: idx / n, col: idx % n });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: idx / n, col: idx % n, value: v });
            }
        }
        if kind.is_row() {
            let worst = (0..n)
                .map(|i| (i, data[i * n..(i + 1) * n].iter().sum::<f64>()))
                .reduce(|a, b| if (b.1 - 1.0).abs() > (a.1 - 1.0).abs() { b } else { a })
                .expect("n >= 1");
            if (worst.1 - 1.0).abs() > tol {
                return Err(Error::RowSumViolation { row: worst.0, sum: worst.1, deviation: worst.1 - 1.0 });
            }
        }
        if kind.is_column() {
            let worst = (0..n)
                .map(|j| (j, (0..n).map(|i| data[i * n + j]).sum::<f64>()))
                .reduce(|a, b| if (b.1 - 1.0).abs() > (a.1 - 1.0).abs() { b } else { a })
                .expect("n >= 1");
            if (worst.1 - 1.0).abs() > tol {
                return Err(Error::ColumnSumViolation { col: worst.0, sum: worst.1, deviation: worst.1 - 1.0 });
            }
        }
        Ok(Self { n, data, kind })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data, kind: Kind::Doubly }
    }

    /// The all-`1/n` matrix.
    pub fn uniform(n: usize) -> Self {
        Self { n, data: vec![1.0 / n as f64; n * n], kind: Kind::Doubly }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self { n, data, kind: self.kind.transpose() }
    }

    /// Relabels the matrix with a weaker kind it already satisfies, e.g. a
    /// doubly-stochastic matrix viewed as row-stochastic.
    pub fn with_kind(&self, kind: Kind) -> Result<Self> {
        Self::validate_with_tol(self.n, self.data.clone(), kind, PRODUCT_TOL)
    }

    /// `self * other`, re-validated at [`PRODUCT_TOL`].
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        let kind = self
            .kind
            .product(other.kind)
            .ok_or(Error::KindMismatch { expected: self.kind, found: other.kind })?;
        let data = mat_mul(self.n, &self.data, &other.data);
        Self::validate_with_tol(self.n, data, kind, PRODUCT_TOL)
    }

    /// True when every entry is strictly positive.
    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0)
    }

    /// Smallest strictly positive entry.
    pub fn min_positive(&self) -> f64 {
        self.data.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min)
    }

    pub fn has_zero_row(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.row(i).iter().all(|&v| v == 0.0))
    }

    /// `v^T M` for a length-`n` vector.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        out
    }

    /// `M v` for a length-`n` vector.
    pub fn right_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }
}

/// Row-major square product.
pub(crate) fn mat_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let out_row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// JSON document form: `{"n": 2, "kind": "row", "rows": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub n: usize,
    pub kind: Kind,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixDoc> for StochasticMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        if doc.rows.len() != doc.n {
            return Err(Error::DimensionMismatch { expected: doc.n, found: doc.rows.len() });
        }
        Self::from_rows(&doc.rows, doc.kind)
    }
}

impl From<StochasticMatrix> for MatrixDoc {
    fn from(m: StochasticMatrix) -> Self {
        MatrixDoc { n: m.n, kind: m.kind, rows: m.rows() }
    }
}

/// A nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::with_tol(entries, STOCHASTIC_TOL)
    }

    pub(crate) fn with_tol(entries: Vec<f64>, tol: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some((i, &v)) = entries.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry { row: 0, col: i, value: v });
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotProbabilityVector { sum });
        }
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// The standard basis vector `e_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `P(to, from) = P(to-1) ... P(from)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardProduct {
    pub from: usize,
    pub to: usize,
    pub matrix: StochasticMatrix,
}

/// Dobrushin ergodicity coefficient: half the largest L1 distance between
/// two rows. Zero exactly when all rows coincide.
pub fn ergodicity_coefficient(p: &StochasticMatrix) -> Result<f64> {
    if !p.kind().is_row() {
        return Err(Error::KindMismatch { expected: Kind::Row, found: p.kind() });
    }
    Ok(tau_unchecked(p.n(), p.as_slice()))
}

pub(crate) fn tau_unchecked(n: usize, data: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for i1 in 0..n {
        let r1 = &data[i1 * n..(i1 + 1) * n];
        for i2 in (i1 + 1)..n {
            let r2 = &data[i2 * n..(i2 + 1) * n];
            let l1: f64 = r1.iter().zip(r2).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(l1);
        }
    }
    // Roundoff on rows summing to 1 +- 1e-12 can push this a hair above 1.
    (0.5 * worst).min(1.0)
}

/// Checks submultiplicativity `tau(P1 P2) <= tau(P1) tau(P2)` up to `1e-12`.
pub fn tau_of_product_bound_check(p1: &StochasticMatrix, p2: &StochasticMatrix) -> Result<bool> {
    if p1.n() != p2.n() {
        return Err(Error::DimensionMismatch { expected: p1.n(), found: p2.n() });
    }
    let lhs = ergodicity_coefficient(&p1.mul(p2)?)?;
    let rhs = ergodicity_coefficient(p1)? * ergodicity_coefficient(p2)?;
    Ok(lhs <= rhs + 1e-12)
}

/// The 4x4 primitive matrix with a zero diagonal that separates the
/// algebraic positivity condition from the graph-theoretic one.
pub fn separation_example() -> StochasticMatrix {
    StochasticMatrix::from_rows(
        &[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        Kind::Row,
    )
    .expect("valid row-stochastic matrix")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rows: &[&[f64]]) -> StochasticMatrix {
        StochasticMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), Kind::Row).unwrap()
    }

    #[test]
    fn identity_is_valid_row() {
        let m = StochasticMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], Kind::Row).unwrap();
        assert_eq!(m, StochasticMatrix::identity(2).with_kind(Kind::Row).unwrap());
    }

    #[test]
    fn row_sum_violation_reports_row() {
        let err = StochasticMatrix::from_rows(&[vec![0.5, 0.6], vec![0.2, 0.8]], Kind::Row).unwrap_err();
        match err {
            Error::RowSumViolation { row, sum, .. } => {
                assert_eq!(row, 0);
                assert!((sum - 1.1).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_entry_rejected() {
        let err = StochasticMatrix::from_rows(&[vec![1.5, -0.5], vec![0.0, 1.0]], Kind::Row).unwrap_err();
        assert!(matches!(err, Error::NegativeEntry { row: 0, col: 1, .. }));
    }

    #[test]
    fn column_kind_checks_columns() {
        let m = [vec![1.0, 0.5], vec![0.0, 0.5]];
        assert!(StochasticMatrix::from_rows(&m, Kind::Column).is_ok());
        assert!(matches!(
            StochasticMatrix::from_rows(&m, Kind::Row),
            Err(Error::RowSumViolation { row: 0, .. })
        ));
        assert!(matches!(
            StochasticMatrix::from_rows(&m, Kind::Doubly),
            Err(Error::RowSumViolation { .. })
        ));
    }

    #[test]
    fn separation_example_is_valid() {
        let p = separation_example();
        assert_eq!(p.kind(), Kind::Row);
        assert_eq!(p.diagonal(), vec![0.0; 4]);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(ergodicity_coefficient(&StochasticMatrix::identity(2)).unwrap(), 1.0);
        assert_eq!(ergodicity_coefficient(&StochasticMatrix::uniform(3)).unwrap(), 0.0);
        assert_eq!(ergodicity_coefficient(&row(&[&[1.0, 0.0], &[0.5, 0.5]])).unwrap(), 0.5);
        assert_eq!(ergodicity_coefficient(&separation_example()).unwrap(), 1.0);
    }

    #[test]
    fn tau_rejects_column_kind() {
        let m = StochasticMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 0.5]], Kind::Column).unwrap();
        assert!(matches!(ergodicity_coefficient(&m), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn tau_zero_iff_identical_rows() {
        let v = [0.1, 0.7, 0.2];
        let m = row(&[&v, &v, &v]);
        assert_eq!(ergodicity_coefficient(&m).unwrap(), 0.0);
        let m = row(&[&v, &v, &[0.1, 0.7 - 1e-6, 0.2 + 1e-6]]);
        assert!(ergodicity_coefficient(&m).unwrap() > 1e-14);
    }

    #[test]
    fn bound_check_trivial_cases() {
        let i3 = StochasticMatrix::identity(3);
        assert!(tau_of_product_bound_check(&i3, &i3).unwrap());
        let q = row(&[&[0.2, 0.3, 0.5], &[1.0, 0.0, 0.0], &[0.0, 0.5, 0.5]]);
        let u = StochasticMatrix::uniform(3);
        assert!(tau_of_product_bound_check(&u, &q).unwrap());
        assert_eq!(ergodicity_coefficient(&u.mul(&q).unwrap()).unwrap(), 0.0);
        assert!(matches!(
            tau_of_product_bound_check(&i3, &StochasticMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn product_of_row_and_column_is_rejected() {
        let r = row(&[&[1.0, 0.0], &[0.5, 0.5]]);
        let c = r.transpose();
        assert!(matches!(r.mul(&c), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let p = separation_example();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"n\":4,\"kind\":\"row\",\"rows\":[[0.0,1.0"));
        let back: StochasticMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"n":2,"kind":"row","rows":[[0.5,0.6],[0.2,0.8]]}"#;
        assert!(serde_json::from_str::<StochasticMatrix>(bad).is_err());
        let extra = r#"{"n":1,"kind":"row","rows":[[1.0]],"x":1}"#;
        assert!(serde_json::from_str::<StochasticMatrix>(extra).is_err());
    }

    #[test]
    fn probability_vector_checks() {
        assert!(ProbabilityVector::new(vec![0.2, 0.8]).is_ok());
        assert!(ProbabilityVector::new(vec![0.2, 0.7]).is_err());
        assert!(ProbabilityVector::new(vec![1.2, -0.2]).is_err());
        assert_eq!(ProbabilityVector::basis(3, 1).as_slice(), &[0.0, 1.0, 0.0]);
    }
}
