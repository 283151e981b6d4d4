//! Per-agent convex costs with bounded subgradients and minimizer oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Costs `f_1..f_N` on `R^d` with `sup ||g||_1 <= L_i` over subgradients
/// `g` of `f_i`.
pub trait ConvexProblem: Send + Sync {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn cost(&self, i: usize, x: &[f64]) -> f64;
    /// Writes a subgradient of `f_i` at `x` into `out`. Kinks resolve to 0.
    fn subgradient_into(&self, i: usize, x: &[f64], out: &mut [f64]);
    fn l_bound(&self, i: usize) -> f64;

    fn subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.subgradient_into(i, x, &mut g);
        g
    }

    fn global_cost(&self, x: &[f64]) -> f64 {
        (0..self.n()).map(|i| self.cost(i, x)).sum()
    }

    fn max_l(&self) -> f64 {
        (0..self.n()).map(|i| self.l_bound(i)).fold(0.0, f64::max)
    }

    fn argmin(&self) -> Result<ArgminSet> {
        Err(Error::OracleUnavailable)
    }

    /// Initial state with agent `i` at its own data point.
    fn default_x0(&self) -> Vec<Vec<f64>>;
}

/// A coordinate box `[lower, upper]`; a single point when the bounds agree.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgminSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ArgminSet {
    pub fn point(x: Vec<f64>) -> Self {
        Self { lower: x.clone(), upper: x }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    fn gaps<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
    }

    /// Euclidean distance from `x` to the box.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.gaps(x).map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Infinity-norm distance from `x` to the box.
    pub fn distance_inf(&self, x: &[f64]) -> f64 {
        self.gaps(x).fold(0.0, f64::max)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `f_i(x) = ||x - c_i||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Median {
    anchors: Vec<Vec<f64>>,
}

impl L1Median {
    pub fn new(anchors: Vec<Vec<f64>>) -> Result<Self> {
        let d = anchors.first().map(Vec::len).ok_or(Error::EmptyMatrix)?;
        if d == 0 {
            return Err(Error::InvalidParameter("anchors must have dimension >= 1".into()));
        }
        for a in &anchors {
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.len() });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("anchors must be finite".into()));
            }
        }
        Ok(Self { anchors })
    }

    /// Anchors drawn uniformly from `[-1, 1]^d`.
    pub fn seeded(n: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new((0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }
}

impl ConvexProblem for L1Median {
    fn n(&self) -> usize {
        self.anchors.len()
    }

    fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    fn cost(&self, i: usize, x: &[f64]) -> f64 {
        x.iter().zip(&self.anchors[i]).map(|(a, b)| (a - b).abs()).sum()
    }

    fn subgradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.anchors[i]) {
            *o = sign(a - b);
        }
    }

    fn l_bound(&self, _i: usize) -> f64 {
        self.dim() as f64
    }

    /// The coordinate-wise median interval.
    fn argmin(&self) -> Result<ArgminSet> {
        let n = self.n();
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for k in 0..self.dim() {
            let mut col: Vec<f64> = self.anchors.iter().map(|a| a[k]).collect();
            col.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                lower.push(col[n / 2]);
                upper.push(col[n / 2]);
            } else {
                lower.push(col[n / 2 - 1]);
                upper.push(col[n / 2]);
            }
        }
        Ok(ArgminSet { lower, upper })
    }

    fn default_x0(&self) -> Vec<Vec<f64>> {
        self.anchors.clone()
    }
}

/// `f_i(x) = |a_i^T x - b_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Regression {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl L1Regression {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let d = a.first().map(Vec::len).ok_or(Error::EmptyMatrix)?;
        if d == 0 {
            return Err(Error::InvalidParameter("regressors must have dimension >= 1".into()));
        }
        if b.len() != a.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        for row in &a {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("regression data must be finite".into()));
        }
        Ok(Self { a, b })
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        self.a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - self.b[i]
    }

    fn pattern_search(&self, mut x: Vec<f64>) -> Vec<f64> {
        let d = self.dim();
        let mut best = self.global_cost(&x);
        let mut step = 1.0;
        while step >= 1e-4 {
            let mut improved = false;
            for k in 0..d {
                for s in [step, -step] {
                    x[k] += s;
                    let c = self.global_cost(&x);
                    if c < best - 1e-12 {
                        best = c;
                        improved = true;
                    } else {
                        x[k] -= s;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        x
    }

    // Some minimizer of a polyhedral L1 fit makes d residuals vanish: try
    // every d-subset of equations when that is affordable.
    fn vertex_search(&self) -> Option<Vec<f64>> {
        let (n, d) = (self.n(), self.dim());
        let mut count = 1.0_f64;
        for k in 0..d {
            count *= (n - k) as f64 / (k + 1) as f64;
        }
        if d > n || count > 2e5 {
            return None;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.a[i].clone()).collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| self.b[i]).collect();
            if let Some(x) = solve(rows, rhs) {
                let c = self.global_cost(&x);
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, x));
                }
            }
            let mut k = d;
            loop {
                if k == 0 {
                    return best.map(|(_, x)| x);
                }
                k -= 1;
                if idx[k] < n - d + k {
                    idx[k] += 1;
                    for j in k + 1..d {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let d = rhs.len();
    for col in 0..d {
        let piv = (col..d).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..d {
            let f = m[r][col] / m[col][col];
            for c in col..d {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

impl ConvexProblem for L1Regression {
    fn n(&self) -> usize {
        self.a.len()
    }

    fn dim(&self) -> usize {
        self.a[0].len()
    }

    fn cost(&self, i: usize, x: &[f64]) -> f64 {
        self.residual(i, x).abs()
    }

    fn subgradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = sign(self.residual(i, x));
        for (o, a) in out.iter_mut().zip(&self.a[i]) {
            *o = s * a;
        }
    }

    fn l_bound(&self, i: usize) -> f64 {
        self.a[i].iter().map(|v| v.abs()).sum()
    }

    /// A single minimizer, found by vertex enumeration when affordable and
    /// then polished by compass search down to step `1e-4`.
    fn argmin(&self) -> Result<ArgminSet> {
        let start = self.vertex_search().unwrap_or_else(|| vec![0.0; self.dim()]);
        Ok(ArgminSet::point(self.pattern_search(start)))
    }

    fn default_x0(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| {
                let sq: f64 = self.a[i].iter().map(|v| v * v).sum();
                if sq == 0.0 {
                    vec![0.0; self.dim()]
                } else {
                    self.a[i].iter().map(|v| v * self.b[i] / sq).collect()
                }
            })
            .collect()
    }
}
