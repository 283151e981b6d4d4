//! Step-size matrices `Delta(t) = diag(delta_1(t), ..., delta_N(t))` and
//! numerical audits of the step-size conditions (A2) and (A3).
//!
//! Power laws are evaluated at `(t+1)^alpha` so that `t = 0` is finite.
//! Matrix norms of `Delta(t)` are infinity norms, i.e. `max_i delta_i(t)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abs_prob::AbsProbSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// `delta_i(t) = c (t+1)^alpha` for every agent.
    CommonPower { c: f64, alpha: f64 },
    /// `delta_i(t) = c (t+1)^alpha / pi_i(t+1)`.
    PiScaledPower { c: f64, alpha: f64 },
    /// `delta_i(t) = c (t+1)^alpha / (pi_i(t+1) + eps0_i rho^t)`.
    PiScaledPerturbed { c: f64, alpha: f64, eps0: Vec<f64>, rho: f64 },
    /// Row `t` of the table holds `delta(t)`; the last row repeats.
    PerAgentExplicit { table: Vec<Vec<f64>> },
}

impl StepRule {
    /// `(c, alpha)` of the power-law rules.
    pub fn power(&self) -> Option<(f64, f64)> {
        match *self {
            StepRule::CommonPower { c, alpha }
            | StepRule::PiScaledPower { c, alpha }
            | StepRule::PiScaledPerturbed { c, alpha, .. } => Some((c, alpha)),
            StepRule::PerAgentExplicit { .. } => None,
        }
    }

    pub fn needs_abs_prob(&self) -> bool {
        matches!(self, StepRule::PiScaledPower { .. } | StepRule::PiScaledPerturbed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct StepSchedule {
    n: usize,
    rule: StepRule,
    abs_prob: Option<Arc<AbsProbSequence>>,
}

impl StepSchedule {
    pub fn new(n: usize, rule: StepRule, abs_prob: Option<Arc<AbsProbSequence>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some((c, alpha)) = rule.power() {
            if !(c > 0.0 && c.is_finite()) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(format!("power rule needs c > 0 and finite alpha, got c={c}, alpha={alpha}")));
            }
        }
        match &rule {
            StepRule::PerAgentExplicit { table } => {
                if table.is_empty() {
                    return Err(Error::InvalidParameter("explicit step table is empty".into()));
                }
                for row in table {
                    if row.len() != n {
                        return Err(Error::DimensionMismatch { expected: n, found: row.len() });
                    }
                    if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return Err(Error::InvalidParameter("step sizes must be finite and nonnegative".into()));
                    }
                }
            }
            StepRule::PiScaledPerturbed { eps0, rho, .. } => {
                if eps0.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: eps0.len() });
                }
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
                }
            }
            _ => {}
        }
        if rule.needs_abs_prob() {
            let pi = abs_prob.as_ref().ok_or_else(|| Error::InvalidParameter("pi-scaled rule needs absolute probability vectors".into()))?;
            if pi.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: pi.n() });
            }
        }
        let s = Self { n, rule, abs_prob };
        s.check_denominators()?;
        Ok(s)
    }

    pub fn common_power(n: usize, c: f64, alpha: f64) -> Result<Self> {
        Self::new(n, StepRule::CommonPower { c, alpha }, None)
    }

    pub fn pi_scaled_power(c: f64, alpha: f64, abs_prob: Arc<AbsProbSequence>) -> Result<Self> {
        Self::new(abs_prob.n(), StepRule::PiScaledPower { c, alpha }, Some(abs_prob))
    }

    pub fn explicit(table: Vec<Vec<f64>>) -> Result<Self> {
        let n = table.first().map_or(0, Vec::len);
        Self::new(n, StepRule::PerAgentExplicit { table }, None)
    }

    /// The all-zero schedule.
    pub fn zero(n: usize) -> Self {
        Self { n, rule: StepRule::PerAgentExplicit { table: vec![vec![0.0; n]] }, abs_prob: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> &StepRule {
        &self.rule
    }

    pub fn abs_prob(&self) -> Option<&Arc<AbsProbSequence>> {
        self.abs_prob.as_ref()
    }

    // Denominators pi_i(t+1) + eps_i(t): with |eps| shrinking in t the
    // minimum over a stationary pi is at t = 0.
    fn check_denominators(&self) -> Result<()> {
        if let (StepRule::PiScaledPerturbed { .. }, Some(pi)) = (&self.rule, &self.abs_prob) {
            let last = if pi.is_stationary() { 0 } else { pi.horizon() };
            for t in 0..=last {
                self.delta_at(t)?;
            }
        }
        Ok(())
    }

    fn base(&self, t: usize) -> f64 {
        let (c, alpha) = self.rule.power().expect("power rule");
        c * ((t + 1) as f64).powf(alpha)
    }

    fn pi_next(&self, t: usize) -> Result<&[f64]> {
        Ok(self.abs_prob.as_ref().expect("checked at construction").at(t + 1)?.as_slice())
    }

    fn perturbation(&self, t: usize, i: usize) -> f64 {
        match &self.rule {
            StepRule::PiScaledPerturbed { eps0, rho, .. } => eps0[i] * rho.powi(t.min(i32::MAX as usize) as i32),
            _ => 0.0,
        }
    }

    fn denominator(&self, t: usize, pi: &[f64], i: usize) -> Result<f64> {
        let value = pi[i] + self.perturbation(t, i);
        if value > 0.0 {
            Ok(value)
        } else {
            Err(Error::NonpositiveDenominator { t, agent: i, value })
        }
    }

    /// Diagonal of `Delta(t)`.
    pub fn delta_at(&self, t: usize) -> Result<Vec<f64>> {
        match &self.rule {
            StepRule::CommonPower { .. } => Ok(vec![self.base(t); self.n]),
            StepRule::PiScaledPower { .. } | StepRule::PiScaledPerturbed { .. } => {
                let base = self.base(t);
                let pi = self.pi_next(t)?;
                (0..self.n).map(|i| Ok(base / self.denominator(t, pi, i)?)).collect()
            }
            StepRule::PerAgentExplicit { table } => Ok(table[t.min(table.len() - 1)].clone()),
        }
    }

    /// `pi_i(t+1) delta_i(t)`. For pi-scaled rules this is formed as
    /// `c (t+1)^alpha * pi_i / (pi_i + eps_i)` so the unperturbed case is
    /// agent-independent bit for bit.
    pub fn weighted_at(&self, t: usize, pi_next: &[f64]) -> Result<Vec<f64>> {
        match &self.rule {
            StepRule::PiScaledPower { .. } | StepRule::PiScaledPerturbed { .. } => {
                let base = self.base(t);
                let own = self.pi_next(t)?;
                (0..self.n)
                    .map(|i| {
                        let d = self.denominator(t, own, i)?;
                        Ok(if own[i] == pi_next[i] && self.perturbation(t, i) == 0.0 {
                            base
                        } else {
                            base * (pi_next[i] / d)
                        })
                    })
                    .collect()
            }
            _ => Ok(self.delta_at(t)?.iter().zip(pi_next).map(|(d, p)| d * p).collect()),
        }
    }

    /// `||Delta(t)||_inf`.
    pub fn norm_at(&self, t: usize) -> Result<f64> {
        Ok(self.delta_at(t)?.into_iter().fold(0.0, f64::max))
    }
}

/// `eps_i(t) = eps0_i rho^t` added to the denominators of a pi-scaled rule.
pub fn perturbed_schedule(c: f64, alpha: f64, eps0: Vec<f64>, rho: f64, abs_prob: Arc<AbsProbSequence>) -> Result<StepSchedule> {
    StepSchedule::new(abs_prob.n(), StepRule::PiScaledPerturbed { c, alpha, eps0, rho }, Some(abs_prob))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AnalyticPass,
    AnalyticFail,
    NumericOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionAudit {
    pub horizon: usize,
    /// `sum_{t<=H} ||Delta(t)|| max_{t<=l<=H} ||Delta(l)||`.
    pub a2_partial_sum: f64,
    pub a2_verdict: Verdict,
    /// `sum_{t<=H} ||Delta(t) pi(t+1)||_inf`.
    pub a3_divergence_proxy: f64,
    pub a3_verdict: Verdict,
    /// `sum_{t<=H} sqrt(t) max_{i,j} |pi_i(t+1) delta_i(t) - pi_j(t+1) delta_j(t)|`.
    pub a3_sqrt_t_sum: f64,
    /// The same sum with `pi(t)` in place of `pi(t+1)`.
    pub a3_sqrt_t_sum_same_index: f64,
    /// Last summand of `a3_sqrt_t_sum`.
    pub a3_last_term: f64,
    pub notes: Vec<String>,
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// Partial sums for (A2) and (A3) up to `horizon`, with closed-form
/// verdicts for power laws.
pub fn audit_assumptions(s: &StepSchedule, abs_prob: &AbsProbSequence, horizon: usize) -> Result<AssumptionAudit> {
    let mut notes = Vec::new();
    if horizon < 10 {
        notes.push(format!("horizon {horizon} is below the recommended minimum of 10"));
    }
    let norms = (0..=horizon).map(|t| s.norm_at(t)).collect::<Result<Vec<_>>>()?;
    let mut suffix = norms.clone();
    for t in (0..horizon).rev() {
        suffix[t] = suffix[t].max(suffix[t + 1]);
    }
    let a2_partial_sum = norms.iter().zip(&suffix).map(|(a, b)| a * b).sum();

    let mut a3_divergence_proxy = 0.0;
    let mut a3_sqrt_t_sum = 0.0;
    let mut a3_sqrt_t_sum_same_index = 0.0;
    let mut a3_last_term = 0.0;
    for t in 0..=horizon {
        let sqrt_t = (t as f64).sqrt();
        let next = s.weighted_at(t, abs_prob.at(t + 1)?.as_slice())?;
        a3_divergence_proxy += next.iter().copied().fold(0.0, f64::max);
        a3_last_term = sqrt_t * spread(&next);
        a3_sqrt_t_sum += a3_last_term;
        let same = s.weighted_at(t, abs_prob.at(t)?.as_slice())?;
        a3_sqrt_t_sum_same_index += sqrt_t * spread(&same);
    }

    let (a2_verdict, a3_verdict) = match s.rule.power() {
        Some((_, alpha)) => (
            if 2.0 * alpha < -1.0 { Verdict::AnalyticPass } else { Verdict::AnalyticFail },
            if alpha >= -1.0 { Verdict::AnalyticPass } else { Verdict::AnalyticFail },
        ),
        None => {
            notes.push(format!("explicit table: suffix maxima cover t <= {horizon}; the tail beyond is unaudited"));
            (Verdict::NumericOnly, Verdict::NumericOnly)
        }
    };
    if let StepRule::PiScaledPerturbed { rho, .. } = s.rule {
        notes.push(format!("perturbation decays like {rho}^t, so the sqrt(t)-weighted terms pass the ratio test"));
    }
    Ok(AssumptionAudit {
        horizon,
        a2_partial_sum,
        a2_verdict,
        a3_divergence_proxy,
        a3_verdict,
        a3_sqrt_t_sum,
        a3_sqrt_t_sum_same_index,
        a3_last_term,
        notes,
    })
}
