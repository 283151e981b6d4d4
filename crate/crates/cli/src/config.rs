//! Experiment configuration: parsing, validation and hashing.

use std::path::{Path, PathBuf};

use consensus_subgrad::engine::{AlgorithmId, Cadence};
use consensus_subgrad::{Kind, RandomFamily, StepRule, StochasticMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "consensus-subgrad/1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config at `{key}`: {message}")]
pub struct ConfigInvalid {
    pub key: String,
    pub message: String,
}

impl ConfigInvalid {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Anchors given inline, one row per agent.
    L1Median { anchors: Vec<Vec<f64>> },
    /// Anchors read from a headerless CSV file, one row per agent.
    L1MedianCsv { path: PathBuf },
    /// Anchors drawn uniformly from `[-1, 1]^d` with the config seed.
    L1MedianSeeded { n: usize, d: usize },
    /// `f_i(x) = |a_i^T x - b_i|`.
    L1Regression { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Constant { matrix: StochasticMatrix },
    Periodic { matrices: Vec<StochasticMatrix> },
    Explicit { matrices: Vec<StochasticMatrix> },
    /// Drawn with the config seed.
    SeededRandom { n: usize, kind: Kind, family: RandomFamily },
}

impl SequenceSpec {
    pub fn kind(&self) -> Kind {
        match self {
            SequenceSpec::Constant { matrix } => matrix.kind(),
            SequenceSpec::Periodic { matrices } | SequenceSpec::Explicit { matrices } => {
                matrices.first().map(|m| m.kind()).unwrap_or(Kind::Row)
            }
            SequenceSpec::SeededRandom { kind, .. } => *kind,
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, SequenceSpec::SeededRandom { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Agent `i` starts at its own data point.
    Anchors,
    Explicit { rows: Vec<Vec<f64>> },
    /// Entries uniform in `[-scale, scale]`, drawn with the config seed.
    SeededRandom { scale: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckFlags {
    pub a1: bool,
    pub a1prime: bool,
    pub a1star: bool,
    pub a2a3: bool,
    pub embedding: bool,
}

impl CheckFlags {
    pub fn any(&self) -> bool {
        self.a1 || self.a1prime || self.a1star || self.a2a3 || self.embedding
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Bound on the final max distance to the argmin set.
    pub distance: f64,
    /// Bound on the final consensus error.
    pub consensus: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { distance: 1e-2, consensus: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub problem: ProblemSpec,
    /// Mixing sequence; column-stochastic for the push variants unless
    /// `column_sequence` is given.
    pub sequence: SequenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_sequence: Option<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmId>,
    pub schedule: StepRule,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_snapshots")]
    pub snapshots: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub checks: CheckFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub skip_descent_until_positive: bool,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_snapshots() -> String {
    "geometric".into()
}

/// Key named by a serde error message, or the document root.
fn offending_key(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                return key.to_string();
            }
        }
    }
    "<root>".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigInvalid> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            ConfigInvalid::new(offending_key(&msg), msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigInvalid> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigInvalid::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let ProblemSpec::L1MedianCsv { path: csv } = &mut cfg.problem {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn cadence(&self) -> Result<Cadence, ConfigInvalid> {
        self.snapshots.parse().map_err(|e: consensus_subgrad::Error| ConfigInvalid::new("snapshots", e.to_string()))
    }

    pub fn algorithm(&self) -> Result<AlgorithmId, ConfigInvalid> {
        self.algorithm.ok_or_else(|| ConfigInvalid::new("algorithm", "required for `run`"))
    }

    /// The sequence the given algorithm mixes with.
    pub fn mixing_spec(&self, algorithm: AlgorithmId) -> &SequenceSpec {
        match (&self.column_sequence, algorithm.is_push()) {
            (Some(col), true) => col,
            _ => &self.sequence,
        }
    }

    /// Structural checks that do not need to build anything.
    pub fn validate(&self, algorithm: AlgorithmId) -> Result<(), ConfigInvalid> {
        if self.schema != SCHEMA {
            return Err(ConfigInvalid::new("schema", format!("expected \"{SCHEMA}\", found \"{}\"", self.schema)));
        }
        self.cadence()?;
        let randomized = self.sequence.is_randomized()
            || self.column_sequence.as_ref().is_some_and(SequenceSpec::is_randomized)
            || matches!(self.problem, ProblemSpec::L1MedianSeeded { .. })
            || matches!(self.x0, Some(InitSpec::SeededRandom { .. }));
        if randomized && self.seed.is_none() {
            return Err(ConfigInvalid::new("seed", "required when any spec is randomized"));
        }
        let key = if algorithm.is_push() && self.column_sequence.is_some() { "column_sequence" } else { "sequence" };
        let kind = self.mixing_spec(algorithm).kind();
        match algorithm {
            a if a.is_push() && !kind.is_column() => {
                return Err(ConfigInvalid::new(key, format!("{a} needs a column-stochastic sequence, found {kind}")));
            }
            AlgorithmId::Dgd if kind != Kind::Doubly => {
                return Err(ConfigInvalid::new(key, format!("dgd needs a doubly-stochastic sequence, found {kind}")));
            }
            a if !a.is_push() && !kind.is_row() => {
                return Err(ConfigInvalid::new(key, format!("{a} needs a row-stochastic sequence, found {kind}")));
            }
            AlgorithmId::RowStochastic if !matches!(self.sequence, SequenceSpec::Constant { .. }) => {
                return Err(ConfigInvalid::new("sequence", "row_stochastic needs a constant matrix"));
            }
            _ => {}
        }
        let fixed_power = matches!(self.schedule, StepRule::CommonPower { .. });
        if matches!(algorithm, AlgorithmId::RowStochastic | AlgorithmId::SubgradientPush | AlgorithmId::PushFirst) && !fixed_power {
            return Err(ConfigInvalid::new("schedule", format!("{algorithm} takes its step from a common_power rule")));
        }
        if self.y0.is_some() && !algorithm.is_push() {
            return Err(ConfigInvalid::new("y0", format!("only push variants take initial masses, not {algorithm}")));
        }
        for (key, v) in [("thresholds.distance", self.thresholds.distance), ("thresholds.consensus", self.thresholds.consensus)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigInvalid::new(key, "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialization, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "schema": "consensus-subgrad/1",
            "problem": {"kind": "l1_median", "anchors": [[0.0], [2.0]]},
            "sequence": {"rule": "constant", "matrix": {"n": 2, "kind": "doubly", "rows": [[0.5, 0.5], [0.5, 0.5]]}},
            "algorithm": "unified",
            "schedule": {"rule": "common_power", "c": 1.0, "alpha": -0.75},
            "steps": 100
        }"#
        .into()
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_json(&minimal()).unwrap();
        assert_eq!(cfg.algorithm, Some(AlgorithmId::Unified));
        assert_eq!(cfg.cadence().unwrap(), Cadence::Geometric);
        assert_eq!(cfg.thresholds, Thresholds::default());
        assert!(!cfg.checks.any());
        cfg.validate(AlgorithmId::Unified).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let text = minimal().replace("\"steps\": 100", "\"steps\": 100, \"stpes\": 3");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(err.key, "stpes");
        let text = minimal().replace("\"c\": 1.0", "\"c\": 1.0, \"beta\": 2");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap_err().key, "beta");
    }

    #[test]
    fn schema_and_seed_are_enforced() {
        let cfg = ExperimentConfig::from_json(&minimal().replace("consensus-subgrad/1", "v0")).unwrap();
        assert_eq!(cfg.validate(AlgorithmId::Unified).unwrap_err().key, "schema");
        let text = minimal().replace(
            r#"{"kind": "l1_median", "anchors": [[0.0], [2.0]]}"#,
            r#"{"kind": "l1_median_seeded", "n": 2, "d": 1}"#,
        );
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.validate(AlgorithmId::Unified).unwrap_err().key, "seed");
    }

    #[test]
    fn algorithm_kind_compatibility() {
        let cfg = ExperimentConfig::from_json(&minimal()).unwrap();
        cfg.validate(AlgorithmId::Dgd).unwrap();
        cfg.validate(AlgorithmId::SubgradientPush).unwrap();
        let row = ExperimentConfig::from_json(&minimal().replace("\"doubly\"", "\"row\"")).unwrap();
        assert_eq!(row.validate(AlgorithmId::PushFirst).unwrap_err().key, "sequence");
        assert_eq!(row.validate(AlgorithmId::Dgd).unwrap_err().key, "sequence");
        row.validate(AlgorithmId::RowStochastic).unwrap();
        let scaled = minimal().replace("common_power", "pi_scaled_power");
        let cfg = ExperimentConfig::from_json(&scaled).unwrap();
        assert_eq!(cfg.validate(AlgorithmId::RowStochastic).unwrap_err().key, "schedule");
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seed() {
        let a = ExperimentConfig::from_json(&minimal()).unwrap();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn bad_snapshot_spec_names_the_key() {
        let mut cfg = ExperimentConfig::from_json(&minimal()).unwrap();
        cfg.snapshots = "every:0".into();
        assert_eq!(cfg.cadence().unwrap_err().key, "snapshots");
    }
}
