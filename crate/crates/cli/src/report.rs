//! Machine-readable outputs. Everything here is deterministic for a fixed
//! config; wall-clock timing lives in a separate sidecar.

use dynsym_core::evolve::NonstationarityMetrics;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// `[site, generator_label, re, im]`.
pub type SiteCoefficient = (usize, String, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Symmetry,
    Charge,
}

/// One row of `symmetries.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryEntry {
    pub kind: EntryKind,
    pub lambda: f64,
    pub residual: f64,
    pub pair_id: Option<usize>,
    /// Position inside a degenerate level, uniform members first.
    pub member: usize,
    pub uniform: bool,
    pub site_coefficients: Vec<SiteCoefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSummary {
    pub lambda: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySummary {
    pub model: String,
    pub energy_scale: f64,
    pub zero_threshold: f64,
    pub candidate_dim: usize,
    pub uniform_only: bool,
    pub pair_count: usize,
    pub charge_count: usize,
    pub uniform_charge_count: usize,
    pub levels: Vec<LevelSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatchReport {
    pub name: String,
    pub scale: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Entry {
    pub pair_id: usize,
    pub member: usize,
    pub lambda: f64,
    pub conservation_residual: f64,
    pub hermiticity_defect: f64,
    pub locality_residual: f64,
    pub identity_part: f64,
    pub q_norm: f64,
    pub best_match: Option<NamedMatchReport>,
    pub charge_site_coefficients: Vec<SiteCoefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootCheckReport {
    pub root: Vec<f64>,
    pub predicted: f64,
    pub measured: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Report {
    pub cartan_charges: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `‖H − (H_g + Σ c Q)‖_HS` for the rebuilt Hamiltonian.
    pub build_gap: f64,
    pub roots: Vec<RootCheckReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableReport {
    pub name: String,
    pub csv: Option<String>,
    pub metrics: NonstationarityMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsReport {
    pub state: String,
    pub energy: f64,
    pub beta: Option<f64>,
    pub grid_t0: f64,
    pub grid_dt: f64,
    pub grid_samples: usize,
    pub observables: Vec<ObservableReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableComparison {
    pub name: String,
    pub variances: [f64; 2],
    /// First over second; null when the second variance is zero and the first is not.
    pub variance_ratio: Option<f64>,
    pub variance_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoReport {
    pub pair_counts: [usize; 2],
    pub charge_counts: [usize; 2],
    pub uniform_charge_counts: [usize; 2],
    pub pair_count_delta: i64,
    pub charge_count_delta: i64,
    pub observables: Vec<ObservableComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub configs: Vec<ExperimentConfig>,
    pub symmetries: Vec<SymmetrySummary>,
    pub theorem1: Option<Vec<Theorem1Entry>>,
    pub theorem2: Option<Theorem2Report>,
    pub dynamics: Vec<DynamicsReport>,
    pub demo: Option<DemoReport>,
}

impl RunReport {
    pub fn new(command: &str, configs: Vec<ExperimentConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            configs,
            symmetries: Vec::new(),
            theorem1: None,
            theorem2: None,
            dynamics: Vec::new(),
            demo: None,
        }
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("schema version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let expected_configs = if self.command == "demo" { 2 } else { 1 };
        if self.configs.len() != expected_configs {
            return Err(format!("{} configs for command '{}'", self.configs.len(), self.command));
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("'{}' report lacks {what}", self.command)) };
        match self.command.as_str() {
            "find" => need(self.symmetries.len() == 1, "a symmetry summary"),
            "theorem1" => need(self.symmetries.len() == 1 && self.theorem1.is_some(), "theorem1 results"),
            "theorem2" => need(self.theorem2.is_some(), "theorem2 results"),
            "evolve" => need(self.dynamics.len() == 1, "dynamics"),
            "demo" => need(
                self.symmetries.len() == 2 && self.dynamics.len() == 2 && self.demo.is_some(),
                "both runs and the comparison",
            ),
            other => Err(format!("unknown command '{other}'")),
        }?;
        for s in &self.symmetries {
            let positive = s.levels.iter().filter(|l| l.lambda > 0.0).count();
            if positive != s.pair_count {
                return Err(format!("pair_count {} but {positive} positive levels", s.pair_count));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

/// Wall-clock sidecar; not part of the deterministic outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub command: String,
    pub phases: Vec<Phase>,
    pub total_seconds: f64,
}

impl Timing {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn record<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        let seconds = start.elapsed().as_secs_f64();
        self.total_seconds += seconds;
        self.phases.push(Phase {
            name: name.to_string(),
            seconds,
        });
        out
    }
}
