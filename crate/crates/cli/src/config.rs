//! Experiment configuration: one strict JSON document per run.

use std::collections::BTreeSet;
use std::path::Path;

use dynsym_core::evolve::{bloch_state, default_site_state, TimeGrid};
use dynsym_core::models::{local_annihilator, ModelConfig, ModelVariant, Spin};
use dynsym_core::opalg::{embed_product, gell_mann_basis, LatticeOperator, LatticeSpec, SiteOperator};
use dynsym_core::dynsym::{DEFAULT_TOL_GROUP, DEFAULT_TOL_RESIDUAL};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub finder: FinderConfig,
    #[serde(default)]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderConfig {
    pub tol_residual: f64,
    pub tol_group: f64,
    pub uniform_only: bool,
}

impl Default for FinderConfig {
    fn default() -> Self {
        Self {
            tol_residual: DEFAULT_TOL_RESIDUAL,
            tol_group: DEFAULT_TOL_GROUP,
            uniform_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default)]
    pub initial_state: InitialState,
    /// Absent: a grid derived from the spectrum.
    #[serde(default)]
    pub grid: Option<TimeGrid>,
    /// Absent: the late half of the grid.
    #[serde(default)]
    pub window: Option<Window>,
    pub observables: Vec<ObservableSpec>,
}

/// Product states. Amplitudes are `[re, im]` pairs and get normalized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Default,
    Bloch { theta: f64, phi: f64 },
    /// One `[theta, phi]` per site.
    BlochSites { angles: Vec<[f64; 2]> },
    Uniform { amplitudes: Vec<[f64; 2]> },
    Product { sites: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

/// Either a sum of real-weighted products of local operators, or a named
/// extensive charge of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub coefficient: f64,
    pub factors: Vec<FactorSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub site: usize,
    pub op: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub directory: Option<String>,
    pub formats: BTreeSet<Format>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            directory: None,
            formats: [Format::Json, Format::Csv].into_iter().collect(),
        }
    }
}

impl OutputsConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A parsed and fully checked configuration with its compiled observables.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub spec: LatticeSpec,
    pub observables: Vec<(String, LatticeOperator)>,
}

impl LoadedConfig {
    pub fn dynamics(&self) -> Result<&DynamicsConfig, CliError> {
        self.config
            .dynamics
            .as_ref()
            .ok_or_else(|| config_err("this command needs a 'dynamics' section"))
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
    validate(config)
}

fn validate(config: ExperimentConfig) -> Result<LoadedConfig, CliError> {
    config.model.validate().map_err(|e| config_err(e.to_string()))?;
    let spec = config.model.spec().map_err(|e| config_err(e.to_string()))?;
    let f = &config.finder;
    for (key, v) in [("tol_residual", f.tol_residual), ("tol_group", f.tol_group)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(config_err(format!("finder.{key} must be positive, got {v}")));
        }
    }
    let mut observables = Vec::new();
    if let Some(dyn_cfg) = &config.dynamics {
        if let Some(g) = dyn_cfg.grid {
            TimeGrid::new(g.t0, g.dt, g.n_steps).map_err(|e| config_err(e.to_string()))?;
        }
        if let Some(w) = dyn_cfg.window {
            if !(w.t_start.is_finite() && w.t_end.is_finite() && w.t_start < w.t_end) {
                return Err(config_err("window needs finite t_start < t_end"));
            }
        }
        site_states(&dyn_cfg.initial_state, spec)?;
        if dyn_cfg.observables.is_empty() {
            return Err(config_err("dynamics.observables is empty"));
        }
        let mut names = BTreeSet::new();
        for obs in &dyn_cfg.observables {
            if obs.name.is_empty()
                || !obs.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(config_err(format!(
                    "observable name '{}' must be non-empty ASCII letters, digits, '_' or '-'",
                    obs.name
                )));
            }
            if !names.insert(obs.name.clone()) {
                return Err(config_err(format!("duplicate observable '{}'", obs.name)));
            }
            observables.push((obs.name.clone(), compile_observable(obs, &config.model, spec)?));
        }
    }
    if config.outputs.formats.is_empty() {
        return Err(config_err("outputs.formats is empty"));
    }
    Ok(LoadedConfig {
        config,
        spec,
        observables,
    })
}

fn amplitudes(raw: &[[f64; 2]], d: usize) -> Result<DVector<Complex64>, CliError> {
    if raw.len() != d {
        return Err(config_err(format!("site state has {} amplitudes, local dimension is {d}", raw.len())));
    }
    let v = DVector::from_iterator(d, raw.iter().map(|[re, im]| Complex64::new(*re, *im)));
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(config_err("site state must be finite and nonzero"));
    }
    Ok(v.unscale(n))
}

/// Per-site vectors of the configured product state.
pub fn site_states(state: &InitialState, spec: LatticeSpec) -> Result<Vec<DVector<Complex64>>, CliError> {
    let (n, d) = (spec.n_sites(), spec.local_dim());
    match state {
        InitialState::Default => Ok(vec![default_site_state(d); n]),
        InitialState::Bloch { theta, phi } => {
            if d != 2 {
                return Err(config_err("bloch states need local dimension 2"));
            }
            if !(theta.is_finite() && phi.is_finite()) {
                return Err(config_err("bloch angles must be finite"));
            }
            Ok(vec![bloch_state(*theta, *phi); n])
        }
        InitialState::BlochSites { angles } => {
            if d != 2 {
                return Err(config_err("bloch states need local dimension 2"));
            }
            if angles.len() != n {
                return Err(config_err(format!("bloch_sites lists {} sites, model has {n}", angles.len())));
            }
            if angles.iter().flatten().any(|a| !a.is_finite()) {
                return Err(config_err("bloch angles must be finite"));
            }
            Ok(angles.iter().map(|[theta, phi]| bloch_state(*theta, *phi)).collect())
        }
        InitialState::Uniform { amplitudes: a } => Ok(vec![amplitudes(a, d)?; n]),
        InitialState::Product { sites } => {
            if sites.len() != n {
                return Err(config_err(format!("product state lists {} sites, model has {n}", sites.len())));
            }
            sites.iter().map(|a| amplitudes(a, d)).collect()
        }
    }
}

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hermitian single-site operator by label.
pub fn local_operator(label: &str, variant: ModelVariant) -> Result<SiteOperator, CliError> {
    let d = variant.local_dim();
    if label == "identity" {
        return Ok(SiteOperator::identity(d));
    }
    let generators = gell_mann_basis(d).map_err(|e| config_err(e.to_string()))?;
    let index = match (d, label) {
        (2, "sigma_x") => Some(0),
        (2, "sigma_y") => Some(1),
        (2, "sigma_z") => Some(2),
        _ => label
            .strip_prefix(if d == 3 { "tau_" } else { "lambda_" })
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| (1..=generators.len()).contains(k))
            .map(|k| k - 1),
    };
    if let Some(k) = index {
        return Ok(generators[k].clone());
    }
    if variant == ModelVariant::Hubbard {
        let number = |s: Spin| {
            let c = local_annihilator(s).matrix;
            c.adjoint() * c
        };
        let (up, down) = (number(Spin::Up), number(Spin::Down));
        let m: Option<DMatrix<Complex64>> = match label {
            "n_up" => Some(up),
            "n_down" => Some(down),
            "n" => Some(up + down),
            "double_occupancy" => Some(&up * &down),
            "s_z" => Some((up - down) * cz(0.5)),
            _ => None,
        };
        if let Some(m) = m {
            return Ok(SiteOperator::labeled(m, label));
        }
    }
    Err(config_err(format!("unknown local operator '{label}' for {variant:?}")))
}

fn compile_observable(obs: &ObservableSpec, model: &ModelConfig, spec: LatticeSpec) -> Result<LatticeOperator, CliError> {
    let op = match (&obs.named, obs.terms.is_empty()) {
        (Some(name), true) => {
            let forms = model.named_charges().map_err(|e| config_err(e.to_string()))?;
            let form = forms
                .iter()
                .find(|f| &f.name == name)
                .ok_or_else(|| config_err(format!("observable '{}': unknown named charge '{name}'", obs.name)))?;
            form.compile()
        }
        (None, false) => {
            let mut acc = LatticeOperator::zero(spec);
            for term in &obs.terms {
                if !term.coefficient.is_finite() || term.factors.is_empty() {
                    return Err(config_err(format!("observable '{}': bad term", obs.name)));
                }
                let ops = term
                    .factors
                    .iter()
                    .map(|f| local_operator(&f.op, model.variant))
                    .collect::<Result<Vec<_>, _>>()?;
                let sites: BTreeSet<usize> = term.factors.iter().map(|f| f.site).collect();
                if sites.len() != term.factors.len() {
                    return Err(config_err(format!("observable '{}': repeated site in a product", obs.name)));
                }
                let factors: Vec<(usize, &SiteOperator)> =
                    term.factors.iter().map(|f| f.site).zip(ops.iter()).collect();
                let product = embed_product(&factors, spec).map_err(|e| config_err(e.to_string()))?;
                acc = acc
                    .add(&product.scale_re(term.coefficient))
                    .map_err(|e| config_err(e.to_string()))?;
            }
            acc
        }
        _ => {
            return Err(config_err(format!(
                "observable '{}' needs exactly one of 'terms' or 'named'",
                obs.name
            )))
        }
    };
    if !op.is_hermitian(1e-12) {
        return Err(config_err(format!("observable '{}' is not Hermitian", obs.name)));
    }
    Ok(op)
}

/// Refuses a pair that differs anywhere but in symmetry-breaking couplings.
pub fn check_demo_pair(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<(), CliError> {
    let (ma, mb) = (&a.model, &b.model);
    if ma.variant != mb.variant || ma.n_sites != mb.n_sites || ma.boundary != mb.boundary {
        return Err(config_err("demo configs describe different lattices or model families"));
    }
    let breaking = ma.variant.breaking_couplings();
    let keys: BTreeSet<&String> = ma.couplings.keys().chain(mb.couplings.keys()).collect();
    for key in keys {
        if breaking.contains(&key.as_str()) {
            continue;
        }
        if ma.couplings.get(key) != mb.couplings.get(key) {
            return Err(config_err(format!("demo configs differ in coupling '{key}', which does not break the symmetry")));
        }
    }
    if a.finder != b.finder {
        return Err(config_err("demo configs differ in finder settings"));
    }
    if a.dynamics != b.dynamics {
        return Err(config_err("demo configs differ in dynamics settings"));
    }
    Ok(())
}
