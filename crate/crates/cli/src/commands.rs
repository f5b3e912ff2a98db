//! The five subcommands. Each returns its files in memory; nothing touches
//! the disk until the whole run has succeeded.

use std::collections::BTreeMap;

use dynsym_core::dynsym::{
    build_candidate_space, build_uniform_candidate_space, energy_scale, find_eigenoperators_named, theorem1_charge,
    theorem2_build, theorem2_verify, CandidateSpace, DynamicalSymmetry, FinderTolerances, SymmetryReport,
};
use dynsym_core::evolve::{
    diagonalize, expectation_series, nonstationarity, prepare_product_state, thermal_match, TimeGrid, TimeSeries,
};
use dynsym_core::lie::{cartan_weyl, verify_cartan, AlgebraBasis};
use dynsym_core::models::ModelVariant;
use dynsym_core::opalg::{
    gell_mann_basis, generator_label, ExtensiveOperator, LatticeOperator, SiteOperator,
};
use dynsym_core::Error;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{check_demo_pair, site_states, Format, LoadedConfig};
use crate::report::{
    DemoReport, DynamicsReport, EntryKind, LevelSummary, NamedMatchReport, ObservableComparison, ObservableReport,
    RootCheckReport, RunReport, SiteCoefficient, SymmetryEntry, SymmetrySummary, Theorem1Entry, Theorem2Report,
    Timing,
};
use crate::CliError;

const COEFF_FLOOR: f64 = 1e-14;

/// `[site, label, re, im]` with round-off parts flushed to zero.
fn coefficient_row(site: usize, label: String, c: Complex64, scale: f64) -> SiteCoefficient {
    let clean = |x: f64| if x.abs() <= COEFF_FLOOR * scale.max(1.0) { 0.0 } else { x };
    (site, label, clean(c.re), clean(c.im))
}

fn rows(raw: Vec<(usize, String, Complex64)>) -> Vec<SiteCoefficient> {
    let scale = raw.iter().map(|(_, _, c)| c.norm()).fold(0.0, f64::max);
    raw.into_iter()
        .filter(|(_, _, c)| c.norm() > COEFF_FLOOR * scale.max(1.0))
        .map(|(site, label, c)| coefficient_row(site, label, c, scale))
        .collect()
}

/// Named output files, written only after the run succeeds.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn report(&mut self, report: &RunReport) -> Result<(), CliError> {
        report.validate().map_err(CliError::Theorem)?;
        self.json("report.json", report)
    }
}

pub struct Outcome {
    pub artifacts: Artifacts,
    pub timing: Timing,
}

fn tolerances(loaded: &LoadedConfig, tol: Option<f64>) -> FinderTolerances {
    let f = loaded.config.finder;
    match tol {
        Some(t) => FinderTolerances {
            tol_residual: t,
            tol_group: t,
        },
        None => FinderTolerances {
            tol_residual: f.tol_residual,
            tol_group: f.tol_group,
        },
    }
}

fn descriptor(loaded: &LoadedConfig) -> String {
    let m = &loaded.config.model;
    let couplings: Vec<String> = m.couplings.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{:?} N={} {:?} [{}]", m.variant, m.n_sites, m.boundary, couplings.join(", "))
}

struct Found {
    h: LatticeOperator,
    space: CandidateSpace,
    report: SymmetryReport,
}

fn find(loaded: &LoadedConfig, tol: Option<f64>, timing: &mut Timing) -> Result<Found, CliError> {
    let h = timing.record("build", || loaded.config.model.build())?;
    let space = timing.record("candidates", || {
        if loaded.config.finder.uniform_only {
            build_uniform_candidate_space(loaded.spec)
        } else {
            build_candidate_space(loaded.spec)
        }
    })?;
    let report = timing.record("find", || {
        find_eigenoperators_named(&h, &space, tolerances(loaded, tol), &descriptor(loaded))
    })?;
    Ok(Found { h, space, report })
}

fn site_coefficients(space: &CandidateSpace, s: &DynamicalSymmetry) -> Vec<SiteCoefficient> {
    rows(space.site_coefficients(&s.coefficients))
}

fn symmetry_entries(found: &Found) -> Vec<SymmetryEntry> {
    let r = &found.report;
    let mut out = Vec::new();
    let entry = |kind, s: &DynamicalSymmetry, pair_id, member| SymmetryEntry {
        kind,
        lambda: s.lambda,
        residual: s.residual,
        pair_id,
        member,
        uniform: s.uniform,
        site_coefficients: site_coefficients(&found.space, s),
    };
    for (id, pair) in r.pairs.iter().enumerate() {
        for side in [&pair.plus, &pair.minus] {
            for (k, s) in side.iter().enumerate() {
                out.push(entry(EntryKind::Symmetry, s, Some(id), k));
            }
        }
    }
    // Nonzero levels left without a partner.
    for level in &r.levels {
        let paired = r.pairs.iter().any(|p| (p.lambda - level.lambda.abs()).abs() <= r.zero_threshold);
        if level.lambda.abs() > r.zero_threshold && !paired {
            for (k, s) in level.members.iter().enumerate() {
                out.push(entry(EntryKind::Symmetry, s, None, k));
            }
        }
    }
    for (k, c) in r.charges.charges.iter().enumerate() {
        out.push(SymmetryEntry {
            kind: EntryKind::Charge,
            lambda: 0.0,
            residual: c.residual,
            pair_id: None,
            member: k,
            uniform: c.uniform,
            site_coefficients: rows(found.space.site_coefficients(&c.coefficients)),
        });
    }
    out
}

fn summary(r: &SymmetryReport) -> SymmetrySummary {
    SymmetrySummary {
        model: r.model.clone(),
        energy_scale: r.energy_scale,
        zero_threshold: r.zero_threshold,
        candidate_dim: r.candidate_dim,
        uniform_only: r.uniform_only,
        pair_count: r.pair_count(),
        charge_count: r.charges.len(),
        uniform_charge_count: r.charges.uniform_count(),
        levels: r
            .levels
            .iter()
            .map(|l| LevelSummary {
                lambda: l.lambda,
                multiplicity: l.members.len(),
            })
            .collect(),
        warnings: r.unpaired_warnings.clone(),
    }
}

pub fn cmd_find(loaded: &LoadedConfig, tol: Option<f64>) -> Result<Outcome, CliError> {
    let mut timing = Timing::new("find");
    let found = find(loaded, tol, &mut timing)?;
    let mut artifacts = Artifacts::default();
    if loaded.config.outputs.wants(Format::Json) {
        artifacts.json("symmetries.json", &symmetry_entries(&found))?;
    }
    let mut report = RunReport::new("find", vec![loaded.config.clone()]);
    report.symmetries.push(summary(&found.report));
    artifacts.report(&report)?;
    Ok(Outcome { artifacts, timing })
}

/// Expansion of a per-site operator in the identity plus the generator basis.
fn extensive_coefficients(op: &ExtensiveOperator) -> Result<Vec<SiteCoefficient>, CliError> {
    let d = op.spec().local_dim();
    let generators = gell_mann_basis(d)?;
    let mut raw = Vec::new();
    for (site, local) in op.per_site().iter().enumerate() {
        raw.push((site, "identity".to_string(), local.trace() / d as f64));
        for (b, g) in generators.iter().enumerate() {
            raw.push((site, generator_label(d, b), g.hs_inner(local) / 2.0));
        }
    }
    Ok(rows(raw))
}

pub fn cmd_theorem1(loaded: &LoadedConfig, tol: Option<f64>) -> Result<Outcome, CliError> {
    let mut timing = Timing::new("theorem1");
    let found = find(loaded, tol, &mut timing)?;
    let named = loaded.config.model.named_charges()?;
    let mut entries = Vec::new();
    timing.record("theorem1", || -> Result<(), CliError> {
        for (id, pair) in found.report.pairs.iter().enumerate() {
            for (k, (plus, minus)) in pair.plus.iter().zip(&pair.minus).enumerate() {
                let t = theorem1_charge(plus, minus, &found.h, &named)?;
                entries.push(Theorem1Entry {
                    pair_id: id,
                    member: k,
                    lambda: t.lambda,
                    conservation_residual: t.conservation_residual,
                    hermiticity_defect: t.hermiticity_defect,
                    locality_residual: t.locality_residual,
                    identity_part: t.identity_part,
                    q_norm: t.q_norm,
                    best_match: t.best_match.map(|m| NamedMatchReport {
                        name: m.name,
                        scale: m.scale,
                        cosine: m.cosine,
                    }),
                    charge_site_coefficients: extensive_coefficients(&t.charge)?,
                });
            }
        }
        Ok(())
    })?;
    let mut artifacts = Artifacts::default();
    if loaded.config.outputs.wants(Format::Json) {
        artifacts.json("theorem1.json", &entries)?;
    }
    let mut report = RunReport::new("theorem1", vec![loaded.config.clone()]);
    report.symmetries.push(summary(&found.report));
    report.theorem1 = Some(entries);
    artifacts.report(&report)?;
    Ok(Outcome { artifacts, timing })
}

/// Rebuilds `H` from its symmetric part plus uniform Cartan charges, then
/// checks every lifted root vector against the predicted eigenvalue.
pub fn cmd_theorem2(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let mut timing = Timing::new("theorem2");
    let model = &loaded.config.model;
    let (basis, cartan_idx, names): (AlgebraBasis, Vec<usize>, Vec<&str>) = match model.variant {
        ModelVariant::FieldChain | ModelVariant::HeisenbergNnn | ModelVariant::ThreeBodySu2 => {
            (AlgebraBasis::su2(), vec![2], vec!["sigma_z^tot"])
        }
        ModelVariant::Su3Chain => (AlgebraBasis::su3(), vec![2, 7], vec!["tau_3^tot", "tau_8^tot"]),
        ModelVariant::Hubbard => {
            return Err(CliError::Config(
                "theorem2 needs a single-site Lie algebra; the Hubbard pairs are not uniform lifts".into(),
            ))
        }
    };
    let spec = loaded.spec;
    let h = timing.record("build", || model.build())?;
    let h_g = timing.record("build_symmetric", || model.symmetric_counterpart().build())?;
    let cartan_ops: Vec<SiteOperator> = cartan_idx.iter().map(|&k| basis.generators()[k].clone()).collect();
    let charges = cartan_ops
        .iter()
        .map(|op| ExtensiveOperator::uniform(spec, op))
        .collect::<Result<Vec<_>, Error>>()?;

    let delta = h.sub(&h_g)?;
    let mut coefficients = Vec::new();
    for q in &charges {
        let q = q.compile();
        coefficients.push((q.hs_inner(&delta)? / q.hs_inner(&q)?).re);
    }
    let rebuilt = timing.record("theorem2_build", || theorem2_build(&h_g, &charges, &coefficients))?;
    let build_gap = rebuilt.sub(&h)?.hs_norm();
    if build_gap > 1e-12 * energy_scale(&h).max(1.0) * (spec.dim() as f64).sqrt() {
        return Err(CliError::Theorem(format!(
            "H differs from its symmetric part plus Cartan charges by {build_gap:.3e}"
        )));
    }
    let cw = cartan_weyl(&verify_cartan(&cartan_ops, &basis)?, &basis)?;
    let checks = timing.record("theorem2_verify", || theorem2_verify(&h, &cw, &coefficients))?;
    let t2 = Theorem2Report {
        cartan_charges: names.iter().map(|s| s.to_string()).collect(),
        coefficients,
        build_gap,
        roots: checks
            .into_iter()
            .map(|c| RootCheckReport {
                root: c.root,
                predicted: c.predicted,
                measured: c.measured,
                residual: c.residual,
            })
            .collect(),
    };
    let mut artifacts = Artifacts::default();
    if loaded.config.outputs.wants(Format::Json) {
        artifacts.json("theorem2.json", &t2)?;
    }
    let mut report = RunReport::new("theorem2", vec![loaded.config.clone()]);
    report.theorem2 = Some(t2);
    artifacts.report(&report)?;
    Ok(Outcome { artifacts, timing })
}

struct DynamicsRun {
    report: DynamicsReport,
    series: Vec<TimeSeries>,
    grid: TimeGrid,
}

fn csv_name(name: &str) -> String {
    format!("{name}.csv")
}

fn run_dynamics(
    loaded: &LoadedConfig,
    grid_override: Option<TimeGrid>,
    timing: &mut Timing,
    csv_prefix: &str,
) -> Result<DynamicsRun, CliError> {
    let dynamics = loaded.dynamics()?;
    let h = timing.record("build", || loaded.config.model.build())?;
    let spectrum = timing.record("diagonalize", || diagonalize(&h))?;
    let sites = site_states(&dynamics.initial_state, loaded.spec)?;
    let state = prepare_product_state(&spectrum, &sites, &format!("{:?}", dynamics.initial_state))?;
    let grid = match dynamics.grid.or(grid_override) {
        Some(g) => g,
        None => TimeGrid::default_for(&spectrum)?,
    };
    let window = match dynamics.window {
        Some(w) => grid.window(w.t_start, w.t_end)?,
        None => grid.late_half(),
    };

    let mut warnings = Vec::new();
    let thermal = match thermal_match(&spectrum, state.energy, &loaded.observables) {
        Ok(t) => Some(t),
        Err(e @ Error::UnmatchableEnergy { .. }) => {
            warnings.push(format!("no thermal reference: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let mut series = Vec::new();
    let mut observables = Vec::new();
    timing.record("evolve", || -> Result<(), CliError> {
        for (name, op) in &loaded.observables {
            let s = expectation_series(op, name, &state, &spectrum, grid)?;
            if s.max_imag > 1e-10 {
                warnings.push(format!("{name}: imaginary part up to {:.3e} discarded", s.max_imag));
            }
            let thermal_value = thermal.as_ref().and_then(|t| t.value(name));
            let metrics = nonstationarity(&s, &state, &spectrum, op, window.clone(), thermal_value)?;
            let csv = loaded
                .config
                .outputs
                .wants(Format::Csv)
                .then(|| csv_name(&format!("{csv_prefix}{name}")));
            observables.push(ObservableReport {
                name: name.clone(),
                csv,
                metrics,
            });
            series.push(s);
        }
        Ok(())
    })?;
    Ok(DynamicsRun {
        report: DynamicsReport {
            state: state.description.clone(),
            energy: state.energy,
            beta: thermal.as_ref().map(|t| t.beta),
            grid_t0: grid.t0,
            grid_dt: grid.dt,
            grid_samples: grid.n_steps,
            observables,
            warnings,
        },
        series,
        grid,
    })
}

/// `t,value` with 17 significant digits.
pub fn series_csv(series: &TimeSeries) -> Vec<u8> {
    let mut out = String::from("t,value\n");
    for (i, v) in series.values.iter().enumerate() {
        out.push_str(&format!("{:.16e},{:.16e}\n", series.grid.time(i), v));
    }
    out.into_bytes()
}

fn push_csvs(artifacts: &mut Artifacts, run: &DynamicsRun) {
    for (obs, s) in run.report.observables.iter().zip(&run.series) {
        if let Some(name) = &obs.csv {
            artifacts.files.push((name.clone(), series_csv(s)));
        }
    }
}

pub fn cmd_evolve(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let mut timing = Timing::new("evolve");
    let run = run_dynamics(loaded, None, &mut timing, "")?;
    for w in &run.report.warnings {
        eprintln!("warning: {w}");
    }
    let mut artifacts = Artifacts::default();
    push_csvs(&mut artifacts, &run);
    if loaded.config.outputs.wants(Format::Json) {
        artifacts.json("metrics.json", &run.report)?;
    }
    let mut report = RunReport::new("evolve", vec![loaded.config.clone()]);
    report.dynamics.push(run.report);
    artifacts.report(&report)?;
    Ok(Outcome { artifacts, timing })
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    if b > 0.0 {
        Some(a / b)
    } else if a == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// Both configs on one time grid: symmetry counts and late-window variances.
pub fn cmd_demo(pair: [&LoadedConfig; 2], tol: Option<f64>) -> Result<Outcome, CliError> {
    check_demo_pair(&pair[0].config, &pair[1].config)?;
    pair[0].dynamics()?;
    let mut timing = Timing::new("demo");
    let found_a = find(pair[0], tol, &mut timing)?;
    let found_b = find(pair[1], tol, &mut timing)?;
    let run_a = run_dynamics(pair[0], None, &mut timing, "a_")?;
    let run_b = run_dynamics(pair[1], Some(run_a.grid), &mut timing, "b_")?;
    for w in run_a.report.warnings.iter().chain(&run_b.report.warnings) {
        eprintln!("warning: {w}");
    }

    let variances: BTreeMap<&str, f64> = run_b
        .report
        .observables
        .iter()
        .map(|o| (o.name.as_str(), o.metrics.late_window_variance))
        .collect();
    let observables = run_a
        .report
        .observables
        .iter()
        .map(|o| {
            let va = o.metrics.late_window_variance;
            let vb = variances[o.name.as_str()];
            ObservableComparison {
                name: o.name.clone(),
                variances: [va, vb],
                variance_ratio: ratio(va, vb),
                variance_delta: va - vb,
            }
        })
        .collect();
    let (ra, rb) = (&found_a.report, &found_b.report);
    let demo = DemoReport {
        pair_counts: [ra.pair_count(), rb.pair_count()],
        charge_counts: [ra.charges.len(), rb.charges.len()],
        uniform_charge_counts: [ra.charges.uniform_count(), rb.charges.uniform_count()],
        pair_count_delta: ra.pair_count() as i64 - rb.pair_count() as i64,
        charge_count_delta: ra.charges.len() as i64 - rb.charges.len() as i64,
        observables,
    };

    let mut artifacts = Artifacts::default();
    push_csvs(&mut artifacts, &run_a);
    push_csvs(&mut artifacts, &run_b);
    if pair[0].config.outputs.wants(Format::Json) {
        artifacts.json("demo.json", &demo)?;
    }
    let mut report = RunReport::new("demo", vec![pair[0].config.clone(), pair[1].config.clone()]);
    report.symmetries = vec![summary(ra), summary(rb)];
    report.dynamics = vec![run_a.report, run_b.report];
    report.demo = Some(demo);
    artifacts.report(&report)?;
    Ok(Outcome { artifacts, timing })
}
