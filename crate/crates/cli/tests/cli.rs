use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynsym_lab::report::{DemoReport, EntryKind, RunReport, SymmetryEntry, Theorem2Report};
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynsym-lab"))
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(cmd: &str, configs: &[&Path], out: &Path) -> Output {
    let mut c = bin();
    c.arg(cmd);
    for cfg in configs {
        c.arg("--config").arg(cfg);
    }
    c.arg("--out").arg(out).output().unwrap()
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn sx_site0() -> Value {
    json!({"name": "sx_0", "terms": [{"factors": [{"site": 0, "op": "sigma_x"}]}]})
}

fn heisenberg(b: f64, n: usize) -> Value {
    let angles: Vec<[f64; 2]> = (0..n)
        .map(|j| [std::f64::consts::FRAC_PI_2 - 0.35 + 0.1 * j as f64, 0.15 * j as f64])
        .collect();
    json!({
        "model": {"variant": "heisenberg_nnn", "n_sites": n, "couplings": {"J": 1.0, "B": b}},
        "dynamics": {
            "initial_state": {"kind": "bloch_sites", "angles": angles},
            "observables": [sx_site0()]
        }
    })
}

fn hubbard() -> Value {
    json!({"model": {"variant": "hubbard", "n_sites": 4, "couplings": {"t": 1.0, "U": 2.0, "mu": 0.5, "B": 0.7}}})
}

fn su3(b1: f64, b2: f64) -> Value {
    json!({
        "model": {"variant": "su3_chain", "n_sites": 4, "couplings": {"J": 1.0, "B1": b1, "B2": b2}},
        "dynamics": {"observables": [{"name": "tau1_0", "terms": [{"factors": [{"site": 0, "op": "tau_1"}]}]}]}
    })
}

#[test]
fn hubbard_find_reports_two_pairs_and_two_uniform_charges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.json", &hubbard());
    let out = tmp.path().join("out");
    ok(&run("find", &[&cfg], &out));
    let entries: Vec<SymmetryEntry> = read_json(&out.join("symmetries.json"));
    let mut pair_ids: Vec<usize> = entries.iter().filter_map(|e| e.pair_id).collect();
    pair_ids.dedup();
    assert_eq!(pair_ids, vec![0, 1]);
    let charges: Vec<_> = entries.iter().filter(|e| e.kind == EntryKind::Charge).collect();
    assert_eq!(charges.len(), 2);
    assert!(charges.iter().all(|c| c.uniform));
    let mut lambdas: Vec<f64> = entries
        .iter()
        .filter(|e| e.kind == EntryKind::Symmetry && e.lambda > 0.0)
        .map(|e| e.lambda)
        .collect();
    lambdas.sort_by(f64::total_cmp);
    assert!((lambdas[0] - 0.7).abs() < 1e-9 && (lambdas[1] - 1.0).abs() < 1e-9, "{lambdas:?}");
    for e in &entries {
        assert!(e.residual <= 1e-8);
        assert!(!e.site_coefficients.is_empty());
    }
}

#[test]
fn symmetric_heisenberg_has_no_symmetries() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.json", &heisenberg(0.0, 5));
    let out = tmp.path().join("out");
    ok(&run("find", &[&cfg], &out));
    let entries: Vec<SymmetryEntry> = read_json(&out.join("symmetries.json"));
    assert!(entries.iter().all(|e| e.kind == EntryKind::Charge));
    assert_eq!(entries.len(), 3);
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let bad = [
        ("malformed.json", "{\"model\": {".to_string()),
        (
            "unknown_key.json",
            json!({"model": {"variant": "field_chain", "n_sites": 3, "couplings": {"B": 1.0}}, "finder": {"tol": 1e-8}})
                .to_string(),
        ),
        (
            "missing_coupling.json",
            json!({"model": {"variant": "su3_chain", "n_sites": 4, "couplings": {"J": 1.0, "B1": 1.0}}}).to_string(),
        ),
        (
            "bad_observable.json",
            json!({
                "model": {"variant": "field_chain", "n_sites": 3, "couplings": {"B": 1.0}},
                "dynamics": {"observables": [{"name": "x", "terms": [{"factors": [{"site": 0, "op": "tau_1"}]}]}]}
            })
            .to_string(),
        ),
    ];
    for (name, text) in bad {
        let path = tmp.path().join(name);
        std::fs::write(&path, text).unwrap();
        for cmd in ["find", "evolve"] {
            let out = tmp.path().join(format!("out_{name}_{cmd}"));
            let o = run(cmd, &[&path], &out);
            assert_eq!(o.status.code(), Some(2), "{name} {cmd}");
            assert!(!out.exists(), "{name} left partial outputs");
            assert!(!o.stderr.is_empty());
        }
    }
    // evolve without a dynamics section.
    let cfg = write_config(tmp.path(), "h.json", &hubbard());
    let out = tmp.path().join("no_dyn");
    assert_eq!(run("evolve", &[&cfg], &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn field_chain_series_is_a_cosine() {
    let tmp = TempDir::new().unwrap();
    let n = 300;
    let cfg = write_config(
        tmp.path(),
        "f.json",
        &json!({
            "model": {"variant": "field_chain", "n_sites": 2, "couplings": {"B": 1.0}},
            "dynamics": {"grid": {"t0": 0.0, "dt": 0.037, "n_steps": n}, "observables": [sx_site0()]}
        }),
    );
    let out = tmp.path().join("out");
    ok(&run("evolve", &[&cfg], &out));
    let csv = std::fs::read_to_string(out.join("sx_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), n + 1);
    assert_eq!(lines[0], "t,value");
    for line in &lines[1..] {
        let (t_text, v_text) = line.split_once(',').unwrap();
        assert!(v_text.contains('e'), "{line}");
        let (t, v): (f64, f64) = (t_text.parse().unwrap(), v_text.parse().unwrap());
        assert!((v - (2.0 * t).cos()).abs() < 1e-12, "t={t}: {v}");
    }
    let metrics: Value = read_json(&out.join("metrics.json"));
    assert!(metrics["observables"][0]["metrics"]["late_window_variance"].as_f64().unwrap() > 0.1);
}

#[test]
fn identical_runs_are_byte_identical_and_reports_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.json", &heisenberg(1.0, 6));
    for cmd in ["find", "evolve", "theorem1", "theorem2"] {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        ok(&run(cmd, &[&cfg], &a));
        ok(&run(cmd, &[&cfg], &b));
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "timing.json")
            .collect();
        names.sort();
        assert!(names.contains(&"report.json".to_string()));
        for name in &names {
            assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{cmd}/{name}");
        }
        assert!(a.join("timing.json").exists());

        let bytes = std::fs::read(a.join("report.json")).unwrap();
        let report: RunReport = serde_json::from_slice(&bytes).unwrap();
        report.validate().unwrap();
        assert_eq!(report.command, cmd);
        let mut again = serde_json::to_vec_pretty(&report).unwrap();
        again.push(b'\n');
        assert_eq!(again, bytes);
    }
}

#[test]
fn report_schema_is_enforced() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.json", &hubbard());
    let out = tmp.path().join("out");
    ok(&run("find", &[&cfg], &out));
    let mut value: Value = read_json(&out.join("report.json"));
    value["schema_version"] = json!(99);
    let report: RunReport = serde_json::from_value(value.clone()).unwrap();
    assert!(report.validate().is_err());
    value["schema_version"] = json!(1);
    value["extra"] = json!(true);
    assert!(serde_json::from_value::<RunReport>(value).is_err());
}

#[test]
fn theorem_commands() {
    let tmp = TempDir::new().unwrap();
    let h = write_config(tmp.path(), "h.json", &hubbard());
    let out = tmp.path().join("t1");
    ok(&run("theorem1", &[&h], &out));
    let entries: Value = read_json(&out.join("theorem1.json"));
    let names: Vec<&str> = entries
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["best_match"]["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["S_z^tot", "eta_z^tot"]);
    for e in entries.as_array().unwrap() {
        assert!(e["conservation_residual"].as_f64().unwrap() <= 1e-8);
        assert!(e["best_match"]["cosine"].as_f64().unwrap() > 1.0 - 1e-9);
    }

    // Hubbard has no single-site algebra to rebuild from.
    let out = tmp.path().join("t2h");
    assert_eq!(run("theorem2", &[&h], &out).status.code(), Some(2));
    assert!(!out.exists());

    let (b1, b2) = (1.0, 0.7);
    let s = write_config(tmp.path(), "s.json", &su3(b1, b2));
    let out = tmp.path().join("t2");
    ok(&run("theorem2", &[&s], &out));
    let t2: Theorem2Report = read_json(&out.join("theorem2.json"));
    assert!(t2.build_gap <= 1e-12);
    assert_eq!(t2.roots.len(), 6);
    let r3 = 3f64.sqrt();
    let mut measured: Vec<f64> = t2.roots.iter().map(|r| r.measured).filter(|l| *l > 0.0).collect();
    measured.sort_by(f64::total_cmp);
    let mut expected = [b1, (b1 + r3 * b2) / 2.0, (-b1 + r3 * b2) / 2.0];
    expected.sort_by(f64::total_cmp);
    for (m, e) in measured.iter().zip(&expected) {
        assert!((m - e).abs() <= 1e-9, "{m} vs {e}");
    }
}

#[test]
fn demo_shows_the_removal_effect() {
    let tmp = TempDir::new().unwrap();
    let on = write_config(tmp.path(), "on.json", &heisenberg(1.0, 8));
    let off = write_config(tmp.path(), "off.json", &heisenberg(0.0, 8));
    let out = tmp.path().join("h2");
    ok(&run("demo", &[&on, &off], &out));
    let demo: DemoReport = read_json(&out.join("demo.json"));
    assert_eq!(demo.pair_counts, [1, 0]);
    assert!(demo.observables[0].variance_ratio.unwrap() >= 10.0, "{:?}", demo.observables);
    assert!(out.join("a_sx_0.csv").exists() && out.join("b_sx_0.csv").exists());

    let on = write_config(tmp.path(), "s_on.json", &su3(1.0, 1.0));
    let off = write_config(tmp.path(), "s_off.json", &su3(0.0, 0.0));
    let out = tmp.path().join("h3");
    ok(&run("demo", &[&on, &off], &out));
    let demo: DemoReport = read_json(&out.join("demo.json"));
    assert_eq!(demo.pair_counts, [3, 0]);
    assert_eq!(demo.uniform_charge_counts[1], 8);

    let out = tmp.path().join("same");
    ok(&run("demo", &[&on, &on], &out));
    let demo: DemoReport = read_json(&out.join("demo.json"));
    assert_eq!(demo.pair_count_delta, 0);
    assert_eq!(demo.charge_count_delta, 0);
    for o in &demo.observables {
        assert_eq!(o.variance_ratio, Some(1.0));
        assert_eq!(o.variance_delta, 0.0);
    }
}

#[test]
fn demo_refuses_unrelated_configs() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.json", &heisenberg(1.0, 6));
    let mut other = heisenberg(0.0, 6);
    other["model"]["couplings"]["J"] = json!(0.5);
    let b = write_config(tmp.path(), "b.json", &other);
    let c = write_config(tmp.path(), "c.json", &heisenberg(0.0, 7));
    for pair in [[&a, &b], [&a, &c]] {
        let out = tmp.path().join("out");
        let o = run("demo", &[pair[0].as_path(), pair[1].as_path()], &out);
        assert_eq!(o.status.code(), Some(2));
        assert!(!out.exists());
    }
    let o = run("demo", &[&a], &tmp.path().join("one"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unmatchable_thermal_energy_is_a_warning() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g.json",
        &json!({
            "model": {"variant": "field_chain", "n_sites": 3, "couplings": {"B": 1.0}},
            "dynamics": {
                "initial_state": {"kind": "uniform", "amplitudes": [[0.0, 0.0], [1.0, 0.0]]},
                "grid": {"t0": 0.0, "dt": 0.1, "n_steps": 64},
                "observables": [{"name": "sz_0", "terms": [{"factors": [{"site": 0, "op": "sigma_z"}]}]}]
            }
        }),
    );
    let out = tmp.path().join("out");
    let o = run("evolve", &[&cfg], &out);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let metrics: Value = read_json(&out.join("metrics.json"));
    assert!(metrics["observables"][0]["metrics"]["thermal_gap"].is_null());
    assert_eq!(metrics["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn tol_flag_and_output_directory_fallback() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = hubbard();
    let target = tmp.path().join("from_config");
    cfg["outputs"] = json!({"directory": target.to_str().unwrap(), "formats": ["json"]});
    let path = write_config(tmp.path(), "h.json", &cfg);
    let o = bin().args(["find", "--config"]).arg(&path).args(["--tol", "1e-9"]).output().unwrap();
    ok(&o);
    let report: RunReport = read_json(&target.join("report.json"));
    assert_eq!(report.symmetries[0].pair_count, 2);
    let o = bin().args(["find", "--config"]).arg(&path).args(["--tol", "-1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
