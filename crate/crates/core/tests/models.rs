use dynsym_core::models::{ModelConfig, ModelVariant, NamedForm};
use dynsym_core::opalg::{gell_mann_basis, pauli_basis, Boundary, ExtensiveOperator, LatticeOperator};

fn named<'a>(forms: &'a [NamedForm], name: &str) -> &'a NamedForm {
    forms.iter().find(|f| f.name == name).unwrap_or_else(|| panic!("no form {name}"))
}

fn commutator_norm(h: &LatticeOperator, q: &LatticeOperator) -> f64 {
    h.commutator(q).unwrap().hs_norm()
}

struct Ledger {
    config: ModelConfig,
    conserved: Vec<LatticeOperator>,
    broken: Vec<LatticeOperator>,
}

fn spin_generators(config: &ModelConfig) -> (Vec<LatticeOperator>, Vec<LatticeOperator>) {
    let spec = config.spec().unwrap();
    let tot: Vec<_> = pauli_basis()
        .iter()
        .map(|p| ExtensiveOperator::uniform(spec, p).unwrap().compile())
        .collect();
    (vec![tot[2].clone()], vec![tot[0].clone(), tot[1].clone()])
}

fn ledgers() -> Vec<Ledger> {
    let mut out = Vec::new();
    for config in [
        ModelConfig::new(ModelVariant::FieldChain, 4, &[("B", 0.3)]),
        ModelConfig::new(ModelVariant::HeisenbergNnn, 5, &[("J", 1.0), ("B", 0.1)]),
        ModelConfig::new(ModelVariant::HeisenbergNnn, 6, &[("J", 0.7), ("B", 0.5)]).with_boundary(Boundary::Periodic),
        ModelConfig::new(ModelVariant::ThreeBodySu2, 5, &[("J", 1.2), ("B", 0.25)]),
    ] {
        let (conserved, broken) = spin_generators(&config);
        out.push(Ledger { config, conserved, broken });
    }

    let su3 = ModelConfig::new(ModelVariant::Su3Chain, 4, &[("J", 1.0), ("B1", 0.4), ("B2", 0.1)]);
    let spec = su3.spec().unwrap();
    let tot: Vec<_> = gell_mann_basis(3)
        .unwrap()
        .iter()
        .map(|g| ExtensiveOperator::uniform(spec, g).unwrap().compile())
        .collect();
    out.push(Ledger {
        conserved: vec![tot[2].clone(), tot[7].clone()],
        broken: [0, 1, 3, 4, 5, 6].iter().map(|&k| tot[k].clone()).collect(),
        config: su3,
    });

    let hubbard = ModelConfig::new(ModelVariant::Hubbard, 3, &[("t", 1.0), ("U", 2.0), ("mu", 0.3), ("B", 0.2)]);
    let charges = hubbard.named_charges().unwrap();
    let symmetries = hubbard.named_symmetries().unwrap();
    out.push(Ledger {
        conserved: ["S_z^tot", "eta_z^tot"].iter().map(|n| named(&charges, n).compile()).collect(),
        broken: ["S_+z^tot", "S_-z^tot"].iter().map(|n| named(&symmetries, n).compile()).collect(),
        config: hubbard,
    });
    out
}

#[test]
fn documented_charges_commute_and_broken_generators_do_not() {
    for ledger in ledgers() {
        let h = ledger.config.build().unwrap();
        let h_norm = h.hs_norm();
        for q in &ledger.conserved {
            let c = commutator_norm(&h, q);
            assert!(c <= 1e-12 * h_norm * q.hs_norm(), "{:?}: charge residual {c}", ledger.config.variant);
        }
        for g in &ledger.broken {
            let c = commutator_norm(&h, g);
            assert!(c > 1e-6 * h_norm, "{:?}: broken generator commutes ({c})", ledger.config.variant);
        }
    }
}

#[test]
fn symmetric_counterparts_restore_the_full_algebra() {
    for ledger in ledgers() {
        let sym = ledger.config.symmetric_counterpart();
        let h = sym.build().unwrap();
        if sym.variant == ModelVariant::FieldChain {
            assert_eq!(h.hs_norm(), 0.0);
            continue;
        }
        if sym.variant == ModelVariant::Hubbard {
            // Spin SU(2) survives B = 0; the eta pairing also needs the chemical potential tuned.
            let s = sym.named_symmetries().unwrap();
            for name in ["S_+z^tot", "S_-z^tot"] {
                assert!(commutator_norm(&h, &named(&s, name).compile()) < 1e-12 * h.hs_norm());
            }
            continue;
        }
        for g in ledger.broken.iter().chain(&ledger.conserved) {
            assert!(commutator_norm(&h, g) < 1e-12 * h.hs_norm() * g.hs_norm(), "{:?}", sym.variant);
        }
    }
}

#[test]
fn hubbard_is_block_diagonal_in_the_two_diagonal_charges() {
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let cfg = ModelConfig::new(ModelVariant::Hubbard, 4, &[("t", 0.8), ("U", 3.0), ("mu", 0.4), ("B", 0.3)])
            .with_boundary(boundary);
        let h = cfg.build().unwrap();
        let charges = cfg.named_charges().unwrap();
        let sz = named(&charges, "S_z^tot").compile();
        let eta = named(&charges, "eta_z^tot").compile();
        // Both charges are diagonal in the occupation basis.
        for q in [&sz, &eta] {
            for i in 0..q.dim() {
                for (j, _) in q.matrix().row(i) {
                    assert_eq!(i, j);
                }
            }
        }
        let dense = h.to_dense();
        for i in 0..h.dim() {
            for (j, v) in h.matrix().row(i) {
                if v.norm() == 0.0 {
                    continue;
                }
                assert!((sz.matrix().get(i, i) - sz.matrix().get(j, j)).norm() < 1e-12);
                assert!((eta.matrix().get(i, i) - eta.matrix().get(j, j)).norm() < 1e-12);
            }
        }
        assert!((&dense - dense.adjoint()).norm() < 1e-12);
        let eig = nalgebra::SymmetricEigen::new(dense.clone());
        let trace: f64 = eig.eigenvalues.iter().sum();
        assert!((trace - h.trace().re).abs() < 1e-9 * (1.0 + h.hs_norm()));
    }
}

#[test]
fn rejects_bad_configs() {
    assert!(ModelConfig::new(ModelVariant::HeisenbergNnn, 3, &[("J", 1.0), ("B", 0.0)]).build().is_err());
    assert!(ModelConfig::new(ModelVariant::Su3Chain, 4, &[("J", 1.0), ("B1", 0.0)]).build().is_err());
    assert!(ModelConfig::new(ModelVariant::FieldChain, 2, &[("B", 1.0), ("K", 1.0)]).build().is_err());
    assert!(ModelConfig::new(ModelVariant::FieldChain, 2, &[("B", f64::NAN)]).build().is_err());
    assert!(ModelConfig::new(ModelVariant::Hubbard, 3, &[("t", 1.0), ("U", 1.0), ("mu", 0.0), ("B", 0.0)])
        .with_boundary(Boundary::Periodic)
        .build()
        .is_err());
}
