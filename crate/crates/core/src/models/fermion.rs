//! Spin-1/2 fermions on a chain, encoded on qubits with a Jordan–Wigner string.
//!
//! Each lattice site is a 4-dimensional local space made of two qubits, the
//! spin-up mode first. Modes are ordered `(0↑, 0↓, 1↑, 1↓, …)` and
//! `c_k = (Π_{m<k} Z_m) σ⁻_k`, with qubit state `|1⟩` meaning occupied.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::opalg::{embed_product, Boundary, LatticeOperator, LatticeSpec, SiteOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Up,
    Down,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn qubit_lowering() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])
}

fn qubit_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// On-site annihilator for one spin species, including the string through
/// the spin-up qubit of the same site.
pub fn local_annihilator(spin: Spin) -> SiteOperator {
    let id = DMatrix::<Complex64>::identity(2, 2);
    let m = match spin {
        Spin::Up => qubit_lowering().kronecker(&id),
        Spin::Down => qubit_z().kronecker(&qubit_lowering()),
    };
    SiteOperator::new(m)
}

/// `Z ⊗ Z`: the parity string contributed by one fully passed site.
fn local_parity() -> SiteOperator {
    SiteOperator::new(qubit_z().kronecker(&qubit_z()))
}

/// Jordan–Wigner encoding of `2L` fermionic modes.
#[derive(Debug, Clone)]
pub struct FermionMap {
    spec: LatticeSpec,
    mode_order: Vec<(usize, Spin)>,
    annihilators: Vec<LatticeOperator>,
}

impl FermionMap {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn mode_order(&self) -> &[(usize, Spin)] {
        &self.mode_order
    }

    pub fn n_modes(&self) -> usize {
        self.mode_order.len()
    }

    fn mode(site: usize, spin: Spin) -> usize {
        2 * site
            + match spin {
                Spin::Up => 0,
                Spin::Down => 1,
            }
    }

    pub fn annihilator(&self, site: usize, spin: Spin) -> &LatticeOperator {
        &self.annihilators[Self::mode(site, spin)]
    }

    pub fn creator(&self, site: usize, spin: Spin) -> LatticeOperator {
        self.annihilator(site, spin).dagger()
    }

    pub fn number(&self, site: usize, spin: Spin) -> LatticeOperator {
        self.creator(site, spin)
            .matmul(self.annihilator(site, spin))
            .expect("same lattice")
    }

    pub fn annihilator_by_mode(&self, k: usize) -> &LatticeOperator {
        &self.annihilators[k]
    }

    /// Largest HS deviation from `{c_i, c_j†} = δ_ij` and `{c_i, c_j} = 0`
    /// over all mode pairs.
    pub fn anticommutation_defect(&self) -> f64 {
        let id = LatticeOperator::identity(self.spec);
        let mut worst: f64 = 0.0;
        for (i, ci) in self.annihilators.iter().enumerate() {
            for (j, cj) in self.annihilators.iter().enumerate() {
                let mixed = ci.anticommutator(&cj.dagger()).expect("same lattice");
                let mixed = if i == j {
                    mixed.sub(&id).expect("same lattice")
                } else {
                    mixed
                };
                let pure = ci.anticommutator(cj).expect("same lattice");
                worst = worst.max(mixed.hs_norm()).max(pure.hs_norm());
            }
        }
        worst
    }
}

/// Builds the encoding for a chain of `l` sites (`2l` qubits).
pub fn jordan_wigner(l: usize) -> Result<FermionMap> {
    jordan_wigner_with_boundary(l, Boundary::Open)
}

pub fn jordan_wigner_with_boundary(l: usize, boundary: Boundary) -> Result<FermionMap> {
    let spec = LatticeSpec::new(l, 4, boundary)?;
    let parity = local_parity();
    let mut mode_order = Vec::with_capacity(2 * l);
    let mut annihilators = Vec::with_capacity(2 * l);
    for site in 0..l {
        for spin in [Spin::Up, Spin::Down] {
            let local = local_annihilator(spin);
            let mut factors: Vec<(usize, &SiteOperator)> = (0..site).map(|s| (s, &parity)).collect();
            factors.push((site, &local));
            annihilators.push(embed_product(&factors, spec)?);
            mode_order.push((site, spin));
        }
    }
    Ok(FermionMap {
        spec,
        mode_order,
        annihilators,
    })
}
