//! Lattice Hamiltonians: a free spin chain in a field, the Heisenberg chain
//! with next-nearest-neighbour exchange, an SU(2)-symmetric three-body chain,
//! an SU(3) exchange chain and the one-dimensional Hubbard model.

mod fermion;

pub use fermion::{jordan_wigner, jordan_wigner_with_boundary, local_annihilator, FermionMap, Spin};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opalg::{
    embed_product, gell_mann_basis, pauli_basis, Boundary, ExtensiveOperator, LatticeOperator, LatticeSpec,
    SiteOperator,
};

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    FieldChain,
    HeisenbergNnn,
    ThreeBodySu2,
    Su3Chain,
    Hubbard,
}

impl ModelVariant {
    pub fn local_dim(&self) -> usize {
        match self {
            ModelVariant::Su3Chain => 3,
            ModelVariant::Hubbard => 4,
            _ => 2,
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            ModelVariant::FieldChain => &["B"],
            ModelVariant::HeisenbergNnn => &["J", "B"],
            ModelVariant::ThreeBodySu2 => &["J", "B"],
            ModelVariant::Su3Chain => &["J", "B1", "B2"],
            ModelVariant::Hubbard => &["t", "U", "mu", "B"],
        }
    }

    fn optional(&self) -> &'static [&'static str] {
        match self {
            ModelVariant::HeisenbergNnn | ModelVariant::Su3Chain => &["J2"],
            _ => &[],
        }
    }

    /// Couplings that explicitly break the non-Abelian symmetry.
    pub fn breaking_couplings(&self) -> &'static [&'static str] {
        match self {
            ModelVariant::FieldChain | ModelVariant::HeisenbergNnn | ModelVariant::ThreeBodySu2 => &["B"],
            ModelVariant::Su3Chain => &["B1", "B2"],
            ModelVariant::Hubbard => &["B", "mu"],
        }
    }
}

/// A model choice with named couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub n_sites: usize,
    #[serde(default)]
    pub couplings: BTreeMap<String, f64>,
    #[serde(default)]
    pub boundary: Boundary,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, n_sites: usize, couplings: &[(&str, f64)]) -> Self {
        Self {
            variant,
            n_sites,
            couplings: couplings.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            boundary: Boundary::Open,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Checks required coupling keys, rejects unknown keys and non-finite values.
    pub fn validate(&self) -> Result<()> {
        let required = self.variant.required();
        let optional = self.variant.optional();
        for key in required {
            if !self.couplings.contains_key(*key) {
                return Err(Error::InvalidParameter(format!(
                    "{:?} requires coupling '{key}'",
                    self.variant
                )));
            }
        }
        for (key, value) in &self.couplings {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "unknown coupling '{key}' for {:?}",
                    self.variant
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("coupling '{key}' is not finite")));
            }
        }
        Ok(())
    }

    pub fn coupling(&self, key: &str) -> Result<f64> {
        self.couplings
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("missing coupling '{key}'")))
    }

    pub fn spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.n_sites, self.variant.local_dim(), self.boundary)
    }

    pub fn build(&self) -> Result<LatticeOperator> {
        self.validate()?;
        let n = self.n_sites;
        let b = self.boundary;
        match self.variant {
            ModelVariant::FieldChain => build_field_chain(n, self.coupling("B")?),
            ModelVariant::HeisenbergNnn => {
                let j = self.coupling("J")?;
                let j2 = self.couplings.get("J2").copied().unwrap_or(j);
                build_heisenberg_nnn_j2(n, j, j2, self.coupling("B")?, b)
            }
            ModelVariant::ThreeBodySu2 => build_three_body_su2_with_boundary(n, self.coupling("J")?, self.coupling("B")?, b),
            ModelVariant::Su3Chain => {
                let j = self.coupling("J")?;
                let j2 = self.couplings.get("J2").copied().unwrap_or(j);
                build_su3_chain_j2(n, j, j2, self.coupling("B1")?, self.coupling("B2")?, b)
            }
            ModelVariant::Hubbard => build_hubbard_with_boundary(
                n,
                self.coupling("t")?,
                self.coupling("U")?,
                self.coupling("mu")?,
                self.coupling("B")?,
                b,
            ),
        }
    }

    /// The same model with every symmetry-breaking coupling set to zero.
    pub fn symmetric_counterpart(&self) -> Self {
        let mut out = self.clone();
        for key in self.variant.breaking_couplings() {
            if let Some(v) = out.couplings.get_mut(*key) {
                *v = 0.0;
            }
        }
        out
    }

    /// Known extensive charges of the model family, for labelling.
    pub fn named_charges(&self) -> Result<Vec<NamedForm>> {
        let spec = self.spec()?;
        match self.variant {
            ModelVariant::Hubbard => hubbard_named_charges(spec),
            ModelVariant::Su3Chain => uniform_generators(spec, "tau_{}^tot", 3),
            _ => {
                let p = pauli_basis();
                ["sigma_x^tot", "sigma_y^tot", "sigma_z^tot"]
                    .iter()
                    .zip(&p)
                    .map(|(name, op)| NamedForm::new(name, ExtensiveOperator::uniform(spec, op)?))
                    .collect()
            }
        }
    }

    /// Known dynamical-symmetry forms of the model family, for labelling.
    pub fn named_symmetries(&self) -> Result<Vec<NamedForm>> {
        let spec = self.spec()?;
        match self.variant {
            ModelVariant::Hubbard => hubbard_named_symmetries(spec),
            ModelVariant::Su3Chain => {
                let g = gell_mann_basis(3)?;
                let mut out = Vec::new();
                for (k, (a, b)) in [(0, 1), (3, 4), (5, 6)].into_iter().enumerate() {
                    let plus = g[a].add(&g[b].scale(I));
                    out.push(NamedForm::new(&format!("A_+{}^tot", k + 1), ExtensiveOperator::uniform(spec, &plus)?)?);
                    out.push(NamedForm::new(
                        &format!("A_-{}^tot", k + 1),
                        ExtensiveOperator::uniform(spec, &plus.adjoint())?,
                    )?);
                }
                Ok(out)
            }
            _ => {
                let p = pauli_basis();
                let plus = p[0].add(&p[1].scale(I)).scale(cz(0.5));
                Ok(vec![
                    NamedForm::new("S_+z^tot", ExtensiveOperator::uniform(spec, &plus)?)?,
                    NamedForm::new("S_-z^tot", ExtensiveOperator::uniform(spec, &plus.adjoint())?)?,
                ])
            }
        }
    }
}

/// A labelled extensive operator, possibly with a multiple of the identity.
#[derive(Debug, Clone)]
pub struct NamedForm {
    pub name: String,
    pub operator: ExtensiveOperator,
}

impl NamedForm {
    pub fn new(name: &str, operator: ExtensiveOperator) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            operator,
        })
    }

    pub fn compile(&self) -> LatticeOperator {
        self.operator.compile()
    }
}

fn uniform_generators(spec: LatticeSpec, pattern: &str, d: usize) -> Result<Vec<NamedForm>> {
    gell_mann_basis(d)?
        .iter()
        .enumerate()
        .map(|(k, op)| {
            NamedForm::new(
                &pattern.replace("{}", &(k + 1).to_string()),
                ExtensiveOperator::uniform(spec, op)?,
            )
        })
        .collect()
}

/// Nearest-neighbour pairs `(j, j+1)`, plus the wrap-around bond when periodic.
pub fn nn_pairs(n: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    pairs_at_distance(n, 1, boundary)
}

/// Next-nearest-neighbour pairs `(j, j+2)`.
pub fn nnn_pairs(n: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    pairs_at_distance(n, 2, boundary)
}

fn pairs_at_distance(n: usize, r: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let last = match boundary {
        Boundary::Open => n.saturating_sub(r),
        Boundary::Periodic => n,
    };
    for j in 0..last {
        let k = (j + r) % n;
        if k == j {
            continue;
        }
        let pair = (j.min(k), j.max(k));
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    out
}

/// `Σ_a g_a^{(j)} g_a^{(k)}` over a generator basis.
fn exchange(spec: LatticeSpec, basis: &[SiteOperator], j: usize, k: usize) -> Result<LatticeOperator> {
    let mut acc = LatticeOperator::zero(spec);
    for g in basis {
        acc = acc.add(&embed_product(&[(j, g), (k, g)], spec)?)?;
    }
    Ok(acc)
}

fn uniform_field(spec: LatticeSpec, op: &SiteOperator, strength: f64) -> Result<LatticeOperator> {
    Ok(ExtensiveOperator::uniform(spec, op)?.compile().scale_re(strength))
}

fn finish(h: LatticeOperator) -> Result<LatticeOperator> {
    let h = h.with_hermitian_check();
    if h.hermitian_hint() != Some(true) {
        return Err(Error::NotHermitian(h.hermiticity_defect()));
    }
    Ok(h)
}

/// `H = B Σ_j σ_z^{(j)}`.
pub fn build_field_chain(n: usize, b: f64) -> Result<LatticeOperator> {
    let spec = LatticeSpec::new(n, 2, Boundary::Open)?;
    finish(uniform_field(spec, &pauli_basis()[2], b)?)
}

/// `H₂ = (B/2) Σ σ_z + (J/2) Σ_{NN} σ⃗·σ⃗ + (J/2) Σ_{NNN} σ⃗·σ⃗`.
pub fn build_heisenberg_nnn(n: usize, j: f64, b: f64, boundary: Boundary) -> Result<LatticeOperator> {
    build_heisenberg_nnn_j2(n, j, j, b, boundary)
}

/// As [`build_heisenberg_nnn`] with a separate next-nearest-neighbour coupling `j2`.
pub fn build_heisenberg_nnn_j2(n: usize, j: f64, j2: f64, b: f64, boundary: Boundary) -> Result<LatticeOperator> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "next-nearest-neighbour chain needs N >= 4, got {n}"
        )));
    }
    let spec = LatticeSpec::new(n, 2, boundary)?;
    let p = pauli_basis();
    let mut h = uniform_field(spec, &p[2], b / 2.0)?;
    for (coupling, pairs) in [(j, nn_pairs(n, boundary)), (j2, nnn_pairs(n, boundary))] {
        for (a, c) in pairs {
            h = h.add(&exchange(spec, &p, a, c)?.scale_re(coupling / 2.0))?;
        }
    }
    finish(h)
}

/// `ε_abc σ_a^{(j)} σ_b^{(j+1)} σ_c^{(j+2)}` summed over consecutive triples,
/// times `j3`, plus `(B/2) Σ σ_z`.
pub fn build_three_body_su2(n: usize, j3: f64, b: f64) -> Result<LatticeOperator> {
    build_three_body_su2_with_boundary(n, j3, b, Boundary::Open)
}

pub fn build_three_body_su2_with_boundary(n: usize, j3: f64, b: f64, boundary: Boundary) -> Result<LatticeOperator> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("three-body chain needs N >= 3, got {n}")));
    }
    let spec = LatticeSpec::new(n, 2, boundary)?;
    let h = uniform_field(spec, &pauli_basis()[2], b / 2.0)?;
    finish(h.add(&three_body_block(spec, boundary)?.scale_re(j3))?)
}

/// The bare SU(2)-invariant triple-product block.
pub fn three_body_block(spec: LatticeSpec, boundary: Boundary) -> Result<LatticeOperator> {
    let n = spec.n_sites();
    let p = pauli_basis();
    // (a, b, c, sign): cyclic permutations of xyz positive, anticyclic negative.
    const TERMS: [(usize, usize, usize, f64); 6] = [
        (0, 1, 2, 1.0),
        (1, 2, 0, 1.0),
        (2, 0, 1, 1.0),
        (2, 1, 0, -1.0),
        (0, 2, 1, -1.0),
        (1, 0, 2, -1.0),
    ];
    let starts = match boundary {
        Boundary::Open => n - 2,
        Boundary::Periodic => n,
    };
    let mut h = LatticeOperator::zero(spec);
    for j in 0..starts {
        let sites = [j, (j + 1) % n, (j + 2) % n];
        for &(a, b, c, sign) in &TERMS {
            let term = embed_product(&[(sites[0], &p[a]), (sites[1], &p[b]), (sites[2], &p[c])], spec)?;
            h = h.add(&term.scale_re(sign))?;
        }
    }
    Ok(h)
}

/// `H₃ = (J/2) Σ_α [Σ_{NN} + Σ_{NNN}] τ_α τ_α + (B₁/2) Σ τ_3 + (B₂/2) Σ τ_8`.
pub fn build_su3_chain(n: usize, j: f64, b1: f64, b2: f64, boundary: Boundary) -> Result<LatticeOperator> {
    build_su3_chain_j2(n, j, j, b1, b2, boundary)
}

pub fn build_su3_chain_j2(n: usize, j: f64, j2: f64, b1: f64, b2: f64, boundary: Boundary) -> Result<LatticeOperator> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("SU(3) chain needs N >= 4, got {n}")));
    }
    let spec = LatticeSpec::new(n, 3, boundary)?;
    let g = gell_mann_basis(3)?;
    let mut h = uniform_field(spec, &g[2], b1 / 2.0)?.add(&uniform_field(spec, &g[7], b2 / 2.0)?)?;
    for (coupling, pairs) in [(j, nn_pairs(n, boundary)), (j2, nnn_pairs(n, boundary))] {
        for (a, c) in pairs {
            h = h.add(&exchange(spec, &g, a, c)?.scale_re(coupling / 2.0))?;
        }
    }
    finish(h)
}

/// Open Hubbard chain: `−t` hopping on `L−1` bonds and on-site
/// `U n↑n↓ − μ(n↑+n↓) + (B/2)(n↑−n↓)` on every site.
pub fn build_hubbard(l: usize, t: f64, u: f64, mu: f64, b: f64) -> Result<LatticeOperator> {
    build_hubbard_with_boundary(l, t, u, mu, b, Boundary::Open)
}

/// Hubbard chain; periodic boundaries need an even number of sites so that
/// the staggered η operators stay consistent around the ring.
pub fn build_hubbard_with_boundary(
    l: usize,
    t: f64,
    u: f64,
    mu: f64,
    b: f64,
    boundary: Boundary,
) -> Result<LatticeOperator> {
    if boundary == Boundary::Periodic && l % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "periodic Hubbard chain needs an even number of sites, got {l}"
        )));
    }
    let map = jordan_wigner_with_boundary(l, boundary)?;
    let spec = *map.spec();
    let mut h = LatticeOperator::zero(spec);
    for (a, c) in nn_pairs(l, boundary) {
        for spin in [Spin::Up, Spin::Down] {
            let hop = map.creator(a, spin).matmul(map.annihilator(c, spin))?;
            h = h.add(&hop.add(&hop.dagger())?.scale_re(-t))?;
        }
    }
    let onsite = hubbard_onsite(u, mu, b);
    h = h.add(&ExtensiveOperator::uniform(spec, &onsite)?.compile())?;
    finish(h)
}

fn local_number(spin: Spin) -> DMatrix<Complex64> {
    let c = local_annihilator(spin).matrix;
    c.adjoint() * c
}

/// The 4×4 on-site Hubbard term.
pub fn hubbard_onsite(u: f64, mu: f64, b: f64) -> SiteOperator {
    let up = local_number(Spin::Up);
    let down = local_number(Spin::Down);
    let m = &up * &down * cz(u) - (&up + &down) * cz(mu) + (&up - &down) * cz(b / 2.0);
    SiteOperator::new(m)
}

/// On-site `c†↑ c↓`.
pub fn local_spin_raising() -> SiteOperator {
    let up = local_annihilator(Spin::Up).matrix;
    let down = local_annihilator(Spin::Down).matrix;
    SiteOperator::labeled(up.adjoint() * down, "c_up^dag c_down")
}

/// On-site `c†↑ c†↓`.
pub fn local_pair_creation() -> SiteOperator {
    let up = local_annihilator(Spin::Up).matrix;
    let down = local_annihilator(Spin::Down).matrix;
    SiteOperator::labeled(up.adjoint() * down.adjoint(), "c_up^dag c_down^dag")
}

/// `(−1)^j` with the paper-style 1-based site count, i.e. `−1` on site 0.
pub fn staggering(l: usize) -> Vec<f64> {
    (0..l).map(|j| if j % 2 == 0 { -1.0 } else { 1.0 }).collect()
}

fn hubbard_named_charges(spec: LatticeSpec) -> Result<Vec<NamedForm>> {
    let up = local_number(Spin::Up);
    let down = local_number(Spin::Down);
    let id = DMatrix::<Complex64>::identity(4, 4);
    Ok(vec![
        NamedForm::new(
            "S_z^tot",
            ExtensiveOperator::uniform(spec, &SiteOperator::new(&up - &down))?,
        )?,
        NamedForm::new(
            "eta_z^tot",
            ExtensiveOperator::uniform(spec, &SiteOperator::new(&up + &down - id))?,
        )?,
    ])
}

fn hubbard_named_symmetries(spec: LatticeSpec) -> Result<Vec<NamedForm>> {
    let s_plus = local_spin_raising();
    let eta_plus = local_pair_creation();
    let signs = staggering(spec.n_sites());
    let eta = ExtensiveOperator::weighted(spec, &eta_plus, &signs)?;
    Ok(vec![
        NamedForm::new("S_+z^tot", ExtensiveOperator::uniform(spec, &s_plus)?)?,
        NamedForm::new("S_-z^tot", ExtensiveOperator::uniform(spec, &s_plus.adjoint())?)?,
        NamedForm::new("eta_+z^tot", eta.clone())?,
        NamedForm::new("eta_-z^tot", eta.dagger())?,
    ])
}
