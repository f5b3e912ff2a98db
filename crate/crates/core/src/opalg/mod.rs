//! Operator algebra on a lattice of `N` sites with local dimension `d`.
//!
//! Site `j` (0-based) is the `j`-th tensor factor counted from the left, so
//! the basis index of a product state `|s_0 s_1 … s_{N-1}⟩` is
//! `Σ_j s_j · d^(N-1-j)`.

mod basis;
mod sparse;

pub use basis::{gell_mann_basis, generator_label, pauli_basis};
pub use sparse::{CsrMatrix, STRUCTURAL_ZERO};

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the Hilbert-space dimension `d^N`.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Largest dimension for which dense eigendecompositions are attempted.
pub const DENSE_MAX_DIM: usize = 1 << 12;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "DYNSYM_MAX_DIM";

/// The configured dimension cap; read once from `DYNSYM_MAX_DIM` if set.
pub fn max_dim() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(MAX_DIM_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_MAX_DIM)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    n_sites: usize,
    local_dim: usize,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, local_dim: usize, boundary: Boundary) -> Result<Self> {
        Self::with_cap(n_sites, local_dim, boundary, max_dim())
    }

    pub fn with_cap(n_sites: usize, local_dim: usize, boundary: Boundary, cap: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidDimension(format!(
                "a lattice needs at least 2 sites, got {n_sites}"
            )));
        }
        if local_dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "local dimension must be at least 2, got {local_dim}"
            )));
        }
        let dim = (0..n_sites).try_fold(1usize, |acc, _| acc.checked_mul(local_dim));
        match dim {
            Some(dim) if dim <= cap => Ok(Self {
                n_sites,
                local_dim,
                boundary,
            }),
            Some(dim) => Err(Error::DimensionCapExceeded { dim, cap }),
            None => Err(Error::DimensionCapExceeded {
                dim: usize::MAX,
                cap,
            }),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total Hilbert-space dimension `d^N`.
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_sites as u32)
    }

    fn stride(&self, site: usize) -> usize {
        self.local_dim.pow((self.n_sites - 1 - site) as u32)
    }

    fn same_space(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites && self.local_dim == other.local_dim
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            })
        } else {
            Ok(())
        }
    }
}

/// A dense `d × d` operator acting on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperator {
    pub matrix: DMatrix<Complex64>,
    pub label: Option<String>,
}

impl SiteOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "site operators are square");
        Self {
            matrix,
            label: None,
        }
    }

    pub fn labeled(matrix: DMatrix<Complex64>, label: impl Into<String>) -> Self {
        let mut op = Self::new(matrix);
        op.label = Some(label.into());
        op
    }

    pub fn identity(d: usize) -> Self {
        Self::labeled(DMatrix::identity(d, d), "identity")
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.matrix.adjoint())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(&self.matrix * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.matrix + &other.matrix)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(self† · other)`.
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        self.matrix.dotc(&other.matrix)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self::new(&self.matrix * &other.matrix - &other.matrix * &self.matrix)
    }
}

/// A sparse operator on the full `d^N`-dimensional lattice Hilbert space.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    spec: LatticeSpec,
    matrix: CsrMatrix,
    hermitian_hint: Option<bool>,
}

impl LatticeOperator {
    pub fn from_csr(spec: LatticeSpec, matrix: CsrMatrix) -> Result<Self> {
        if matrix.dim() != spec.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix of dimension {} on a lattice of dimension {}",
                matrix.dim(),
                spec.dim()
            )));
        }
        Ok(Self {
            spec,
            matrix,
            hermitian_hint: None,
        })
    }

    pub fn zero(spec: LatticeSpec) -> Self {
        Self {
            spec,
            matrix: CsrMatrix::zeros(spec.dim()),
            hermitian_hint: Some(true),
        }
    }

    pub fn identity(spec: LatticeSpec) -> Self {
        Self {
            spec,
            matrix: CsrMatrix::identity(spec.dim()),
            hermitian_hint: Some(true),
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Cached Hermiticity, if it was established at construction.
    pub fn hermitian_hint(&self) -> Option<bool> {
        self.hermitian_hint
    }

    /// Evaluates Hermiticity at `10⁻¹²` and caches the answer.
    pub fn with_hermitian_check(mut self) -> Self {
        self.hermitian_hint = Some(self.is_hermitian(1e-12));
        self
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.spec.same_space(&other.spec) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "lattices ({} sites, d={}) and ({} sites, d={})",
                self.spec.n_sites,
                self.spec.local_dim,
                other.spec.n_sites,
                other.spec.local_dim
            )))
        }
    }

    fn wrap(&self, matrix: CsrMatrix) -> Self {
        Self {
            spec: self.spec,
            matrix,
            hermitian_hint: None,
        }
    }

    pub fn dagger(&self) -> Self {
        Self {
            spec: self.spec,
            matrix: self.matrix.adjoint(),
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.wrap(self.matrix.scale(s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        let mut out = self.scale(Complex64::new(s, 0.0));
        out.hermitian_hint = self.hermitian_hint;
        out
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.wrap(self.matrix.axpby(a, &other.matrix, b)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        self.axpby(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        self.axpby(one, other, -one)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.wrap(self.matrix.matmul(&other.matrix)))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let xy = self.matrix.matmul(&other.matrix);
        let yx = other.matrix.matmul(&self.matrix);
        let one = Complex64::new(1.0, 0.0);
        Ok(self.wrap(xy.axpby(one, &yx, -one)))
    }

    /// `self·other + other·self`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let xy = self.matrix.matmul(&other.matrix);
        let yx = other.matrix.matmul(&self.matrix);
        let one = Complex64::new(1.0, 0.0);
        Ok(self.wrap(xy.axpby(one, &yx, one)))
    }

    /// Hilbert–Schmidt inner product `tr[self† · other]`.
    pub fn hs_inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self.matrix.hs_inner(&other.matrix))
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.hs_norm()
    }

    /// Plain trace `tr[self · other]` (no adjoint).
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(self.matrix.adjoint().hs_inner(&other.matrix))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// True iff `‖X − X†‖_HS ≤ tol · ‖X‖_HS`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `‖X − X†‖_HS / ‖X‖_HS`, zero for the zero operator.
    pub fn hermiticity_defect(&self) -> f64 {
        let norm = self.hs_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let one = Complex64::new(1.0, 0.0);
        self.matrix.axpby(one, &self.matrix.adjoint(), -one).hs_norm() / norm
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mul_vec(x)
    }
}

impl PartialEq for LatticeOperator {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.matrix == other.matrix
    }
}

/// `[x, y]`.
pub fn commutator(x: &LatticeOperator, y: &LatticeOperator) -> Result<LatticeOperator> {
    x.commutator(y)
}

/// `tr[x† y]`.
pub fn hs_inner(x: &LatticeOperator, y: &LatticeOperator) -> Result<Complex64> {
    x.hs_inner(y)
}

/// `𝟙^{⊗j} ⊗ b ⊗ 𝟙^{⊗(N−j−1)}` for a 0-based site index `j`.
pub fn embed(b: &SiteOperator, site: usize, spec: LatticeSpec) -> Result<LatticeOperator> {
    embed_product(&[(site, b)], spec)
}

/// Tensor product of single-site operators on distinct sites, identity elsewhere.
pub fn embed_product(factors: &[(usize, &SiteOperator)], spec: LatticeSpec) -> Result<LatticeOperator> {
    let d = spec.local_dim;
    for (i, &(site, op)) in factors.iter().enumerate() {
        spec.check_site(site)?;
        if op.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "site operator of dimension {} on a lattice with d={d}",
                op.dim()
            )));
        }
        if factors[..i].iter().any(|&(s, _)| s == site) {
            return Err(Error::InvalidParameter(format!(
                "site {site} appears twice in a tensor product"
            )));
        }
    }
    let dim = spec.dim();
    let strides: Vec<usize> = factors.iter().map(|&(s, _)| spec.stride(s)).collect();
    let mut triplets = Vec::new();
    for row in 0..dim {
        // Expand the row over every combination of nonzero factor entries.
        let mut partial = vec![(row, Complex64::new(1.0, 0.0))];
        for (k, &(_, op)) in factors.iter().enumerate() {
            let stride = strides[k];
            let digit = (row / stride) % d;
            let mut next = Vec::with_capacity(partial.len() * d);
            for &(col, amp) in &partial {
                for c in 0..d {
                    let v = op.matrix[(digit, c)];
                    if v.norm() >= STRUCTURAL_ZERO {
                        let col = col - digit * stride + c * stride;
                        next.push((col, amp * v));
                    }
                }
            }
            partial = next;
        }
        triplets.extend(partial.into_iter().map(|(col, v)| (row, col, v)));
    }
    LatticeOperator::from_csr(spec, CsrMatrix::from_triplets(dim, &triplets))
}

/// `A = Σ_j Ã^{(j)}`, stored as one single-site operator per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveOperator {
    spec: LatticeSpec,
    per_site: Vec<SiteOperator>,
}

impl ExtensiveOperator {
    pub fn new(spec: LatticeSpec, per_site: Vec<SiteOperator>) -> Result<Self> {
        if per_site.len() != spec.n_sites {
            return Err(Error::InvalidParameter(format!(
                "expected {} site operators, got {}",
                spec.n_sites,
                per_site.len()
            )));
        }
        if let Some(op) = per_site.iter().find(|op| op.dim() != spec.local_dim) {
            return Err(Error::DimensionMismatch(format!(
                "site operator of dimension {} on a lattice with d={}",
                op.dim(),
                spec.local_dim
            )));
        }
        Ok(Self { spec, per_site })
    }

    /// The same single-site operator on every site.
    pub fn uniform(spec: LatticeSpec, op: &SiteOperator) -> Result<Self> {
        Self::new(spec, vec![op.clone(); spec.n_sites])
    }

    /// `Σ_j coeffs[j] · op^{(j)}`.
    pub fn weighted(spec: LatticeSpec, op: &SiteOperator, coeffs: &[f64]) -> Result<Self> {
        let per_site = coeffs
            .iter()
            .map(|&c| op.scale(Complex64::new(c, 0.0)))
            .collect();
        Self::new(spec, per_site)
    }

    pub fn zero(spec: LatticeSpec) -> Self {
        Self {
            spec,
            per_site: vec![SiteOperator::zeros(spec.local_dim); spec.n_sites],
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn per_site(&self) -> &[SiteOperator] {
        &self.per_site
    }

    pub fn dagger(&self) -> Self {
        Self {
            spec: self.spec,
            per_site: self.per_site.iter().map(SiteOperator::adjoint).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            spec: self.spec,
            per_site: self.per_site.iter().map(|op| op.scale(s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.spec.same_space(&other.spec) {
            return Err(Error::DimensionMismatch("extensive operators on different lattices".into()));
        }
        Ok(Self {
            spec: self.spec,
            per_site: self
                .per_site
                .iter()
                .zip(&other.per_site)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    /// True when every site carries the same operator (to `tol` in HS norm).
    pub fn is_uniform(&self, tol: f64) -> bool {
        let first = &self.per_site[0].matrix;
        let scale = first.norm().max(1e-300);
        self.per_site
            .iter()
            .all(|op| (&op.matrix - first).norm() <= tol * scale)
    }

    pub fn compile(&self) -> LatticeOperator {
        compile(self)
    }
}

/// `Σ_j embed(per_site[j], j)`.
pub fn compile(a: &ExtensiveOperator) -> LatticeOperator {
    let spec = a.spec;
    let d = spec.local_dim;
    let dim = spec.dim();
    let mut triplets = Vec::with_capacity(spec.n_sites * d * dim);
    for row in 0..dim {
        for (site, op) in a.per_site.iter().enumerate() {
            let stride = spec.stride(site);
            let digit = (row / stride) % d;
            for c in 0..d {
                let v = op.matrix[(digit, c)];
                if v.norm() >= STRUCTURAL_ZERO {
                    triplets.push((row, row - digit * stride + c * stride, v));
                }
            }
        }
    }
    LatticeOperator::from_csr(spec, CsrMatrix::from_triplets(dim, &triplets))
        .expect("compiled dimension matches its spec")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spec(n: usize, d: usize) -> LatticeSpec {
        LatticeSpec::new(n, d, Boundary::Open).unwrap()
    }

    fn diag(op: &LatticeOperator) -> Vec<f64> {
        (0..op.dim()).map(|i| op.matrix().get(i, i).re).collect()
    }

    #[test]
    fn spec_rejects_single_site_and_oversized_lattices() {
        assert!(LatticeSpec::new(1, 2, Boundary::Open).is_err());
        assert!(matches!(
            LatticeSpec::with_cap(15, 2, Boundary::Open, 1 << 14),
            Err(Error::DimensionCapExceeded { .. })
        ));
        assert!(LatticeSpec::with_cap(14, 2, Boundary::Open, 1 << 14).is_ok());
    }

    #[test]
    fn embedding_identity_gives_identity() {
        let s = spec(3, 2);
        for j in 0..3 {
            let id = embed(&SiteOperator::identity(2), j, s).unwrap();
            assert_eq!(id, LatticeOperator::identity(s));
        }
    }

    #[test]
    fn embed_sigma_z_on_first_site() {
        let z = &pauli_basis()[2];
        let op = embed(z, 0, spec(2, 2)).unwrap();
        assert_eq!(diag(&op), vec![1.0, 1.0, -1.0, -1.0]);
        assert!(embed(z, 2, spec(2, 2)).is_err());
    }

    #[test]
    fn embed_norm_matches_direct_trace() {
        // tr[(σx ⊗ 1 ⊗ 1)²] = 8 on three qubits.
        let x = &pauli_basis()[0];
        let op = embed(x, 0, spec(3, 2)).unwrap();
        let direct = (op.to_dense() * op.to_dense()).trace();
        assert!((direct - c(8.0)).norm() < 1e-14);
        assert!((op.hs_inner(&op).unwrap() - c(8.0)).norm() < 1e-14);
    }

    #[test]
    fn compile_uniform_and_staggered_sigma_z() {
        let z = &pauli_basis()[2];
        let s = spec(2, 2);
        let uniform = ExtensiveOperator::uniform(s, z).unwrap().compile();
        assert_eq!(diag(&uniform), vec![2.0, 0.0, 0.0, -2.0]);
        let staggered = ExtensiveOperator::weighted(s, z, &[1.0, -1.0]).unwrap().compile();
        assert_eq!(diag(&staggered), vec![0.0, 2.0, -2.0, 0.0]);
        assert_eq!(ExtensiveOperator::zero(s).compile().nnz(), 0);
    }

    #[test]
    fn compile_respects_sparsity_bound() {
        let s = spec(4, 3);
        let g = gell_mann_basis(3).unwrap();
        let per_site = (0..4).map(|j| g[j].add(&g[7 - j])).collect();
        let op = ExtensiveOperator::new(s, per_site).unwrap().compile();
        // At most d nonzeros per row from each site's factor.
        assert!(op.nnz() <= 4 * 3 * 81);
    }

    #[test]
    fn uniform_pauli_commutator() {
        let p = pauli_basis();
        let s = spec(2, 2);
        let x = ExtensiveOperator::uniform(s, &p[0]).unwrap().compile();
        let y = ExtensiveOperator::uniform(s, &p[1]).unwrap().compile();
        let z = ExtensiveOperator::uniform(s, &p[2]).unwrap().compile();
        let lhs = commutator(&x, &y).unwrap();
        let rhs = z.scale(Complex64::new(0.0, 2.0));
        assert!(lhs.sub(&rhs).unwrap().hs_norm() < 1e-14);
        assert_eq!(commutator(&x, &x).unwrap().nnz(), 0);
    }

    #[test]
    fn field_hamiltonian_raises_ladder_operator() {
        // [Σσz, Σ(σx + iσy)] = 2 Σ(σx + iσy) at N = 2, B = 1.
        let p = pauli_basis();
        let s = spec(2, 2);
        let h = ExtensiveOperator::uniform(s, &p[2]).unwrap().compile();
        let ladder = p[0].add(&p[1].scale(Complex64::new(0.0, 1.0)));
        let a = ExtensiveOperator::uniform(s, &ladder).unwrap().compile();
        let dense_h = h.to_dense();
        let dense_a = a.to_dense();
        let dense = &dense_h * &dense_a - &dense_a * &dense_h;
        assert!((dense - a.to_dense() * c(2.0)).norm() < 1e-14);
        assert!(commutator(&h, &a).unwrap().sub(&a.scale_re(2.0)).unwrap().hs_norm() < 1e-14);
    }

    #[test]
    fn overlap_and_orthogonality() {
        let p = pauli_basis();
        let s = spec(4, 2);
        let x1 = embed(&p[0], 0, s).unwrap();
        let y1 = embed(&p[1], 0, s).unwrap();
        assert!(x1.hs_inner(&y1).unwrap().norm() < 1e-14);
        let half = Complex64::new(0.5, 0.0);
        let s_plus = p[0].scale(half).add(&p[1].scale(Complex64::new(0.0, 0.5)));
        let sp = ExtensiveOperator::uniform(s, &s_plus).unwrap().compile();
        let sx = ExtensiveOperator::uniform(s, &p[0]).unwrap().compile();
        assert!(sp.hs_inner(&sx).unwrap().norm() > 1.0);
    }

    #[test]
    fn hermiticity_checks() {
        let p = pauli_basis();
        let s = spec(2, 2);
        let iz = embed(&p[2], 0, s).unwrap().scale(Complex64::new(0.0, 1.0));
        assert!(!iz.is_hermitian(1e-12));
        assert_eq!(iz.dagger().dagger(), iz);
        let n = SiteOperator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0),
            c(0.0),
        ])));
        let staggered = ExtensiveOperator::weighted(s, &n, &[1.0, -1.0]).unwrap().compile();
        assert!(staggered.is_hermitian(1e-12));
    }

    #[test]
    fn mismatched_lattices_are_rejected() {
        let a = LatticeOperator::identity(spec(2, 2));
        let b = LatticeOperator::identity(spec(3, 2));
        assert!(matches!(a.commutator(&b), Err(Error::DimensionMismatch(_))));
        assert!(a.hs_inner(&b).is_err());
    }
}
