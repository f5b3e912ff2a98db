//! Search for extensive, site-local eigenoperators of the adjoint action
//! `A ↦ [H, A]`: conserved charges at `λ = 0` and dynamical symmetries at
//! `λ ≠ 0`, together with the two constructions linking them to charges.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lie::CartanWeylBasis;
use crate::linalg::{cluster, eigh, fix_phase, gram_schmidt};
use crate::models::NamedForm;
use crate::opalg::{
    embed, gell_mann_basis, generator_label, CsrMatrix, ExtensiveOperator, LatticeOperator, LatticeSpec,
    SiteOperator,
};

/// Default relative full-space residual for keeping an eigenoperator.
pub const DEFAULT_TOL_RESIDUAL: f64 = 1e-8;
/// Default eigenvalue grouping tolerance, in units of `max(1, scale(H))`.
pub const DEFAULT_TOL_GROUP: f64 = 1e-8;
/// Maximum relative anti-Hermitian part tolerated in the projected adjoint.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Minimum overlap between `A†` and the partner eigenspace.
pub const PAIRING_OVERLAP: f64 = 1.0 - 1e-8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `Σ_k c_k · op_k` in a single sparse assembly.
fn combine<'a>(spec: LatticeSpec, terms: impl IntoIterator<Item = (Complex64, &'a LatticeOperator)>) -> LatticeOperator {
    let dim = spec.dim();
    let mut triplets = Vec::new();
    for (c, op) in terms {
        if c == ZERO {
            continue;
        }
        for i in 0..dim {
            triplets.extend(op.matrix().row(i).map(|(j, v)| (i, j, c * v)));
        }
    }
    LatticeOperator::from_csr(spec, CsrMatrix::from_triplets(dim, &triplets)).expect("dimension fixed by spec")
}

/// RMS eigenvalue `‖H‖_HS / √dim`, the energy scale used for tolerances.
pub fn energy_scale(h: &LatticeOperator) -> f64 {
    h.hs_norm() / (h.dim() as f64).sqrt()
}

/// One element of the candidate basis.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// `None` for a uniform sum over all sites.
    pub site: Option<usize>,
    pub generator: usize,
    pub label: String,
    pub compiled: LatticeOperator,
}

/// HS-orthonormal basis of traceless extensive operators.
///
/// The full space holds one element per (site, generator) pair, ordered
/// site-major; the uniform space holds one summed element per generator.
#[derive(Debug, Clone)]
pub struct CandidateSpace {
    spec: LatticeSpec,
    generators: Vec<SiteOperator>,
    elements: Vec<Candidate>,
    uniform_only: bool,
    site_norm: f64,
}

/// All `N(d²−1)` single-site generators.
pub fn build_candidate_space(spec: LatticeSpec) -> Result<CandidateSpace> {
    CandidateSpace::build(spec, false)
}

/// The `d²−1` translation-invariant sums `Σ_j g^{(j)}`.
pub fn build_uniform_candidate_space(spec: LatticeSpec) -> Result<CandidateSpace> {
    CandidateSpace::build(spec, true)
}

impl CandidateSpace {
    fn build(spec: LatticeSpec, uniform_only: bool) -> Result<Self> {
        let d = spec.local_dim();
        let n = spec.n_sites();
        let generators = gell_mann_basis(d)?;
        // tr(g²) = 2 for every generator.
        let site_norm = (2.0 * (spec.dim() / d) as f64).sqrt();
        let mut elements = Vec::new();
        if uniform_only {
            let norm = site_norm * (n as f64).sqrt();
            for (b, g) in generators.iter().enumerate() {
                let op = ExtensiveOperator::uniform(spec, &g.scale(cz(1.0 / norm)))?;
                elements.push(Candidate {
                    site: None,
                    generator: b,
                    label: generator_label(d, b),
                    compiled: op.compile(),
                });
            }
        } else {
            let per_site: Vec<Vec<Candidate>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    generators
                        .iter()
                        .enumerate()
                        .map(|(b, g)| {
                            Ok(Candidate {
                                site: Some(j),
                                generator: b,
                                label: generator_label(d, b),
                                compiled: embed(&g.scale(cz(1.0 / site_norm)), j, spec)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            elements = per_site.into_iter().flatten().collect();
        }
        Ok(Self {
            spec,
            generators,
            elements,
            uniform_only,
            site_norm,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Candidate] {
        &self.elements
    }

    pub fn is_uniform_only(&self) -> bool {
        self.uniform_only
    }

    pub fn generators(&self) -> &[SiteOperator] {
        &self.generators
    }

    fn n_gen(&self) -> usize {
        self.generators.len()
    }

    /// The extensive operator `Σ_u a_u B_u`.
    pub fn operator(&self, coeffs: &DVector<Complex64>) -> ExtensiveOperator {
        let d = self.spec.local_dim();
        let n = self.spec.n_sites();
        let g = self.n_gen();
        let mut per_site = vec![DMatrix::<Complex64>::zeros(d, d); n];
        if self.uniform_only {
            let norm = self.site_norm * (n as f64).sqrt();
            let mut local = DMatrix::<Complex64>::zeros(d, d);
            for b in 0..g {
                local += &self.generators[b].matrix * (coeffs[b] / norm);
            }
            per_site.iter_mut().for_each(|m| *m = local.clone());
        } else {
            for (j, m) in per_site.iter_mut().enumerate() {
                for b in 0..g {
                    *m += &self.generators[b].matrix * (coeffs[j * g + b] / self.site_norm);
                }
            }
        }
        ExtensiveOperator::new(self.spec, per_site.into_iter().map(SiteOperator::new).collect())
            .expect("shape fixed by the candidate space")
    }

    /// `compile(Σ_u a_u B_u)` assembled from the cached compiled elements.
    pub fn compile(&self, coeffs: &DVector<Complex64>) -> LatticeOperator {
        combine(self.spec, coeffs.iter().copied().zip(self.elements.iter().map(|c| &c.compiled)))
    }

    /// HS projection coefficients `⟨B_u, X⟩`.
    pub fn project(&self, x: &LatticeOperator) -> Result<DVector<Complex64>> {
        let v: Vec<Complex64> = self
            .elements
            .par_iter()
            .map(|c| c.compiled.hs_inner(x))
            .collect::<Result<_>>()?;
        Ok(DVector::from_vec(v))
    }

    /// Orthonormal coordinates of the uniform directions `Σ_j B_{j,b} / √N`.
    fn uniform_directions(&self) -> Vec<DVector<Complex64>> {
        let m = self.len();
        let g = self.n_gen();
        if self.uniform_only {
            return (0..m).map(|b| unit(m, b)).collect();
        }
        let n = self.spec.n_sites();
        let w = cz(1.0 / (n as f64).sqrt());
        (0..g)
            .map(|b| {
                let mut v = DVector::zeros(m);
                for j in 0..n {
                    v[j * g + b] = w;
                }
                v
            })
            .collect()
    }

    /// True when the coefficients describe a translation-invariant operator.
    pub fn is_uniform(&self, coeffs: &DVector<Complex64>, tol: f64) -> bool {
        if self.uniform_only {
            return true;
        }
        let g = self.n_gen();
        let n = self.spec.n_sites();
        let first = coeffs.rows(0, g).into_owned();
        (1..n).all(|j| (coeffs.rows(j * g, g) - &first).norm() <= tol * coeffs.norm().max(1e-300))
    }

    /// `(site, label, coefficient)` triples for a coefficient vector, with
    /// site-local coefficients of the unnormalized generators.
    pub fn site_coefficients(&self, coeffs: &DVector<Complex64>) -> Vec<(usize, String, Complex64)> {
        let g = self.n_gen();
        let n = self.spec.n_sites();
        let mut out = Vec::new();
        for j in 0..n {
            for b in 0..g {
                let c = if self.uniform_only {
                    coeffs[b] / (self.site_norm * (n as f64).sqrt())
                } else {
                    coeffs[j * g + b] / self.site_norm
                };
                out.push((j, self.elements[if self.uniform_only { b } else { j * g + b }].label.clone(), c));
            }
        }
        out
    }
}

fn unit(m: usize, k: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(m);
    v[k] = ONE;
    v
}

/// Matrix of the adjoint action projected onto a candidate space.
#[derive(Debug, Clone)]
pub struct ProjectedAdjoint {
    /// `T_uv = ⟨B_u, [H, B_v]⟩`.
    pub matrix: DMatrix<Complex64>,
    /// `‖T − T†‖ / max(‖T‖, scale(H))`.
    pub hermiticity_defect: f64,
    /// Full-space images `[H, B_v]`.
    images: Vec<LatticeOperator>,
}

/// Assembles `T` column by column; columns are computed in parallel and
/// stored in a fixed order.
pub fn projected_adjoint(h: &LatticeOperator, space: &CandidateSpace) -> Result<ProjectedAdjoint> {
    if h.dim() != space.spec.dim() || h.spec().local_dim() != space.spec.local_dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian of dimension {} against a candidate space of dimension {}",
            h.dim(),
            space.spec.dim()
        )));
    }
    let images: Vec<LatticeOperator> = space
        .elements
        .par_iter()
        .map(|c| h.commutator(&c.compiled))
        .collect::<Result<_>>()?;
    let m = space.len();
    let columns: Vec<Vec<Complex64>> = images
        .par_iter()
        .map(|img| {
            space
                .elements
                .iter()
                .map(|c| c.compiled.hs_inner(img))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let matrix = DMatrix::from_fn(m, m, |u, v| columns[v][u]);
    // Measured against the energy scale too, so that a numerically zero T
    // does not produce a spurious O(1) relative defect.
    let norm = matrix.norm().max(energy_scale(h));
    let hermiticity_defect = if norm > 0.0 {
        (&matrix - matrix.adjoint()).norm() / norm
    } else {
        0.0
    };
    if hermiticity_defect > HERMITICITY_TOL {
        return Err(Error::NotHermitian(hermiticity_defect));
    }
    Ok(ProjectedAdjoint {
        matrix,
        hermiticity_defect,
        images,
    })
}

impl ProjectedAdjoint {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Tolerances of a search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinderTolerances {
    pub tol_residual: f64,
    pub tol_group: f64,
}

impl Default for FinderTolerances {
    fn default() -> Self {
        Self {
            tol_residual: DEFAULT_TOL_RESIDUAL,
            tol_group: DEFAULT_TOL_GROUP,
        }
    }
}

/// One exact eigenoperator `[H, A] = λA`, `‖A‖_HS = 1`.
#[derive(Debug, Clone)]
pub struct DynamicalSymmetry {
    pub coefficients: DVector<Complex64>,
    pub operator: ExtensiveOperator,
    pub lambda: f64,
    pub residual: f64,
    pub uniform: bool,
}

impl DynamicalSymmetry {
    pub fn compile(&self) -> LatticeOperator {
        self.operator.compile()
    }
}

/// An exact eigenspace of the projected adjoint at one value of `λ`.
#[derive(Debug, Clone)]
pub struct Level {
    pub lambda: f64,
    /// Aligned orthonormal basis: uniform directions first.
    pub members: Vec<DynamicalSymmetry>,
}

impl Level {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }

    fn basis(&self) -> Vec<DVector<Complex64>> {
        self.members.iter().map(|m| m.coefficients.clone()).collect()
    }
}

/// A `±λ` pair of levels; `minus[k]` is the adjoint of `plus[k]`.
#[derive(Debug, Clone)]
pub struct SymmetryPair {
    pub lambda: f64,
    pub plus: Vec<DynamicalSymmetry>,
    pub minus: Vec<DynamicalSymmetry>,
}

impl SymmetryPair {
    pub fn multiplicity(&self) -> usize {
        self.plus.len()
    }

    /// The representative pair, uniform when one exists.
    pub fn primary(&self) -> (&DynamicalSymmetry, &DynamicalSymmetry) {
        (&self.plus[0], &self.minus[0])
    }
}

/// A Hermitian conserved extensive operator.
#[derive(Debug, Clone)]
pub struct Charge {
    /// Real coefficients in the candidate basis.
    pub coefficients: DVector<Complex64>,
    pub operator: ExtensiveOperator,
    pub residual: f64,
    pub uniform: bool,
}

#[derive(Debug, Clone)]
pub struct ChargeBasis {
    pub charges: Vec<Charge>,
    /// `⟨Q_a, Q_b⟩` of the compiled charges.
    pub gram: DMatrix<f64>,
}

impl ChargeBasis {
    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn uniform_count(&self) -> usize {
        self.charges.iter().filter(|c| c.uniform).count()
    }
}

/// Everything found for one Hamiltonian.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub model: String,
    pub tolerances: FinderTolerances,
    pub energy_scale: f64,
    pub zero_threshold: f64,
    pub candidate_dim: usize,
    pub uniform_only: bool,
    /// All exact levels in ascending `λ`.
    pub levels: Vec<Level>,
    pub charges: ChargeBasis,
    pub pairs: Vec<SymmetryPair>,
    pub unpaired_warnings: Vec<String>,
}

impl SymmetryReport {
    /// Number of distinct `λ > 0` levels with a partner.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn zero_level(&self) -> Option<&Level> {
        self.levels.iter().find(|l| l.lambda.abs() <= self.zero_threshold)
    }
}

/// Splits the aligned orthonormal basis of a subspace: uniform directions
/// first, then the site-resolved complement, each with a fixed phase.
fn align(space: &CandidateSpace, basis: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let k = basis.len();
    if k == 0 {
        return Vec::new();
    }
    let m = space.len();
    let w = DMatrix::from_columns(basis);
    let project = |v: &DVector<Complex64>| &w * (w.adjoint() * v);
    let uniform = space.uniform_directions();
    // Directions of the subspace lying inside the uniform span.
    let pu = DMatrix::from_columns(&uniform);
    let overlap = w.adjoint() * &pu * pu.adjoint() * &w;
    let (vals, vecs) = eigh(&overlap).expect("overlap matrix is Hermitian");
    let inside: Vec<DVector<Complex64>> = (0..k)
        .filter(|&i| vals[i] >= 1.0 - 1e-8)
        .map(|i| &w * vecs.column(i))
        .collect();
    let mut ordered: Vec<DVector<Complex64>> = Vec::new();
    if !inside.is_empty() {
        let wi = DMatrix::from_columns(&inside);
        let cands = uniform.iter().map(|u| &wi * (wi.adjoint() * u));
        ordered.extend(gram_schmidt(&[], cands, 1e-6));
    }
    let cands = (0..m).map(|u| project(&unit(m, u)));
    let rest = gram_schmidt(&ordered, cands.collect::<Vec<_>>(), 1e-6);
    ordered.extend(rest);
    if ordered.len() < k {
        // Pathological conditioning: fall back to the raw basis.
        let extra = gram_schmidt(&ordered, basis.to_vec(), 1e-10);
        ordered.extend(extra);
    }
    ordered.truncate(k);
    for v in &mut ordered {
        fix_phase(v);
    }
    ordered
}

fn residual_of(h: &LatticeOperator, a: &LatticeOperator, lambda: f64) -> Result<f64> {
    let r = h.commutator(a)?.axpby(ONE, a, cz(-lambda))?;
    let norm = a.hs_norm();
    Ok(if norm > 0.0 { r.hs_norm() / norm } else { 0.0 })
}

fn make_member(
    h: &LatticeOperator,
    space: &CandidateSpace,
    coeffs: DVector<Complex64>,
    lambda: f64,
) -> Result<DynamicalSymmetry> {
    let operator = space.operator(&coeffs);
    let compiled = operator.compile();
    let residual = residual_of(h, &compiled, lambda)?;
    Ok(DynamicalSymmetry {
        uniform: space.is_uniform(&coeffs, 1e-8),
        coefficients: coeffs,
        operator,
        lambda,
        residual,
    })
}

/// Finds every exact eigenoperator of `[H, ·]` inside `space`.
pub fn find_eigenoperators(
    h: &LatticeOperator,
    space: &CandidateSpace,
    tol: FinderTolerances,
) -> Result<SymmetryReport> {
    find_eigenoperators_named(h, space, tol, "")
}

/// As [`find_eigenoperators`], recording a model descriptor in the report.
pub fn find_eigenoperators_named(
    h: &LatticeOperator,
    space: &CandidateSpace,
    tol: FinderTolerances,
    model: &str,
) -> Result<SymmetryReport> {
    if !(tol.tol_residual > 0.0 && tol.tol_group > 0.0) {
        return Err(Error::InvalidParameter("finder tolerances must be positive".into()));
    }
    if h.hermitian_hint() != Some(true) && !h.is_hermitian(1e-12) {
        return Err(Error::NotHermitian(h.hermiticity_defect()));
    }
    let adj = projected_adjoint(h, space)?;
    let scale = energy_scale(h);
    let group_tol = tol.tol_group * scale.max(1.0);
    let (values, vectors) = eigh(&adj.matrix)?;

    let mut levels = Vec::new();
    for range in cluster(&values, group_tol) {
        let lambda_bar = values[range.clone()].iter().sum::<f64>() / range.len() as f64;
        let cols: Vec<DVector<Complex64>> = range.clone().map(|i| vectors.column(i).into_owned()).collect();
        // Residual operators (T-eigenvector images minus λ̄ times themselves)
        // assembled in the full space.
        let residuals: Vec<LatticeOperator> = cols
            .par_iter()
            .map(|v| {
                let terms = v
                    .iter()
                    .zip(&adj.images)
                    .map(|(&c, img)| (c, img))
                    .chain(v.iter().zip(&space.elements).map(|(&c, e)| (-c * lambda_bar, &e.compiled)));
                combine(space.spec, terms)
            })
            .collect();
        let k = cols.len();
        let gram = DMatrix::from_fn(k, k, |a, b| residuals[a].hs_inner(&residuals[b]).expect("same lattice"));
        let (gvals, gvecs) = eigh(&gram)?;
        // Squared residuals carry an absolute rounding error of order
        // ε·max(G); every selected member is re-verified explicitly below.
        let top = gvals.last().copied().unwrap_or(0.0).max(1.0);
        let floor = (tol.tol_residual * tol.tol_residual).max(64.0 * f64::EPSILON * top * k as f64);
        let vmat = DMatrix::from_columns(&cols);
        let exact: Vec<DVector<Complex64>> = (0..k)
            .filter(|&i| gvals[i] <= floor)
            .map(|i| &vmat * gvecs.column(i))
            .collect();
        if exact.is_empty() {
            continue;
        }
        let ex = DMatrix::from_columns(&exact);
        let restricted = ex.adjoint() * &adj.matrix * &ex;
        let lambda = restricted.trace().re / exact.len() as f64;
        let lambda = if lambda.abs() <= group_tol { 0.0 } else { lambda };
        let aligned = if lambda == 0.0 {
            realify(space, &exact)
        } else {
            align(space, &exact)
        };
        let members = aligned
            .into_par_iter()
            .map(|c| make_member(h, space, c, lambda))
            .collect::<Result<Vec<_>>>()?;
        if members.iter().all(|m| m.residual <= tol.tol_residual) {
            levels.push(Level { lambda, members });
        } else {
            // Recompute individually; keep only the members that pass.
            let kept: Vec<DynamicalSymmetry> =
                members.into_iter().filter(|m| m.residual <= tol.tol_residual).collect();
            if !kept.is_empty() {
                levels.push(Level { lambda, members: kept });
            }
        }
    }

    let (pairs, unpaired_warnings) = pair_levels(h, space, &levels, group_tol)?;
    let mut report = SymmetryReport {
        model: model.to_string(),
        tolerances: tol,
        energy_scale: scale,
        zero_threshold: group_tol,
        candidate_dim: space.len(),
        uniform_only: space.uniform_only,
        levels,
        charges: ChargeBasis {
            charges: Vec::new(),
            gram: DMatrix::zeros(0, 0),
        },
        pairs,
        unpaired_warnings,
    };
    report.charges = extract_charges(&report, h, space)?;
    Ok(report)
}

/// Real orthonormal aligned basis for a subspace closed under conjugation.
fn realify(space: &CandidateSpace, basis: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let mut herm = Vec::with_capacity(2 * basis.len());
    for v in basis {
        herm.push(v.map(|z| cz(z.re)));
        herm.push(v.map(|z| cz(z.im)));
    }
    let span = gram_schmidt(&[], herm, 1e-6);
    let span = if span.len() > basis.len() {
        // Not closed under conjugation at this precision; keep the original span.
        gram_schmidt(&[], basis.to_vec(), 1e-10)
    } else {
        span
    };
    align(space, &span)
        .into_iter()
        .map(|mut v| {
            if v.iter().all(|z| z.im.abs() <= 1e-12 * v.norm()) {
                v.iter_mut().for_each(|z| z.im = 0.0);
            }
            v
        })
        .collect()
}

fn pair_levels(
    h: &LatticeOperator,
    space: &CandidateSpace,
    levels: &[Level],
    group_tol: f64,
) -> Result<(Vec<SymmetryPair>, Vec<String>)> {
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    let mut matched = vec![false; levels.len()];
    for (i, level) in levels.iter().enumerate() {
        if level.lambda <= 0.0 {
            continue;
        }
        let partner = levels
            .iter()
            .position(|l| (l.lambda + level.lambda).abs() <= group_tol && l.multiplicity() == level.multiplicity());
        let Some(p) = partner else {
            warnings.push(format!(
                "level at lambda = {:.12} (multiplicity {}) has no partner at -lambda",
                level.lambda,
                level.multiplicity()
            ));
            continue;
        };
        let target = DMatrix::from_columns(&levels[p].basis());
        let mut ok = true;
        let mut minus = Vec::with_capacity(level.multiplicity());
        for m in &level.members {
            let conj = m.coefficients.map(|z| z.conj());
            let inside = (target.adjoint() * &conj).norm_squared();
            if inside < PAIRING_OVERLAP {
                ok = false;
                break;
            }
            minus.push(make_member(h, space, conj, levels[p].lambda)?);
        }
        if !ok {
            warnings.push(format!(
                "adjoints of the level at lambda = {:.12} are not exact eigenoperators at -lambda",
                level.lambda
            ));
            continue;
        }
        matched[i] = true;
        matched[p] = true;
        pairs.push(SymmetryPair {
            lambda: level.lambda,
            plus: level.members.clone(),
            minus,
        });
    }
    for (i, level) in levels.iter().enumerate() {
        if level.lambda < 0.0 && !matched[i] {
            warnings.push(format!("level at lambda = {:.12} has no partner at +lambda", level.lambda));
        }
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok((pairs, warnings))
}

/// Hermitian basis of the `λ = 0` level: `(A+A†)/2` and `(A−A†)/2i` of each
/// zero-level vector, orthonormalized, uniform members first.
pub fn extract_charges(report: &SymmetryReport, h: &LatticeOperator, space: &CandidateSpace) -> Result<ChargeBasis> {
    let Some(zero) = report.zero_level() else {
        return Ok(ChargeBasis {
            charges: Vec::new(),
            gram: DMatrix::zeros(0, 0),
        });
    };
    let basis = realify(space, &zero.basis());
    let charges: Vec<Charge> = basis
        .into_par_iter()
        .map(|coeffs| {
            let real = coeffs.map(|z| cz(z.re));
            let operator = space.operator(&real);
            let compiled = operator.compile();
            let residual = h.commutator(&compiled)?.hs_norm() / compiled.hs_norm();
            Ok(Charge {
                uniform: space.is_uniform(&real, 1e-8),
                coefficients: real,
                operator,
                residual,
            })
        })
        .collect::<Result<_>>()?;
    let compiled: Vec<LatticeOperator> = charges.iter().map(|c| c.operator.compile()).collect();
    let k = compiled.len();
    let gram = DMatrix::from_fn(k, k, |a, b| compiled[a].hs_inner(&compiled[b]).expect("same lattice").re);
    Ok(ChargeBasis { charges, gram })
}

/// Outcome of the charge-from-pair construction.
#[derive(Debug, Clone)]
pub struct Theorem1Result {
    pub lambda: f64,
    /// `[A₊, A₋]` written as a sum of single-site operators.
    pub charge: ExtensiveOperator,
    /// Coefficient of the identity, `tr Q / dim`.
    pub identity_part: f64,
    /// `‖[H, Q]‖ / (‖Q‖ · max(1, scale))`.
    pub conservation_residual: f64,
    /// `‖Q − Q†‖ / ‖Q‖`.
    pub hermiticity_defect: f64,
    /// `‖Q − local(Q)‖ / ‖Q‖`.
    pub locality_residual: f64,
    pub q_norm: f64,
    pub best_match: Option<NamedMatch>,
}

/// The named form closest to a computed operator, `Q ≈ scale · form`.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatch {
    pub name: String,
    pub scale: f64,
    /// `|⟨F, Q⟩| / (‖F‖ ‖Q‖)`.
    pub cosine: f64,
}

pub const THEOREM1_CONSERVATION_TOL: f64 = 1e-8;
pub const THEOREM1_HERMITICITY_TOL: f64 = 1e-10;
pub const THEOREM1_LOCALITY_TOL: f64 = 1e-8;

/// `Q = [A₊, A₋]`: checks that it commutes with `H`, is Hermitian and is a
/// sum of single-site operators, then matches it against named charges.
pub fn theorem1_charge(
    plus: &DynamicalSymmetry,
    minus: &DynamicalSymmetry,
    h: &LatticeOperator,
    named: &[NamedForm],
) -> Result<Theorem1Result> {
    let scale = energy_scale(h).max(1.0);
    if (plus.lambda + minus.lambda).abs() > DEFAULT_TOL_GROUP * scale {
        return Err(Error::InvalidParameter(format!(
            "pair eigenvalues {} and {} are not opposite",
            plus.lambda, minus.lambda
        )));
    }
    let a_plus = plus.compile();
    let a_minus = minus.compile();
    let adjoint_gap = a_minus.sub(&a_plus.dagger())?.hs_norm() / a_plus.hs_norm().max(1e-300);
    if adjoint_gap > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "minus operator differs from the adjoint of the plus operator by {adjoint_gap:.3e}"
        )));
    }
    let q = a_plus.commutator(&a_minus)?;
    let q_norm = q.hs_norm();
    if q_norm == 0.0 {
        return Err(Error::TheoremViolation("commutator of the pair vanishes".into()));
    }
    let conservation_residual = h.commutator(&q)?.hs_norm() / (q_norm * scale);
    let hermiticity_defect = q.hermiticity_defect();

    let spec = *h.spec();
    let space = build_candidate_space(spec)?;
    let dim = spec.dim() as f64;
    let identity_part = q.trace().re / dim;
    let coeffs = space.project(&q)?;
    let local = space
        .compile(&coeffs)
        .axpby(ONE, &LatticeOperator::identity(spec), cz(identity_part))?;
    let locality_residual = q.sub(&local)?.hs_norm() / q_norm;

    let n = spec.n_sites() as f64;
    let id_share = SiteOperator::identity(spec.local_dim()).scale(cz(identity_part / n));
    let charge = space.operator(&coeffs);
    let charge = ExtensiveOperator::new(spec, charge.per_site().iter().map(|op| op.add(&id_share)).collect())?;

    let best_match = best_named_match(&q, named)?;
    let result = Theorem1Result {
        lambda: plus.lambda,
        charge,
        identity_part,
        conservation_residual,
        hermiticity_defect,
        locality_residual,
        q_norm,
        best_match,
    };
    if conservation_residual > THEOREM1_CONSERVATION_TOL
        || hermiticity_defect > THEOREM1_HERMITICITY_TOL
        || locality_residual > THEOREM1_LOCALITY_TOL
    {
        return Err(Error::TheoremViolation(format!(
            "charge from pair at lambda = {}: conservation {:.3e}, hermiticity {:.3e}, locality {:.3e}",
            plus.lambda, conservation_residual, hermiticity_defect, locality_residual
        )));
    }
    Ok(result)
}

/// Best cosine match of `q` against the compiled named forms.
pub fn best_named_match(q: &LatticeOperator, named: &[NamedForm]) -> Result<Option<NamedMatch>> {
    let q_norm = q.hs_norm();
    let mut best: Option<NamedMatch> = None;
    for form in named {
        let f = form.compile();
        let f_norm = f.hs_norm();
        if f_norm == 0.0 || q_norm == 0.0 {
            continue;
        }
        let inner = f.hs_inner(q)?;
        let cosine = inner.norm() / (f_norm * q_norm);
        if best.as_ref().is_none_or(|b| cosine > b.cosine + 1e-12) {
            best = Some(NamedMatch {
                name: form.name.clone(),
                scale: inner.re / (f_norm * f_norm),
                cosine,
            });
        }
    }
    Ok(best)
}

/// Relative tolerance for the commutation preconditions of the build.
pub const THEOREM2_COMMUTATION_TOL: f64 = 1e-10;

fn relative_commutator(a: &LatticeOperator, b: &LatticeOperator) -> Result<f64> {
    let denom = a.hs_norm() * b.hs_norm();
    let c = a.commutator(b)?.hs_norm();
    Ok(if denom > 0.0 { c / denom * (a.dim() as f64).sqrt() } else { c })
}

/// `H = H_g + Σ_α c_α Q_α` after checking `[H_g, Q_α] = 0` and `[Q_α, Q_β] = 0`.
pub fn theorem2_build(h_g: &LatticeOperator, charges: &[ExtensiveOperator], coeffs: &[f64]) -> Result<LatticeOperator> {
    if charges.len() != coeffs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} charges but {} coefficients",
            charges.len(),
            coeffs.len()
        )));
    }
    let compiled: Vec<LatticeOperator> = charges.iter().map(ExtensiveOperator::compile).collect();
    for (a, q) in compiled.iter().enumerate() {
        let r = relative_commutator(h_g, q)?;
        if r > THEOREM2_COMMUTATION_TOL {
            return Err(Error::TheoremViolation(format!(
                "charge {a} does not commute with the symmetric Hamiltonian (relative norm {r:.3e})"
            )));
        }
        for (b, p) in compiled.iter().enumerate().skip(a + 1) {
            let r = relative_commutator(q, p)?;
            if r > THEOREM2_COMMUTATION_TOL {
                return Err(Error::TheoremViolation(format!(
                    "charges {a} and {b} do not commute (relative norm {r:.3e})"
                )));
            }
        }
    }
    let terms = std::iter::once((ONE, h_g)).chain(coeffs.iter().zip(&compiled).map(|(&c, q)| (cz(c), q)));
    Ok(combine(*h_g.spec(), terms).with_hermitian_check())
}

/// Predicted against measured `λ` for one lifted root vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCheck {
    pub root: Vec<f64>,
    pub predicted: f64,
    pub measured: f64,
    pub residual: f64,
}

pub const THEOREM2_LAMBDA_TOL: f64 = 1e-9;

/// Lifts every root vector uniformly and compares `[H, X] = λX` with
/// `λ = Σ_α c_α β(h_α)`, where `c_α` multiplies the uniform lift of the
/// Cartan element `h_α`.
pub fn theorem2_verify(h: &LatticeOperator, cw: &CartanWeylBasis, coeffs: &[f64]) -> Result<Vec<RootCheck>> {
    if coeffs.len() != cw.cartan.rank() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a Cartan subalgebra of rank {}",
            coeffs.len(),
            cw.cartan.rank()
        )));
    }
    let spec = *h.spec();
    let scale = energy_scale(h).max(1.0);
    let mut out = Vec::new();
    for root in &cw.roots {
        for (values, lifted) in [
            (root.root_values.clone(), root.lift_plus(spec)?),
            (root.root_values.iter().map(|v| -v).collect::<Vec<_>>(), root.lift_minus(spec)?),
        ] {
            let x = lifted.compile();
            let image = h.commutator(&x)?;
            let measured = (x.hs_inner(&image)? / x.hs_inner(&x)?).re;
            let residual = residual_of(h, &x, measured)?;
            let predicted: f64 = coeffs.iter().zip(&values).map(|(c, b)| c * b).sum();
            let check = RootCheck {
                root: values,
                predicted,
                measured,
                residual,
            };
            if (measured - predicted).abs() > THEOREM2_LAMBDA_TOL * scale || residual > DEFAULT_TOL_RESIDUAL {
                return Err(Error::TheoremViolation(format!(
                    "root {:?}: predicted lambda {predicted}, measured {measured}, residual {residual:.3e}",
                    check.root
                )));
            }
            out.push(check);
        }
    }
    Ok(out)
}

/// `tr[O·A]` for one observable against one reported eigenoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableOverlap {
    pub observable: String,
    pub pair: usize,
    pub member: usize,
    pub lambda: f64,
    pub overlap: Complex64,
    /// Predicted to keep oscillating at frequency `λ`.
    pub nonstationary: bool,
}

/// Overlaps of each observable with the raising member of every pair.
pub fn overlap_observables(
    report: &SymmetryReport,
    observables: &[(String, LatticeOperator)],
    tol: f64,
) -> Result<Vec<ObservableOverlap>> {
    let mut out = Vec::new();
    for (name, obs) in observables {
        for (p, pair) in report.pairs.iter().enumerate() {
            for (k, member) in pair.plus.iter().enumerate() {
                let overlap = obs.trace_product(&member.compile())?;
                out.push(ObservableOverlap {
                    observable: name.clone(),
                    pair: p,
                    member: k,
                    lambda: pair.lambda,
                    overlap,
                    nonstationary: overlap.norm() > tol,
                });
            }
        }
    }
    Ok(out)
}
