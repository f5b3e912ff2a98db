//! Finite-dimensional semisimple Lie algebras in a matrix representation:
//! structure constants, the Killing form, Cartan subalgebras, root vectors
//! and Cartan–Weyl bases.
//!
//! Algebras are given by Hermitian traceless generators `g_a` (for example
//! the Pauli or Gell-Mann matrices). Elements are handled through their
//! coordinates `x = Σ_a x_a g_a`; the adjoint action is computed from the
//! structure constants, never from the defining representation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{cluster, eigh, expi_hermitian, fix_phase, gram_schmidt};
use crate::opalg::{ExtensiveOperator, LatticeSpec, SiteOperator};

/// Relative residual accepted for closure and span membership.
pub const CLOSURE_TOL: f64 = 1e-10;
/// Absolute tolerance used to cluster ad-eigenvalues.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-8;
/// Relative tolerance for commutation of Cartan candidates.
pub const ABELIAN_TOL: f64 = 1e-12;

const GENERIC_SEED: u64 = 0x005e_ed1e;

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A basis of Hermitian traceless generators closed under commutation.
#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    generators: Vec<SiteOperator>,
    gram_inv: DMatrix<Complex64>,
    /// `G^{1/2}` and `G^{-1/2}` map generator coordinates to HS-orthonormal ones.
    sqrt_gram: DMatrix<Complex64>,
    inv_sqrt_gram: DMatrix<Complex64>,
    structure: StructureConstants,
    rank: usize,
}

/// `[g_a, g_b] = Σ_c 2i f_abc g_c`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    dim: usize,
    f: Vec<f64>,
    /// Largest relative residual of a commutator outside the generator span.
    pub closure_residual: f64,
}

impl StructureConstants {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `f_abc` with 0-based indices.
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[(a * self.dim + b) * self.dim + c]
    }
}

impl AlgebraBasis {
    pub fn new(generators: Vec<SiteOperator>) -> Result<Self> {
        let c = generators.len();
        if c == 0 {
            return Err(Error::InvalidParameter("an algebra needs at least one generator".into()));
        }
        let d = generators[0].dim();
        for (i, g) in generators.iter().enumerate() {
            if g.dim() != d {
                return Err(Error::DimensionMismatch(format!("generator {i} has dimension {}", g.dim())));
            }
            let norm = g.matrix.norm();
            if (&g.matrix - g.matrix.adjoint()).norm() > 1e-12 * norm {
                return Err(Error::NotHermitian((&g.matrix - g.matrix.adjoint()).norm() / norm));
            }
            if g.trace().norm() > 1e-12 * norm {
                return Err(Error::InvalidParameter(format!("generator {i} is not traceless")));
            }
        }
        let gram = DMatrix::from_fn(c, c, |a, b| generators[a].hs_inner(&generators[b]));
        let (vals, vecs) = eigh(&gram)?;
        let top = vals.last().copied().unwrap_or(0.0);
        if vals[0] <= 1e-10 * top {
            return Err(Error::InvalidParameter("generators are linearly dependent".into()));
        }
        let diag = |f: &dyn Fn(f64) -> f64| {
            let d = DVector::from_iterator(c, vals.iter().map(|&v| cz(f(v))));
            &vecs * DMatrix::from_diagonal(&d) * vecs.adjoint()
        };
        let gram_inv = diag(&|v| 1.0 / v);
        let sqrt_gram = diag(&|v| v.sqrt());
        let inv_sqrt_gram = diag(&|v| 1.0 / v.sqrt());

        let mut basis = Self {
            generators,
            gram_inv,
            sqrt_gram,
            inv_sqrt_gram,
            structure: StructureConstants {
                dim: c,
                f: vec![0.0; c * c * c],
                closure_residual: 0.0,
            },
            rank: 0,
        };
        basis.structure = structure_constants_of(&basis)?;
        basis.rank = basis.compute_rank()?;
        Ok(basis)
    }

    pub fn su2() -> Self {
        Self::new(crate::opalg::pauli_basis()).expect("Pauli matrices span su(2)")
    }

    pub fn su3() -> Self {
        Self::new(crate::opalg::gell_mann_basis(3).expect("d = 3")).expect("Gell-Mann matrices span su(3)")
    }

    pub fn generators(&self) -> &[SiteOperator] {
        &self.generators
    }

    /// Number of generators `c`.
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// Dimension of a Cartan subalgebra.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rep_dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.structure
    }

    /// Coordinates of `x` over the generators, and the relative residual of
    /// the projection.
    pub fn project(&self, x: &SiteOperator) -> (DVector<Complex64>, f64) {
        let rhs = DVector::from_iterator(self.dim(), self.generators.iter().map(|g| g.hs_inner(x)));
        let coords = &self.gram_inv * rhs;
        let residual = (&x.matrix - self.element_matrix(&coords)).norm();
        let norm = x.matrix.norm();
        let rel = if norm > 0.0 { residual / norm } else { residual };
        (coords, rel)
    }

    /// Coordinates of `x`, failing if it lies outside the span.
    pub fn coordinates(&self, x: &SiteOperator) -> Result<DVector<Complex64>> {
        let (coords, residual) = self.project(x);
        if residual > CLOSURE_TOL {
            return Err(Error::ProjectionFailure { residual });
        }
        Ok(coords)
    }

    fn element_matrix(&self, coords: &DVector<Complex64>) -> DMatrix<Complex64> {
        let d = self.rep_dim();
        self.generators
            .iter()
            .zip(coords.iter())
            .fold(DMatrix::zeros(d, d), |acc, (g, &w)| acc + &g.matrix * w)
    }

    /// The operator with the given generator coordinates.
    pub fn element(&self, coords: &DVector<Complex64>) -> SiteOperator {
        SiteOperator::new(self.element_matrix(coords))
    }

    /// Matrix of `ad x` in generator coordinates: `(ad x)_{cb} = Σ_a x_a 2i f_abc`.
    pub fn adjoint_matrix(&self, coords: &DVector<Complex64>) -> DMatrix<Complex64> {
        let c = self.dim();
        let two_i = Complex64::new(0.0, 2.0);
        DMatrix::from_fn(c, c, |row, col| {
            (0..c)
                .map(|a| coords[a] * two_i * self.structure.get(a, col, row))
                .sum()
        })
    }

    /// `ad x` in HS-orthonormal coordinates, Hermitian whenever `x` is.
    fn adjoint_orthonormal(&self, coords: &DVector<Complex64>) -> DMatrix<Complex64> {
        &self.sqrt_gram * self.adjoint_matrix(coords) * &self.inv_sqrt_gram
    }

    fn compute_rank(&self) -> Result<usize> {
        // The centralizer of a generic element is a Cartan subalgebra.
        let x = self.generic_element(GENERIC_SEED);
        let ad = self.adjoint_orthonormal(&x);
        let (vals, _) = eigh(&(ad.adjoint() * &ad))?;
        let top = vals.last().copied().unwrap_or(0.0).max(1.0);
        Ok(vals.iter().filter(|&&v| v <= 1e-16 * top).count())
    }

    fn generic_element(&self, seed: u64) -> DVector<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| cz(rng.gen_range(-1.0..1.0))))
    }
}

fn structure_constants_of(basis: &AlgebraBasis) -> Result<StructureConstants> {
    let c = basis.dim();
    let mut f = vec![0.0; c * c * c];
    let mut worst: f64 = 0.0;
    let two_i = Complex64::new(0.0, 2.0);
    for a in 0..c {
        for b in 0..c {
            let comm = basis.generators[a].commutator(&basis.generators[b]);
            if comm.matrix.norm() == 0.0 {
                continue;
            }
            let (coords, residual) = basis.project(&comm);
            worst = worst.max(residual);
            for k in 0..c {
                let v = coords[k] / two_i;
                worst = worst.max(v.im.abs());
                f[(a * c + b) * c + k] = v.re;
            }
        }
    }
    if worst > CLOSURE_TOL {
        return Err(Error::AlgebraNotClosed { residual: worst });
    }
    Ok(StructureConstants {
        dim: c,
        f,
        closure_residual: worst,
    })
}

/// Structure constants of the algebra spanned by `basis`.
pub fn structure_constants(basis: &AlgebraBasis) -> StructureConstants {
    basis.structure.clone()
}

/// `(x, y) = tr(ad x · ad y)` in the adjoint representation.
pub fn killing_form_complex(x: &SiteOperator, y: &SiteOperator, basis: &AlgebraBasis) -> Result<Complex64> {
    let ax = basis.adjoint_matrix(&basis.coordinates(x)?);
    let ay = basis.adjoint_matrix(&basis.coordinates(y)?);
    Ok((ax * ay).trace())
}

/// Killing form of two Hermitian elements, which is real.
pub fn killing_form(x: &SiteOperator, y: &SiteOperator, basis: &AlgebraBasis) -> Result<f64> {
    Ok(killing_form_complex(x, y, basis)?.re)
}

/// A validated Cartan subalgebra.
#[derive(Debug, Clone)]
pub struct CartanSubalgebra {
    elements: Vec<SiteOperator>,
    coords: Vec<DVector<Complex64>>,
}

impl CartanSubalgebra {
    pub fn elements(&self) -> &[SiteOperator] {
        &self.elements
    }

    pub fn rank(&self) -> usize {
        self.elements.len()
    }
}

/// Checks that `candidate` is abelian, linearly independent and maximal.
pub fn verify_cartan(candidate: &[SiteOperator], basis: &AlgebraBasis) -> Result<CartanSubalgebra> {
    if candidate.is_empty() {
        return Err(Error::InvalidParameter("empty Cartan candidate".into()));
    }
    let coords = candidate
        .iter()
        .map(|h| basis.coordinates(h))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..candidate.len() {
        let hi = &candidate[i];
        if (&hi.matrix - hi.matrix.adjoint()).norm() > 1e-12 * hi.matrix.norm() {
            return Err(Error::NotHermitian((&hi.matrix - hi.matrix.adjoint()).norm()));
        }
        for j in (i + 1)..candidate.len() {
            let hj = &candidate[j];
            let norm = hi.commutator(hj).matrix.norm();
            if norm > ABELIAN_TOL * hi.matrix.norm() * hj.matrix.norm() {
                return Err(Error::NotAbelian(i, j, norm));
            }
        }
    }
    let ortho: Vec<DVector<Complex64>> = coords.iter().map(|x| &basis.sqrt_gram * x).collect();
    let span = gram_schmidt(&[], ortho.iter().cloned(), 1e-10);
    if span.len() != candidate.len() {
        return Err(Error::InvalidParameter("Cartan candidates are linearly dependent".into()));
    }

    // Centralizer: common kernel of ad(h_i), found from Σ ad(h_i)† ad(h_i).
    let c = basis.dim();
    let mut stacked = DMatrix::zeros(c, c);
    for x in &coords {
        let ad = basis.adjoint_orthonormal(x);
        stacked += ad.adjoint() * &ad;
    }
    let (vals, vecs) = eigh(&stacked)?;
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    let kernel: Vec<DVector<Complex64>> = (0..c)
        .filter(|&k| vals[k] <= 1e-16 * top)
        .map(|k| vecs.column(k).into_owned())
        .collect();
    if kernel.len() > candidate.len() {
        let extra = gram_schmidt(&span, kernel, 1e-8);
        let v = extra.first().cloned().unwrap_or_else(|| DVector::zeros(c));
        let gen_coords = &basis.inv_sqrt_gram * v;
        let extending = (0..c)
            .max_by(|&a, &b| gen_coords[a].norm().total_cmp(&gen_coords[b].norm()).then(b.cmp(&a)))
            .unwrap_or(0);
        return Err(Error::NotMaximal { extending });
    }
    Ok(CartanSubalgebra {
        elements: candidate.to_vec(),
        coords,
    })
}

/// A pair of root vectors `X_{±β}` with `X_{-β} = X_{+β}†`.
#[derive(Debug, Clone)]
pub struct RootDatum {
    pub plus_vector: SiteOperator,
    pub minus_vector: SiteOperator,
    /// `β(h_i)`: eigenvalue of `ad h_i` on the plus vector, one per Cartan element.
    pub root_values: Vec<f64>,
    /// Generator coordinates of the plus vector.
    pub plus_coords: DVector<Complex64>,
}

impl RootDatum {
    /// The same pair viewed from the negative root.
    pub fn negated(&self) -> Self {
        Self {
            plus_vector: self.minus_vector.clone(),
            minus_vector: self.plus_vector.clone(),
            root_values: self.root_values.iter().map(|v| -v).collect(),
            plus_coords: self.plus_coords.map(|z| z.conj()),
        }
    }

    /// `Σ_j X_{+β}^{(j)}` on a lattice.
    pub fn lift_plus(&self, spec: LatticeSpec) -> Result<ExtensiveOperator> {
        ExtensiveOperator::uniform(spec, &self.plus_vector)
    }

    pub fn lift_minus(&self, spec: LatticeSpec) -> Result<ExtensiveOperator> {
        ExtensiveOperator::uniform(spec, &self.minus_vector)
    }
}

/// Positive roots are those whose last nonzero component is positive.
fn is_positive(root: &[f64]) -> bool {
    root.iter()
        .rev()
        .find(|v| v.abs() > EIGEN_CLUSTER_TOL)
        .map(|&v| v > 0.0)
        .unwrap_or(false)
}

/// Simultaneous eigenvectors of every `ad h_i` outside the Cartan span,
/// returned as `(c − r)/2` dagger-paired root data.
///
/// `ad h_1` is diagonalized first; each degenerate eigenspace is then
/// refined with `ad h_2`, and so on.
pub fn root_decomposition(cartan: &CartanSubalgebra, basis: &AlgebraBasis) -> Result<Vec<RootDatum>> {
    let c = basis.dim();
    let ads: Vec<DMatrix<Complex64>> = cartan
        .coords
        .iter()
        .map(|x| basis.adjoint_orthonormal(x))
        .collect();

    // Each block: orthonormal columns plus the root tuple so far.
    let mut blocks: Vec<(DMatrix<Complex64>, Vec<f64>)> = vec![(DMatrix::identity(c, c), Vec::new())];
    for ad in &ads {
        let mut refined = Vec::new();
        for (v, tuple) in blocks {
            let restricted = v.adjoint() * ad * &v;
            let (vals, w) = eigh(&restricted)?;
            for range in cluster(&vals, EIGEN_CLUSTER_TOL) {
                let mean = vals[range.clone()].iter().sum::<f64>() / range.len() as f64;
                let sub = &v * w.columns(range.start, range.len());
                let mut t = tuple.clone();
                t.push(mean);
                refined.push((sub, t));
            }
        }
        blocks = refined;
    }

    let scale = ads.iter().map(|a| a.norm()).fold(1.0, f64::max);
    for (v, tuple) in &blocks {
        for (ad, &beta) in ads.iter().zip(tuple) {
            let residual = (ad * v - v * cz(beta)).norm();
            if residual > CLOSURE_TOL * scale {
                return Err(Error::DegeneracyResolution(format!(
                    "root {tuple:?} is not a joint eigenspace (residual {residual:.3e})"
                )));
            }
        }
    }

    let zero_dim: usize = blocks
        .iter()
        .filter(|(_, t)| t.iter().all(|b| b.abs() <= EIGEN_CLUSTER_TOL))
        .map(|(v, _)| v.ncols())
        .sum();
    if zero_dim != cartan.rank() {
        return Err(Error::DegeneracyResolution(format!(
            "zero-root space has dimension {zero_dim}, expected rank {}",
            cartan.rank()
        )));
    }

    let target_norm_sqr = 2.0 * basis.generators.iter().map(|g| g.hs_inner(g).re).sum::<f64>()
        / basis.dim() as f64;
    let mut roots = Vec::new();
    for (v, tuple) in &blocks {
        if !is_positive(tuple) {
            continue;
        }
        if v.ncols() != 1 {
            return Err(Error::DegeneracyResolution(format!(
                "root {tuple:?} has a {}-dimensional root space",
                v.ncols()
            )));
        }
        let partner = blocks.iter().find(|(_, t)| {
            t.iter().zip(tuple).all(|(a, b)| (a + b).abs() <= EIGEN_CLUSTER_TOL)
        });
        if partner.is_none() {
            return Err(Error::DegeneracyResolution(format!("root {tuple:?} has no negative partner")));
        }
        let mut coords = &basis.inv_sqrt_gram * v.column(0);
        fix_phase(&mut coords);
        let op = basis.element(&coords);
        let norm_sqr = op.hs_inner(&op).re;
        let s = (target_norm_sqr / norm_sqr).sqrt();
        coords *= cz(s);
        let plus = basis.element(&coords);
        let minus = plus.adjoint();
        for (h, &beta) in cartan.elements.iter().zip(tuple) {
            let r = (h.commutator(&minus).matrix + &minus.matrix * cz(beta)).norm();
            if r > CLOSURE_TOL * minus.matrix.norm() * h.matrix.norm().max(1.0) {
                return Err(Error::DegeneracyResolution(format!(
                    "dagger of the root vector for {tuple:?} is not a root vector (residual {r:.3e})"
                )));
            }
        }
        roots.push((anchor_index(&coords), RootDatum {
            plus_vector: plus,
            minus_vector: minus,
            root_values: tuple.clone(),
            plus_coords: coords,
        }));
    }
    roots.sort_by_key(|(anchor, _)| *anchor);
    let roots: Vec<RootDatum> = roots.into_iter().map(|(_, r)| r).collect();
    if 2 * roots.len() + cartan.rank() != c {
        return Err(Error::DegeneracyResolution(format!(
            "found {} root pairs for c = {c}, r = {}",
            roots.len(),
            cartan.rank()
        )));
    }
    Ok(roots)
}

fn anchor_index(coords: &DVector<Complex64>) -> usize {
    let max = coords.iter().map(|z| z.norm()).fold(0.0, f64::max);
    coords.iter().position(|z| z.norm() >= max * (1.0 - 1e-8)).unwrap_or(0)
}

/// A Cartan subalgebra together with all its paired root vectors.
#[derive(Debug, Clone)]
pub struct CartanWeylBasis {
    pub cartan: CartanSubalgebra,
    pub roots: Vec<RootDatum>,
}

impl CartanWeylBasis {
    /// Total number of elements, `r + 2·(number of pairs)`.
    pub fn len(&self) -> usize {
        self.cartan.rank() + 2 * self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All elements: Cartan generators, then `X_{+β}, X_{-β}` pairs.
    pub fn elements(&self) -> Vec<SiteOperator> {
        let mut out: Vec<SiteOperator> = self.cartan.elements.clone();
        for r in &self.roots {
            out.push(r.plus_vector.clone());
            out.push(r.minus_vector.clone());
        }
        out
    }
}

pub fn cartan_weyl(cartan: &CartanSubalgebra, basis: &AlgebraBasis) -> Result<CartanWeylBasis> {
    let roots = root_decomposition(cartan, basis)?;
    let cw = CartanWeylBasis {
        cartan: cartan.clone(),
        roots,
    };
    let ortho = cw
        .elements()
        .iter()
        .map(|e| basis.coordinates(e).map(|x| &basis.sqrt_gram * x))
        .collect::<Result<Vec<_>>>()?;
    let span = gram_schmidt(&[], ortho, 1e-10);
    if span.len() != basis.dim() {
        return Err(Error::DegeneracyResolution(format!(
            "Cartan–Weyl elements span {} of {} dimensions",
            span.len(),
            basis.dim()
        )));
    }
    Ok(cw)
}

/// A partition of an algebra basis into mutually commuting sets.
#[derive(Debug, Clone)]
pub struct CommutingPartition {
    /// The basis the indices refer to.
    pub basis: AlgebraBasis,
    pub sets: Vec<Vec<usize>>,
    /// True when the input generators could not be partitioned directly and
    /// a new basis of conjugated Cartan subalgebras was built instead.
    pub rebuilt: bool,
}

fn greedy_partition(basis: &AlgebraBasis) -> Vec<Vec<usize>> {
    let g = &basis.generators;
    let commute = |a: usize, b: usize| {
        g[a].commutator(&g[b]).matrix.norm() <= ABELIAN_TOL * g[a].matrix.norm() * g[b].matrix.norm()
    };
    let mut assigned = vec![false; g.len()];
    let mut sets = Vec::new();
    for i in 0..g.len() {
        if assigned[i] {
            continue;
        }
        assigned[i] = true;
        let mut set = vec![i];
        for j in (i + 1)..g.len() {
            if !assigned[j] && set.iter().all(|&k| commute(k, j)) {
                assigned[j] = true;
                set.push(j);
            }
        }
        sets.push(set);
    }
    sets
}

/// Splits the algebra into `c/r` sets of `r` mutually commuting generators.
///
/// A greedy pass over the given generators is tried first. When that does
/// not produce `c/r` sets (the Gell-Mann matrices, for instance, cannot be
/// grouped this way), the algebra is rebuilt from `c/r` conjugates
/// `U_k 𝔥 U_k†` of one Cartan subalgebra, with deterministic unitaries
/// `U_k = exp(i Y_k)` generated inside the algebra, and the partition refers
/// to that new basis.
pub fn commuting_partition(basis: &AlgebraBasis) -> Result<CommutingPartition> {
    let c = basis.dim();
    let r = basis.rank();
    let greedy = greedy_partition(basis);
    if c.is_multiple_of(r) && greedy.len() == c / r {
        return Ok(CommutingPartition {
            basis: basis.clone(),
            sets: greedy,
            rebuilt: false,
        });
    }
    if !c.is_multiple_of(r) {
        return Err(Error::PartitionNotFound(format!("c = {c} is not divisible by r = {r}")));
    }

    // Cartan subalgebra: centralizer of a generic Hermitian element.
    let x = basis.generic_element(GENERIC_SEED);
    let ad = basis.adjoint_orthonormal(&x);
    let (vals, vecs) = eigh(&(ad.adjoint() * &ad))?;
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    let mut cartan: Vec<DMatrix<Complex64>> = Vec::new();
    for k in (0..c).filter(|&k| vals[k] <= 1e-16 * top) {
        let coords = &basis.inv_sqrt_gram * vecs.column(k);
        let m = basis.element_matrix(&coords);
        // Hermitian part; the centralizer of a Hermitian element is closed under †.
        for cand in [(&m + m.adjoint()) * cz(0.5), (&m - m.adjoint()) * Complex64::new(0.0, -0.5)] {
            cartan.push(cand);
        }
    }
    let cartan = hermitian_orthonormal(&cartan, r)?;

    let mut sets: Vec<Vec<DMatrix<Complex64>>> = vec![cartan.clone()];
    let mut span: Vec<DVector<Complex64>> = gram_schmidt(&[], cartan.iter().map(flatten), 1e-10);
    let mut seed = GENERIC_SEED + 1;
    while sets.len() < c / r {
        if seed > GENERIC_SEED + 1000 {
            return Err(Error::PartitionNotFound(
                "no spanning set of conjugated Cartan subalgebras found".into(),
            ));
        }
        let y = basis.element_matrix(&basis.generic_element(seed));
        seed += 1;
        let u = expi_hermitian(&(y * cz(1.3)))?;
        let conj: Vec<DMatrix<Complex64>> = cartan.iter().map(|h| &u * h * u.adjoint()).collect();
        let added = gram_schmidt(&span, conj.iter().map(flatten), 1e-6);
        if added.len() == r {
            span.extend(added);
            sets.push(conj);
        }
    }

    let mut generators = Vec::with_capacity(c);
    let mut index_sets = Vec::with_capacity(c / r);
    for set in sets {
        let ortho = hermitian_orthonormal(&set, r)?;
        let start = generators.len();
        generators.extend(ortho.into_iter().map(SiteOperator::new));
        index_sets.push((start..start + r).collect());
    }
    Ok(CommutingPartition {
        basis: AlgebraBasis::new(generators)?,
        sets: index_sets,
        rebuilt: true,
    })
}

fn flatten(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

/// Orthonormalizes Hermitian matrices (real inner products keep Hermiticity)
/// and rescales them to `tr(g²) = 2`.
fn hermitian_orthonormal(mats: &[DMatrix<Complex64>], expected: usize) -> Result<Vec<DMatrix<Complex64>>> {
    let (rows, cols) = (mats[0].nrows(), mats[0].ncols());
    let vecs = gram_schmidt(&[], mats.iter().map(flatten), 1e-8);
    if vecs.len() != expected {
        return Err(Error::PartitionNotFound(format!(
            "expected {expected} independent commuting elements, found {}",
            vecs.len()
        )));
    }
    Ok(vecs
        .into_iter()
        .map(|mut v| {
            fix_phase(&mut v);
            let m = DMatrix::from_iterator(rows, cols, v.iter().copied());
            let herm = (&m + m.adjoint()) * cz(0.5);
            let norm = herm.norm();
            herm * cz(2f64.sqrt() / norm)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opalg::{gell_mann_basis, pauli_basis};

    fn diag3(a: f64, b: f64, c: f64) -> SiteOperator {
        SiteOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![cz(a), cz(b), cz(c)])))
    }

    #[test]
    fn su2_structure_constants() {
        let f = structure_constants(&AlgebraBasis::su2());
        assert!((f.get(0, 1, 2) - 1.0).abs() < 1e-14);
        assert!((f.get(1, 0, 2) + 1.0).abs() < 1e-14);
        assert!((f.get(1, 2, 0) - 1.0).abs() < 1e-14);
        assert!(f.get(0, 0, 2).abs() < 1e-14);
    }

    #[test]
    fn su3_structure_constants() {
        let f = structure_constants(&AlgebraBasis::su3());
        assert!((f.get(0, 1, 2) - 1.0).abs() < 1e-14);
        assert!((f.get(3, 4, 7) - 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((f.get(0, 3, 6) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn commuting_pair_has_vanishing_structure_constants() {
        let g = gell_mann_basis(3).unwrap();
        let b = AlgebraBasis::new(vec![g[2].clone(), g[7].clone()]).unwrap();
        let f = structure_constants(&b);
        assert!(f.f.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(b.rank(), 2);
    }

    #[test]
    fn non_closed_set_is_rejected() {
        let p = pauli_basis();
        let err = AlgebraBasis::new(vec![p[0].clone(), p[1].clone()]).unwrap_err();
        assert!(matches!(err, Error::AlgebraNotClosed { .. }));
    }

    #[test]
    fn killing_form_table_for_su3() {
        let b = AlgebraBasis::su3();
        let s = 1.0 / 2f64.sqrt();
        let q1 = diag3(s, -s, 0.0);
        let q2 = diag3(s, 0.0, -s);
        let q3 = diag3(0.0, s, -s);
        assert!((killing_form(&q1, &q2, &b).unwrap() - 3.0).abs() < 1e-10);
        assert!((killing_form(&q1, &q3, &b).unwrap() + 3.0).abs() < 1e-10);
        assert!((killing_form(&q2, &q3, &b).unwrap() - 3.0).abs() < 1e-10);
        // Cross-check against the defining-representation shortcut κ = 2n·tr(xy).
        let short = 6.0 * (q1.matrix.clone() * q2.matrix.clone()).trace().re;
        assert!((short - 3.0).abs() < 1e-12);
    }

    #[test]
    fn killing_form_rejects_elements_outside_span() {
        let b = AlgebraBasis::su3();
        let id = SiteOperator::identity(3);
        assert!(matches!(killing_form(&id, &id, &b), Err(Error::ProjectionFailure { .. })));
    }

    #[test]
    fn cartan_validation() {
        let su2 = AlgebraBasis::su2();
        let p = pauli_basis();
        assert_eq!(verify_cartan(&[p[2].clone()], &su2).unwrap().rank(), 1);
        assert!(matches!(
            verify_cartan(&[p[0].clone(), p[2].clone()], &su2),
            Err(Error::NotAbelian(0, 1, _))
        ));
        let su3 = AlgebraBasis::su3();
        let g = gell_mann_basis(3).unwrap();
        assert_eq!(verify_cartan(&[g[2].clone(), g[7].clone()], &su3).unwrap().rank(), 2);
        assert!(matches!(
            verify_cartan(&[g[2].clone()], &su3),
            Err(Error::NotMaximal { .. })
        ));
    }

    #[test]
    fn su2_root_vectors() {
        let su2 = AlgebraBasis::su2();
        let p = pauli_basis();
        let cartan = verify_cartan(&[p[2].clone()], &su2).unwrap();
        let roots = root_decomposition(&cartan, &su2).unwrap();
        assert_eq!(roots.len(), 1);
        let expected = p[0].add(&p[1].scale(Complex64::new(0.0, 1.0)));
        assert!((&roots[0].plus_vector.matrix - &expected.matrix).norm() < 1e-12);
        assert!((roots[0].root_values[0] - 2.0).abs() < 1e-12);
        let neg = roots[0].negated();
        assert!((neg.root_values[0] + 2.0).abs() < 1e-12);
        assert_eq!(neg.plus_vector, roots[0].minus_vector);
    }

    #[test]
    fn su3_root_table() {
        let su3 = AlgebraBasis::su3();
        let g = gell_mann_basis(3).unwrap();
        let cartan = verify_cartan(&[g[2].clone(), g[7].clone()], &su3).unwrap();
        let cw = cartan_weyl(&cartan, &su3).unwrap();
        assert_eq!(cw.len(), 8);
        let i = Complex64::new(0.0, 1.0);
        let r3 = 3f64.sqrt();
        let expected = [
            (g[0].add(&g[1].scale(i)), [2.0, 0.0]),
            (g[3].add(&g[4].scale(i)), [1.0, r3]),
            (g[5].add(&g[6].scale(i)), [-1.0, r3]),
        ];
        for (root, (vector, values)) in cw.roots.iter().zip(expected.iter()) {
            assert!((&root.plus_vector.matrix - &vector.matrix).norm() < 1e-12);
            for (a, b) in root.root_values.iter().zip(values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partition_sizes() {
        let su2 = commuting_partition(&AlgebraBasis::su2()).unwrap();
        assert_eq!(su2.sets, vec![vec![0], vec![1], vec![2]]);
        assert!(!su2.rebuilt);

        let su3 = commuting_partition(&AlgebraBasis::su3()).unwrap();
        assert_eq!(su3.sets.len(), 4);
        assert!(su3.rebuilt);
        let gens = su3.basis.generators();
        for set in &su3.sets {
            assert_eq!(set.len(), 2);
            let comm = gens[set[0]].commutator(&gens[set[1]]);
            assert!(comm.matrix.norm() < 1e-10);
        }
        // The rebuilt generators still span su(3).
        let original = AlgebraBasis::su3();
        for g in gens {
            assert!(original.coordinates(g).is_ok());
        }

        let g = gell_mann_basis(3).unwrap();
        let abelian = AlgebraBasis::new(vec![g[2].clone(), g[7].clone()]).unwrap();
        assert_eq!(commuting_partition(&abelian).unwrap().sets, vec![vec![0, 1]]);
    }
}
