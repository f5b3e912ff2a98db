//! Small dense helpers shared by the algebra, finder and dynamics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
///
/// The input is symmetrized before the solve; the caller is responsible for
/// checking that it was Hermitian to begin with.
pub(crate) fn eigh(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenSolver(format!("Hermitian solve of size {n} did not converge")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Groups sorted values into runs whose consecutive gaps are at most `tol`.
pub(crate) fn cluster(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
///
/// Entries within a relative `1e-8` of the maximum count as ties and the
/// first of them is used. Returns the anchor index.
pub(crate) fn fix_phase(v: &mut DVector<Complex64>) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let anchor = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-8))
        .unwrap_or(0);
    let phase = v[anchor].conj() / v[anchor].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[anchor] = Complex64::new(v[anchor].re, 0.0);
    anchor
}

/// Modified Gram–Schmidt over `candidates`, skipping vectors whose residual
/// norm after projection falls below `tol`. `existing` columns are assumed
/// orthonormal and are projected out first but not returned.
pub(crate) fn gram_schmidt(
    existing: &[DVector<Complex64>],
    candidates: impl IntoIterator<Item = DVector<Complex64>>,
    tol: f64,
) -> Vec<DVector<Complex64>> {
    let mut basis: Vec<DVector<Complex64>> = existing.to_vec();
    let n_existing = basis.len();
    for mut v in candidates {
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / Complex64::new(norm, 0.0));
        }
    }
    basis.split_off(n_existing)
}

/// Hermitian-matrix exponential `exp(i·h)`.
pub(crate) fn expi_hermitian(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (vals, vecs) = eigh(h)?;
    let phases = DVector::from_iterator(vals.len(), vals.iter().map(|&l| Complex64::from_polar(1.0, l)));
    Ok(&vecs * DMatrix::from_diagonal(&phases) * vecs.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_handles_complex_hermitian_input() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        // σ_y has eigenvalues ±1.
        let m = DMatrix::from_row_slice(2, 2, &[one * 0.0, -i, i, one * 0.0]);
        let (vals, vecs) = eigh(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        for k in 0..2 {
            let v = vecs.column(k);
            let r = &m * v - v * Complex64::new(vals[k], 0.0);
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn clustering_splits_on_gaps() {
        let groups = cluster(&[-1.0, -1.0 + 1e-12, 0.0, 2.0, 2.0], 1e-8);
        assert_eq!(groups, vec![0..2, 2..3, 3..5]);
    }

    #[test]
    fn phase_fix_uses_first_of_tied_maxima() {
        let i = Complex64::new(0.0, 1.0);
        let mut v = DVector::from_vec(vec![i, -Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)]);
        let anchor = fix_phase(&mut v);
        assert_eq!(anchor, 0);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - i).norm() < 1e-15);
    }
}
