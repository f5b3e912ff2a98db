//! Single-site operator bases: Pauli and (generalized) Gell-Mann matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SiteOperator;
use crate::error::{Error, Result};

/// σ_x, σ_y, σ_z.
pub fn pauli_basis() -> Vec<SiteOperator> {
    gell_mann_basis(2).expect("d = 2 is valid")
}

/// The d²−1 generalized Gell-Mann matrices, normalized to `tr(τ_a τ_b) = 2δ_ab`.
///
/// Ordering follows the usual su(3) convention and reduces to the Pauli
/// matrices for `d = 2`: for each column `k = 1..d`, the symmetric and
/// antisymmetric off-diagonal pairs `(j, k)` for `j < k`, followed by the
/// diagonal generator that populates the first `k + 1` levels.
pub fn gell_mann_basis(d: usize) -> Result<Vec<SiteOperator>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "Gell-Mann basis needs d >= 2, got {d}"
        )));
    }
    let mut out = Vec::with_capacity(d * d - 1);
    for k in 1..d {
        for j in 0..k {
            let mut sym = DMatrix::zeros(d, d);
            sym[(j, k)] = Complex64::new(1.0, 0.0);
            sym[(k, j)] = Complex64::new(1.0, 0.0);
            out.push(sym);
            let mut anti = DMatrix::zeros(d, d);
            anti[(j, k)] = Complex64::new(0.0, -1.0);
            anti[(k, j)] = Complex64::new(0.0, 1.0);
            out.push(anti);
        }
        let norm = (2.0 / (k * (k + 1)) as f64).sqrt();
        let mut diag = DMatrix::zeros(d, d);
        for i in 0..k {
            diag[(i, i)] = Complex64::new(norm, 0.0);
        }
        diag[(k, k)] = Complex64::new(-(k as f64) * norm, 0.0);
        out.push(diag);
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(i, m)| SiteOperator::labeled(m, generator_label(d, i)))
        .collect())
}

/// Label of the `index`-th (0-based) Gell-Mann generator for local dimension `d`.
pub fn generator_label(d: usize, index: usize) -> String {
    match d {
        2 => ["sigma_x", "sigma_y", "sigma_z"][index].to_string(),
        3 => format!("tau_{}", index + 1),
        _ => format!("lambda_{}", index + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a * b - b * a
    }

    #[test]
    fn pauli_relations() {
        let p = pauli_basis();
        let (x, y, z) = (&p[0].matrix, &p[1].matrix, &p[2].matrix);
        assert!((x * x - DMatrix::identity(2, 2)).norm() < 1e-15);
        let two_i = Complex64::new(0.0, 2.0);
        assert!((commutator(x, y) - z * two_i).norm() < 1e-15);
        assert!((commutator(y, z) - x * two_i).norm() < 1e-15);
        assert!((commutator(z, x) - y * two_i).norm() < 1e-15);
        assert!(z.trace().norm() < 1e-15);
    }

    #[test]
    fn su3_diagonal_generators_match_displayed_forms() {
        let g = gell_mann_basis(3).unwrap();
        let tau3 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        let s = 1.0 / 3f64.sqrt();
        let tau8 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(-2.0 * s, 0.0),
        ]));
        assert!((&g[2].matrix - tau3).norm() < 1e-15);
        assert!((&g[7].matrix - tau8).norm() < 1e-15);
        assert_eq!(g[7].label.as_deref(), Some("tau_8"));
    }

    #[test]
    fn orthonormal_traceless_hermitian_for_several_d() {
        for d in 2..=5 {
            let g = gell_mann_basis(d).unwrap();
            assert_eq!(g.len(), d * d - 1);
            for (a, ga) in g.iter().enumerate() {
                assert!(ga.matrix.trace().norm() < 1e-14);
                assert!((&ga.matrix - ga.matrix.adjoint()).norm() < 1e-15);
                for (b, gb) in g.iter().enumerate() {
                    let t = (&ga.matrix * &gb.matrix).trace();
                    let expected = if a == b { 2.0 } else { 0.0 };
                    assert!((t - Complex64::new(expected, 0.0)).norm() < 1e-13, "d={d} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn d_below_two_is_rejected() {
        assert!(matches!(gell_mann_basis(1), Err(Error::InvalidDimension(_))));
    }
}
