//! Compressed-sparse-row storage for complex square matrices.
//!
//! Entries with magnitude below [`STRUCTURAL_ZERO`] are dropped whenever a
//! matrix is assembled, so the stored pattern stays tight after cancellations
//! in commutators.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Magnitudes below this are not stored.
pub const STRUCTURAL_ZERO: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut b = RowBuilder::new(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            b.push(i, v);
            b.finish_row();
        }
        b.build()
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            rows[r].push((c, v));
        }
        let mut acc = Accumulator::new(dim);
        let mut b = RowBuilder::new(dim);
        for row in rows {
            for (c, v) in row {
                acc.add(c, v);
            }
            acc.drain_into(&mut b);
            b.finish_row();
        }
        b.build()
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sparse storage is square");
        let dim = m.nrows();
        let mut b = RowBuilder::new(dim);
        for i in 0..dim {
            for j in 0..dim {
                b.push(j, m[(i, j)]);
            }
            b.finish_row();
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut b = RowBuilder::new(self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                b.push(j, v * s);
            }
            b.finish_row();
        }
        b.build()
    }

    /// `a·self + b·other`, row by row.
    pub fn axpby(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = RowBuilder::new(self.dim);
        for i in 0..self.dim {
            let mut p = self.row(i).peekable();
            let mut q = other.row(i).peekable();
            loop {
                match (p.peek().copied(), q.peek().copied()) {
                    (Some((cp, vp)), Some((cq, vq))) => {
                        if cp == cq {
                            out.push(cp, a * vp + b * vq);
                            p.next();
                            q.next();
                        } else if cp < cq {
                            out.push(cp, a * vp);
                            p.next();
                        } else {
                            out.push(cq, b * vq);
                            q.next();
                        }
                    }
                    (Some((cp, vp)), None) => {
                        out.push(cp, a * vp);
                        p.next();
                    }
                    (None, Some((cq, vq))) => {
                        out.push(cq, b * vq);
                        q.next();
                    }
                    (None, None) => break,
                }
            }
            out.finish_row();
        }
        out.build()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut acc = Accumulator::new(self.dim);
        let mut b = RowBuilder::new(self.dim);
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, v) in other.row(k) {
                    acc.add(j, a * v);
                }
            }
            acc.drain_into(&mut b);
            b.finish_row();
        }
        b.build()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut counts = vec![0usize; self.dim + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.dim {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let slot = next[j];
                col_idx[slot] = i;
                values[slot] = v.conj();
                next[j] += 1;
            }
        }
        Self {
            dim: self.dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `tr[self† · other]`, computed entrywise without forming the product.
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim, other.dim);
        let mut sum = ZERO;
        for i in 0..self.dim {
            let mut q = other.row(i).peekable();
            for (c, v) in self.row(i) {
                while let Some(&(cq, _)) = q.peek() {
                    if cq < c {
                        q.next();
                    } else {
                        break;
                    }
                }
                if let Some(&(cq, w)) = q.peek() {
                    if cq == c {
                        sum += v.conj() * w;
                    }
                }
            }
        }
        sum
    }

    pub fn hs_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v.norm_sqr()).sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let dim = self.dim * other.dim;
        let mut b = RowBuilder::new(dim);
        for i in 0..self.dim {
            for k in 0..other.dim {
                for (j, a) in self.row(i) {
                    for (l, v) in other.row(k) {
                        b.push(j * other.dim + l, a * v);
                    }
                }
                b.finish_row();
            }
        }
        b.build()
    }
}

/// Dense scatter buffer reused across rows; emits columns in ascending order.
struct Accumulator {
    values: Vec<Complex64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            values: vec![ZERO; dim],
            touched: Vec::new(),
            marked: vec![false; dim],
        }
    }

    fn add(&mut self, col: usize, v: Complex64) {
        if !self.marked[col] {
            self.marked[col] = true;
            self.touched.push(col);
        }
        self.values[col] += v;
    }

    fn drain_into(&mut self, b: &mut RowBuilder) {
        self.touched.sort_unstable();
        for &c in &self.touched {
            b.push(c, self.values[c]);
            self.values[c] = ZERO;
            self.marked[c] = false;
        }
        self.touched.clear();
    }
}

/// Appends rows in order; columns within a row must be pushed ascending.
struct RowBuilder {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl RowBuilder {
    fn new(dim: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        Self {
            dim,
            row_ptr,
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, col: usize, v: Complex64) {
        if v.norm() >= STRUCTURAL_ZERO {
            self.col_idx.push(col);
            self.values.push(v);
        }
    }

    fn finish_row(&mut self) {
        self.row_ptr.push(self.values.len());
    }

    fn build(self) -> CsrMatrix {
        debug_assert_eq!(self.row_ptr.len(), self.dim + 1);
        CsrMatrix {
            dim: self.dim,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            values: self.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_cancellations() {
        let m = CsrMatrix::from_triplets(
            2,
            &[(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 0, c(0.0, 2.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), c(0.0, 2.0));
    }

    #[test]
    fn matmul_and_adjoint_match_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            &[(0, 1, c(1.0, 2.0)), (2, 0, c(-0.5, 0.0)), (1, 1, c(0.0, 1.0))],
        );
        let b = CsrMatrix::from_triplets(3, &[(1, 2, c(3.0, 0.0)), (0, 0, c(1.0, -1.0))]);
        let prod = a.matmul(&b).to_dense();
        assert!((prod - a.to_dense() * b.to_dense()).norm() < 1e-14);
        assert!((a.adjoint().to_dense() - a.to_dense().adjoint()).norm() < 1e-14);
    }

    #[test]
    fn hs_inner_is_trace_of_adjoint_product() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, c(1.0, 1.0)), (1, 1, c(2.0, 0.0))]);
        let b = CsrMatrix::from_triplets(2, &[(0, 1, c(0.0, 1.0)), (1, 0, c(5.0, 0.0))]);
        let expected = (a.to_dense().adjoint() * b.to_dense()).trace();
        assert!((a.hs_inner(&b) - expected).norm() < 1e-14);
    }

    #[test]
    fn kron_matches_dense_kronecker() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, c(1.0, 0.0)), (1, 0, c(0.0, 1.0))]);
        let b = CsrMatrix::from_triplets(2, &[(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))]);
        let k = a.kron(&b).to_dense();
        assert!((k - a.to_dense().kronecker(&b.to_dense())).norm() < 1e-14);
    }
}
