//! Sparse matrix storage and the direct saddle-point factorization.
//!
//! Desk-scale systems are factored with a sparse LU (faer). Triplets are
//! combined in a canonical order before construction so that assembled
//! matrices, and therefore every downstream solve, are bitwise reproducible
//! run to run.

use faer::prelude::*;
use faer::sparse::SparseColMat;

use crate::error::{Error, Result};

/// Immutable sparse matrix in compressed column form.
pub struct SpMat {
    mat: SparseColMat<usize, f64>,
    nrows: usize,
    ncols: usize,
}

impl SpMat {
    /// Builds from (row, col, value) triplets; duplicates are summed in a
    /// fixed (column, row, insertion) order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<SpMat> {
        triplets.sort_by_key(|&(r, c, _)| (c, r));
        let mut combined: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match combined.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => combined.push((r, c, v)),
            }
        }
        let mat = SparseColMat::try_new_from_triplets(nrows, ncols, &combined)
            .map_err(|e| Error::LinearSolve(format!("matrix creation failed: {e:?}")))?;
        Ok(SpMat { mat, nrows, ncols })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let xm = faer::mat::from_column_major_slice::<f64>(x, self.ncols, 1);
        let y = &self.mat * xm;
        (0..self.nrows).map(|i| y.read(i, 0)).collect()
    }

    /// xᵀ A y.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.apply(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Sparse LU factorization with pivoting.
    pub fn factorize(&self) -> Result<Factorized> {
        let lu = self
            .mat
            .sp_lu()
            .map_err(|e| Error::LinearSolve(format!("sparse LU failed: {e:?}")))?;
        Ok(Factorized { lu, n: self.nrows })
    }
}

/// A reusable sparse LU factorization.
pub struct Factorized {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl Factorized {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = faer::mat::from_column_major_slice::<f64>(rhs, self.n, 1);
        let x = self.lu.solve(b);
        (0..self.n).map(|i| x.read(i, 0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_triplets_are_summed() {
        let m = SpMat::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (0, 1, 0.5)],
        )
        .unwrap();
        let y = m.apply(&[1.0, 1.0]);
        assert_eq!(y, vec![3.5, 1.0]);
    }

    #[test]
    fn factor_solves_indefinite_saddle() {
        // [[2, 0, 1], [0, 2, 1], [1, 1, 0]] x = [3, 3, 2] has solution (1, 1, 1)
        let m = SpMat::from_triplets(
            3,
            3,
            vec![
                (0, 0, 2.0),
                (1, 1, 2.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
            ],
        )
        .unwrap();
        let x = m.factorize().unwrap().solve(&[3.0, 3.0, 2.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }
}
