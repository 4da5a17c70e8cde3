use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

/// Compressed-row sparse matrix with deterministic assembly.
///
/// Duplicate triplets are summed in their input order, so identical triplet
/// streams always produce bit-identical matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(column, value)` pairs in ascending column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect(),
        )
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.apply(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - t.get(r, c)).abs());
            }
        }
        worst
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Solve(format!("sparse matrix construction: {e:?}")))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Sparse LU factorization of a square operator.
pub struct SparseLu {
    n: usize,
    lu: Option<Lu<usize, f64>>,
}

impl SparseLu {
    pub fn new(op: &SparseOperator) -> Result<Self> {
        if op.nrows != op.ncols {
            return Err(Error::Solve("matrix is not square".into()));
        }
        if op.nrows == 0 {
            return Ok(Self { n: 0, lu: None });
        }
        let lu = op
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Solve(format!("sparse LU: {e:?}")))?;
        Ok(Self { n: op.nrows, lu: Some(lu) })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let Some(lu) = &self.lu else {
            return Vec::new();
        };
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        lu.solve_in_place(b.as_mut());
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }
}

/// Sparse Cholesky factorization; fails for matrices that are not positive definite.
pub struct SparseCholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn new(op: &SparseOperator) -> Result<Self> {
        if op.nrows != op.ncols {
            return Err(Error::Solve("matrix is not square".into()));
        }
        if op.nrows == 0 {
            return Ok(Self { n: 0, llt: None });
        }
        let llt = op
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solve(format!("sparse Cholesky: {e:?}")))?;
        Ok(Self { n: op.nrows, llt: Some(llt) })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let Some(llt) = &self.llt else {
            return Vec::new();
        };
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        llt.solve_in_place(b.as_mut());
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_summed_in_order() {
        let a = SparseOperator::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.apply(&[1.0, 1.0, 2.0]), vec![1.0, 3.0]);
        assert_eq!(a.apply_transpose(&[1.0, 2.0]), vec![2.0, -1.0, 3.0]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn lu_and_cholesky_solve() {
        let a = SparseOperator::from_triplets(
            3,
            3,
            vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, 0.5), (2, 1, 0.5)],
        );
        let x = [1.0, -2.0, 0.5];
        let b = a.apply(&x);
        for y in [SparseLu::new(&a).unwrap().solve(&b), SparseCholesky::new(&a).unwrap().solve(&b)] {
            for i in 0..3 {
                assert!((y[i] - x[i]).abs() < 1e-14);
            }
        }
        let indefinite = SparseOperator::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(SparseCholesky::new(&indefinite).is_err());
    }
}
