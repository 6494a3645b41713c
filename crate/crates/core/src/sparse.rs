//! Compressed sparse row matrices.

use std::ops::{Add, Mul};

use num_traits::Zero;
use serde::Serialize;

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsrMatrix<E> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<E>,
}

impl<E> CsrMatrix<E>
where
    E: Copy + Zero + Add<Output = E> + Mul<Output = E>,
{
    /// Builds from (row, col, value) triplets, summing duplicates. Explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, E)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<E> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
            if last == Some((i, j)) {
                let lv = values.last_mut().unwrap();
                *lv = *lv + v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize, one: E) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, one)).collect())
    }

    pub fn from_diagonal(d: &[E]) -> Self {
        Self::from_triplets(
            d.len(),
            d.len(),
            d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
        )
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

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[E] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, E)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> E {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => E::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, E)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets()
                .into_iter()
                .map(|(i, j, v)| (j, i, v))
                .collect(),
        )
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    trip.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets());
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn map<F, G>(&self, f: G) -> CsrMatrix<F>
    where
        G: Fn(E) -> F,
    {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn matvec(&self, x: &[E]) -> Vec<E> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).fold(E::zero(), |acc, (j, v)| acc + v * x[j]))
            .collect()
    }

    /// Computes `selfᵀ x` without forming the transpose.
    pub fn matvec_transpose(&self, x: &[E]) -> Vec<E> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![E::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] = y[j] + v * xi;
            }
        }
        y
    }

    pub fn is_zero(&self) -> bool
    where
        E: PartialEq,
    {
        self.values.iter().all(|v| *v == E::zero())
    }

    pub fn to_dense(&self) -> Vec<Vec<E>> {
        let mut d = vec![vec![E::zero(); self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Scales rows by `r` and columns by `c`.
    pub fn scale(&self, r: &[E], c: &[E]) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.values[p] = r[i] * self.values[p] * c[self.indices[p]];
            }
        }
        out
    }
}

impl<T: Real> CsrMatrix<T> {
    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for (i, j, v) in self.triplets() {
            m = m.max((v - self.get(j, i)).abs());
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Inner product `xᵀ A y`.
    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<T>())
            .sum()
    }

    pub fn norm_sq(&self, x: &[T]) -> T {
        self.inner(x, x)
    }
}

/// Cast of an integer matrix into a floating matrix.
pub fn to_real<T: Real>(m: &CsrMatrix<i32>) -> CsrMatrix<T> {
    m.map(|v| T::c(f64::from(v)))
}

/// Writes `i j value` lines, one per stored entry.
pub fn write_coordinate<E: std::fmt::Display + Copy + Zero + Add<Output = E> + Mul<Output = E>>(
    m: &CsrMatrix<E>,
    mut w: impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_transpose() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(0, 1, 2.0), (1, 0, 1.0), (0, 1, 3.0), (1, 2, -1.0)],
        );
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.nnz(), 3);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 5.0);
        assert_eq!(t.get(2, 1), -1.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![5.0, 0.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 2.0]), t.matvec(&[1.0, 2.0]));
    }

    #[test]
    fn integer_product_cancels_exactly() {
        let a = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1i32), (0, 1, -1)]);
        let b = CsrMatrix::from_triplets(2, 1, vec![(0, 0, 1i32), (1, 0, 1)]);
        assert!(a.matmul(&b).is_zero());
    }
}
