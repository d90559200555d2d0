//! Minimal dense linear algebra: a row-major matrix and a pivoted solver.

use serde::{Deserialize, Serialize};

use crate::num::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Matrix<T> {
    data: Vec<T>,
    cols: usize,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![T::zero(); rows * cols],
            cols,
        }
    }

    /// Builds a matrix from row-major data. `data.len()` must be a multiple of `cols`.
    pub fn from_row_major(data: Vec<T>, cols: usize) -> Self {
        assert!(cols > 0 || data.is_empty(), "zero-width matrix with data");
        assert!(cols == 0 || data.len() % cols == 0, "ragged row-major data");
        Self { data, cols }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self { data, cols }
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows())
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { data, cols: self.cols }
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `rel_tol` times the
/// largest absolute entry of `a`.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T], rel_tol: T) -> Option<Vec<T>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "solve needs a square matrix");
    assert_eq!(b.len(), n);
    let scale = a.as_slice().iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m.get(r, col).abs()))
            .fold((col, T::lit(-1.0)), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= rel_tol * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m.get(col, j);
                m.set(col, j, m.get(pivot_row, j));
                m.set(pivot_row, j, tmp);
            }
            rhs.swap(col, pivot_row);
        }
        let p = m.get(col, col);
        for r in col + 1..n {
            let factor = m.get(r, col) / p;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m.get(r, j) - factor * m.get(col, j);
                m.set(r, j, v);
            }
            rhs[r] = rhs[r] - factor * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(rhs[i], |acc, j| acc - m.get(i, j) * x[j]);
        x[i] = s / m.get(i, i);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]]);
        let x = solve(&a, &[8.0, -11.0, -3.0], 1e-12).unwrap();
        for (got, want) in x.iter().zip([2.0f64, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(solve(&a, &[1.0, 2.0], 1e-10).is_none());
    }

    #[test]
    fn select_rows_keeps_order() {
        let m = Matrix::from_rows(&[[1.0f32], [2.0], [3.0]]);
        assert_eq!(m.select_rows(&[2, 0]).as_slice(), &[3.0, 1.0]);
    }
}
