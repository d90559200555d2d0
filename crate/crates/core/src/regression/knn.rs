use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::num::Real;

use super::kdtree::{KdTree, Neighbor};
use super::Regressor;

/// Average of the responses of the `k` nearest training points.
#[derive(Debug, Clone)]
pub struct KnnRegressor<T> {
    tree: KdTree<T>,
    y: Matrix<T>,
    k: usize,
}

impl<T: Real> KnnRegressor<T> {
    pub fn fit(x: Matrix<T>, y: Matrix<T>, k: usize) -> Result<Self> {
        super::check_shapes(&x, &y)?;
        if k == 0 || k > x.rows() {
            return Err(Error::Config(format!(
                "k = {k} outside 1..={} for nearest-neighbor regression",
                x.rows()
            )));
        }
        Ok(Self {
            tree: KdTree::new(x),
            y,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k == 0 || k > self.tree.len() {
            return Err(Error::Config(format!("k = {k} exceeds training size")));
        }
        self.k = k;
        Ok(self)
    }

    pub fn neighbors(&self, x: &[T], k: usize) -> Vec<Neighbor<T>> {
        self.tree.nearest(x, k)
    }

    pub fn responses(&self) -> &Matrix<T> {
        &self.y
    }
}

impl<T: Real> Regressor<T> for KnnRegressor<T> {
    fn n_outputs(&self) -> usize {
        self.y.cols()
    }

    fn predict_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        let nb = self.tree.nearest(x, self.k);
        for n in &nb {
            for (o, &v) in out.iter_mut().zip(self.y.row(n.index)) {
                *o = *o + v;
            }
        }
        let kk = T::from_count(nb.len());
        out.iter_mut().for_each(|v| *v = *v / kk);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_nearest_responses() {
        let x = Matrix::from_row_major(vec![0.0, 1.0, 2.0, 10.0], 1);
        let y = Matrix::from_rows(&[[1.0, 0.0], [3.0, 1.0], [5.0, 2.0], [100.0, 3.0]]);
        let r = KnnRegressor::fit(x, y, 2).unwrap();
        assert_eq!(r.predict(&[0.4]), vec![2.0, 0.5]);
        // outside the hull: still the k nearest
        assert_eq!(r.predict(&[50.0]), vec![52.5, 2.5]);
    }

    #[test]
    fn rejects_k_above_sample() {
        let x = Matrix::from_row_major(vec![0.0f64, 1.0], 1);
        let y = Matrix::from_row_major(vec![0.0, 1.0], 1);
        assert!(KnnRegressor::fit(x, y, 3).is_err());
    }
}
