use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::linalg::Matrix;
use crate::num::{mean, sample_sd, Real};

/// Per-coordinate affine transform `(x - center) / scale` fit on a training pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Standardizer<T> {
    center: Vec<T>,
    scale: Vec<T>,
    /// Coordinates with zero variance (centered, left unscaled).
    degenerate: Vec<usize>,
}

impl<T: Real> Standardizer<T> {
    /// Fits center (mean) and scale (sample SD, `n - 1`) per column.
    pub fn fit(rows: &Matrix<T>) -> Result<Self> {
        if rows.rows() < 2 {
            return Err(Error::Config(format!(
                "standardization needs at least 2 vectors, got {}",
                rows.rows()
            )));
        }
        let mut center = Vec::with_capacity(rows.cols());
        let mut scale = Vec::with_capacity(rows.cols());
        let mut degenerate = Vec::new();
        for j in 0..rows.cols() {
            let col = rows.column(j);
            let sd = sample_sd(&col);
            center.push(mean(&col));
            if sd > T::zero() && sd.is_finite() {
                scale.push(sd);
            } else {
                degenerate.push(j);
                scale.push(T::one());
            }
        }
        Ok(Self {
            center,
            scale,
            degenerate,
        })
    }

    /// Identity transform over `dim` coordinates.
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![T::zero(); dim],
            scale: vec![T::one(); dim],
            degenerate: Vec::new(),
        }
    }

    pub fn from_parts(center: Vec<T>, scale: Vec<T>) -> Result<Self> {
        if center.len() != scale.len() || scale.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::Config("standardizer needs matching positive scales".into()));
        }
        Ok(Self {
            center,
            scale,
            degenerate: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn scale(&self) -> &[T] {
        &self.scale
    }

    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn warnings(&self, names: &[String]) -> Vec<Warning> {
        self.degenerate
            .iter()
            .map(|&j| Warning::ZeroVariance {
                coordinate: j,
                name: names.get(j).cloned().unwrap_or_default(),
            })
            .collect()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim(), "standardizer dimension mismatch");
        x.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((&v, &c), &s)| (v - c) / s)
            .collect()
    }

    pub fn apply_in_place(&self, x: &mut [T]) {
        for ((v, &c), &s) in x.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - c) / s;
        }
    }

    pub fn apply_rows(&self, rows: &Matrix<T>) -> Matrix<T> {
        let mut out = rows.clone();
        for i in 0..out.rows() {
            self.apply_in_place(out.row_mut(i));
        }
        out
    }
}

/// Fits a standardizer on `train` and returns it with the transformed rows.
pub fn standardize<T: Real>(train: &Matrix<T>) -> Result<(Standardizer<T>, Matrix<T>)> {
    let s = Standardizer::fit(train)?;
    let out = s.apply_rows(train);
    Ok((s, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn random_rows(n: usize, d: usize, seed: u64) -> Matrix<f64> {
        let mut rng = stream(seed);
        let data = (0..n * d)
            .map(|i| 3.0 + (i % d) as f64 * 2.0 + (1.0 + i as f64 % 3.0) * f64::standard_normal(&mut rng))
            .collect();
        Matrix::from_row_major(data, d)
    }

    #[test]
    fn transformed_columns_have_zero_mean_unit_sd() {
        let rows = random_rows(500, 3, 11);
        let (_, z) = standardize(&rows).unwrap();
        for j in 0..3 {
            let col = z.column(j);
            assert!(mean(&col).abs() < 1e-12);
            assert!((sample_sd(&col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_centered_and_flagged() {
        let rows = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let (s, z) = standardize(&rows).unwrap();
        assert_eq!(s.degenerate(), &[1]);
        assert_eq!(s.scale()[1], 1.0);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            s.warnings(&names),
            vec![Warning::ZeroVariance {
                coordinate: 1,
                name: "b".into()
            }]
        );
    }

    #[test]
    fn fresh_data_uses_training_moments_only() {
        let rows = random_rows(200, 2, 3);
        let (s, z) = standardize(&rows).unwrap();
        // recompute the moments independently
        let c0 = rows.column(0).iter().sum::<f64>() / 200.0;
        let sd0 = (rows.column(0).iter().map(|v| (v - c0).powi(2)).sum::<f64>() / 199.0).sqrt();
        let fresh = [10.0, -2.0];
        assert!((s.apply(&fresh)[0] - (10.0 - c0) / sd0).abs() < 1e-12);
        // the transform is affine with the original moments, so a second pass moves the data again
        let twice = s.apply_rows(&z);
        assert!((twice.get(0, 0) - z.get(0, 0)).abs() > 1e-6);
    }

    #[test]
    fn needs_two_rows() {
        assert!(Standardizer::fit(&Matrix::from_rows(&[[1.0f64]])).is_err());
    }
}
