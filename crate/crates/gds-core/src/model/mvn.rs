//! An exact multivariate-normal target. The posterior equals the (flat-prior)
//! likelihood, Φ has closed form against a scaled-MVN proposal, and the whole
//! sampler can be validated against known moments.

use nalgebra::DMatrix;

use super::{HierarchicalModel, ModelError};

#[derive(Clone, Debug, PartialEq)]
pub struct MvnModel {
    mean: Vec<f64>,
    precision: DMatrix<f64>,
}

impl MvnModel {
    pub fn new(mean: Vec<f64>, precision: DMatrix<f64>) -> Self {
        assert_eq!(mean.len(), precision.nrows());
        assert_eq!(precision.nrows(), precision.ncols());
        MvnModel { mean, precision }
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        MvnModel::new(vec![0.0; dim], DMatrix::identity(dim, dim))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Covariance (dense inverse), for oracle comparisons.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.precision.clone().try_inverse().expect("precision is invertible")
    }
}

impl HierarchicalModel for MvnModel {
    fn n_units(&self) -> usize {
        0
    }

    fn unit_dim(&self) -> usize {
        0
    }

    fn pop_dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim());
        let mut q = 0.0;
        for r in 0..theta.len() {
            for c in 0..theta.len() {
                q += (theta[r] - self.mean[r]) * self.precision[(r, c)] * (theta[c] - self.mean[c]);
            }
        }
        -0.5 * q
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        assert_eq!(theta.len(), self.dim());
        let mut g = vec![0.0; theta.len()];
        for r in 0..theta.len() {
            for c in 0..theta.len() {
                g[r] -= self.precision[(r, c)] * (theta[c] - self.mean[c]);
            }
        }
        Ok(g)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        // flat prior: the whole density is likelihood
        self.log_density(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_values() {
        let m = MvnModel::standard(2);
        assert_eq!(m.log_density(&[0.0, 0.0]), 0.0);
        assert!((m.log_density(&[1.0, 2.0]) - (-2.5)).abs() < 1e-14);
        let g = m.gradient(&[1.0, 2.0]).unwrap();
        assert_eq!(g, vec![-1.0, -2.0]);
    }
}
