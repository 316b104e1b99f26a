//! Model A: conditionally conjugate normal hierarchy on simulated data.
//!
//! y_it ~ N(θ_i, σ²) for t = 1…T, θ_i ~ N(μ, τ²), with flat priors on μ and
//! log σ and a flat prior on τ. Parameters are (θ_1…θ_N, μ, log τ, log σ);
//! the flat prior on τ contributes the Jacobian term +log τ in the log-τ
//! coordinate.

use rand_distr::{Distribution, Normal};

use super::{HierarchicalModel, ModelError};
use crate::math::LN_2PI;
use crate::rng::{stream_rng, StreamPhase};

#[derive(Clone, Debug, PartialEq)]
pub struct NormalHierModel {
    n_units: usize,
    t_per_unit: usize,
    y_sum: Vec<f64>,
    y_sumsq: Vec<f64>,
}

/// Simulates data with the given truth and wraps it in the model. Identical
/// seeds produce identical data.
pub fn make_model_a(
    n_units: usize,
    t_per_unit: usize,
    mu_true: f64,
    tau_true: f64,
    sigma_true: f64,
    seed: u64,
) -> NormalHierModel {
    assert!(n_units >= 1 && t_per_unit >= 1, "invalid sizes");
    assert!(tau_true > 0.0 && sigma_true > 0.0, "scale truths must be positive");
    let mut rng = stream_rng(seed, StreamPhase::Simulate, 0);
    let unit_means = Normal::new(mu_true, tau_true).unwrap();
    let noise = Normal::new(0.0, sigma_true).unwrap();
    let mut y_sum = Vec::with_capacity(n_units);
    let mut y_sumsq = Vec::with_capacity(n_units);
    for _ in 0..n_units {
        let theta_i = unit_means.sample(&mut rng);
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..t_per_unit {
            let y: f64 = theta_i + noise.sample(&mut rng);
            s += y;
            ss += y * y;
        }
        y_sum.push(s);
        y_sumsq.push(ss);
    }
    NormalHierModel { n_units, t_per_unit, y_sum, y_sumsq }
}

impl NormalHierModel {
    /// Builds directly from per-unit sufficient statistics Σ_t y_it and Σ_t y_it².
    pub fn from_sufficient_stats(t_per_unit: usize, y_sum: Vec<f64>, y_sumsq: Vec<f64>) -> Self {
        assert_eq!(y_sum.len(), y_sumsq.len());
        assert!(!y_sum.is_empty() && t_per_unit >= 1);
        NormalHierModel { n_units: y_sum.len(), t_per_unit, y_sum, y_sumsq }
    }

    pub fn t_per_unit(&self) -> usize {
        self.t_per_unit
    }

    pub fn unit_mean(&self, i: usize) -> f64 {
        self.y_sum[i] / self.t_per_unit as f64
    }

    /// Within-unit sum of squares Σ_t (y_it − ȳ_i)².
    pub fn unit_ss(&self, i: usize) -> f64 {
        self.y_sumsq[i] - self.y_sum[i] * self.y_sum[i] / self.t_per_unit as f64
    }

    fn split(theta: &[f64]) -> (&[f64], f64, f64, f64) {
        let n = theta.len() - 3;
        (&theta[..n], theta[n], theta[n + 1], theta[n + 2])
    }

    /// Likelihood and mixing-prior terms of unit i; summing these over i and
    /// adding [`Self::pop_contribution`] reproduces the full log density.
    pub fn unit_contribution(&self, i: usize, theta: &[f64]) -> f64 {
        let (units, mu, lt, ls) = Self::split(theta);
        let t = self.t_per_unit as f64;
        let tau2 = (2.0 * lt).exp();
        let sig2 = (2.0 * ls).exp();
        let th = units[i];
        let rss = self.y_sumsq[i] - 2.0 * th * self.y_sum[i] + t * th * th;
        let lik = -0.5 * t * LN_2PI - t * ls - rss / (2.0 * sig2);
        let d = th - mu;
        let mix = -0.5 * LN_2PI - lt - d * d / (2.0 * tau2);
        lik + mix
    }

    /// Population-only terms: just the +log τ Jacobian of the flat prior on τ.
    pub fn pop_contribution(&self, theta: &[f64]) -> f64 {
        let (_, _, lt, _) = Self::split(theta);
        lt
    }
}

impl HierarchicalModel for NormalHierModel {
    fn n_units(&self) -> usize {
        self.n_units
    }

    fn unit_dim(&self) -> usize {
        1
    }

    fn pop_dim(&self) -> usize {
        3
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim());
        let (units, mu, lt, ls) = Self::split(theta);
        let t = self.t_per_unit as f64;
        let tau2 = (2.0 * lt).exp();
        let sig2 = (2.0 * ls).exp();
        let mut rss_total = 0.0;
        let mut dev_total = 0.0;
        for (i, &th) in units.iter().enumerate() {
            rss_total += self.y_sumsq[i] - 2.0 * th * self.y_sum[i] + t * th * th;
            let d = th - mu;
            dev_total += d * d;
        }
        let n = self.n_units as f64;
        let lik = -0.5 * n * t * LN_2PI - n * t * ls - rss_total / (2.0 * sig2);
        let mix = -0.5 * n * LN_2PI - n * lt - dev_total / (2.0 * tau2);
        lik + mix + lt
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        assert_eq!(theta.len(), self.dim());
        let (units, mu, lt, ls) = Self::split(theta);
        let t = self.t_per_unit as f64;
        let tau2 = (2.0 * lt).exp();
        let sig2 = (2.0 * ls).exp();
        let n = self.n_units;
        let mut g = vec![0.0; self.dim()];
        let mut dev_sum = 0.0;
        let mut dev_sq = 0.0;
        let mut rss_total = 0.0;
        for (i, &th) in units.iter().enumerate() {
            let d = th - mu;
            dev_sum += d;
            dev_sq += d * d;
            rss_total += self.y_sumsq[i] - 2.0 * th * self.y_sum[i] + t * th * th;
            g[i] = (self.y_sum[i] - t * th) / sig2 - d / tau2;
        }
        g[n] = dev_sum / tau2;
        g[n + 1] = -(n as f64) + dev_sq / tau2 + 1.0;
        g[n + 2] = -(n as f64) * t + rss_total / sig2;
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(ModelError::OutOfSupport)
        }
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let (units, _, _, ls) = Self::split(theta);
        let t = self.t_per_unit as f64;
        let sig2 = (2.0 * ls).exp();
        let mut rss_total = 0.0;
        for (i, &th) in units.iter().enumerate() {
            rss_total += self.y_sumsq[i] - 2.0 * th * self.y_sum[i] + t * th * th;
        }
        let n = self.n_units as f64;
        -0.5 * n * t * LN_2PI - n * t * ls - rss_total / (2.0 * sig2)
    }

    fn pop_names(&self) -> Vec<String> {
        vec!["mu".into(), "log_tau".into(), "log_sigma".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2PI;

    #[test]
    fn single_point_hand_value() {
        // N=1, T=1, y=0, θ=(0,0,0,0): two standard-normal log densities plus
        // a zero Jacobian term
        let m = NormalHierModel::from_sufficient_stats(1, vec![0.0], vec![0.0]);
        let v = m.log_density(&[0.0, 0.0, 0.0, 0.0]);
        assert!((v - (-LN_2PI)).abs() < 1e-12);
        assert!((v - (-1.837877)).abs() < 1e-6);
    }

    #[test]
    fn parameter_counts() {
        let m = make_model_a(1500, 10, -1.0, 3.0, 2.0, 1);
        assert_eq!(m.dim(), 1503);
        let tiny = make_model_a(1, 1, 0.0, 1.0, 1.0, 1);
        assert_eq!(tiny.dim(), 4);
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = make_model_a(20, 5, -1.0, 3.0, 2.0, 42);
        let b = make_model_a(20, 5, -1.0, 3.0, 2.0, 42);
        assert_eq!(a, b);
        let c = make_model_a(20, 5, -1.0, 3.0, 2.0, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_gradient_zero_at_conditional_mode() {
        let m = make_model_a(8, 4, 0.5, 1.5, 1.0, 7);
        let (mu, lt, ls) = (0.3, 0.2, -0.1);
        let tau2 = (2.0f64 * lt).exp();
        let sig2 = (2.0f64 * ls).exp();
        let t = 4.0;
        let mut theta = vec![0.0; m.dim()];
        for i in 0..8 {
            // conditional mode of θ_i given (μ, τ, σ)
            theta[i] = (m.y_sum[i] / sig2 + mu / tau2) / (t / sig2 + 1.0 / tau2);
        }
        theta[8] = mu;
        theta[9] = lt;
        theta[10] = ls;
        let g = m.gradient(&theta).unwrap();
        for gi in &g[..8] {
            assert!(gi.abs() < 1e-10, "household gradient {gi}");
        }
    }

    #[test]
    fn decomposition_matches_total() {
        let m = make_model_a(6, 3, -1.0, 2.0, 1.0, 3);
        let theta: Vec<f64> = (0..m.dim()).map(|i| 0.1 * i as f64 - 0.4).collect();
        let total: f64 = (0..6).map(|i| m.unit_contribution(i, &theta)).sum::<f64>()
            + m.pop_contribution(&theta);
        assert!((total - m.log_density(&theta)).abs() < 1e-10);
    }
}
