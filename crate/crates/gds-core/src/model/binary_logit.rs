//! Model B: hierarchical binary choice on simulated data, the scalability
//! workhorse.
//!
//! Unit i makes y_i store visits out of T weeks with logit p_i = β_i'x_i.
//! β_i ~ MVN(β̄, Σ) across units; β̄ has a diffuse MVN(0, 100·I) prior and Σ
//! an inverse Wishart(k+2, I) prior. Σ enters θ through the log-Cholesky
//! parametrization (unconstrained), whose Jacobian is part of the prior.
//! Layout: (β_1 … β_N, β̄, ℓ) with ℓ the k(k+1)/2 lower-triangle entries of
//! the Cholesky factor in column-major order, diagonal on the log scale.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::{HierarchicalModel, ModelError};
use crate::math::{ln_binomial, log_sigmoid, LN_2PI};
use crate::rng::{stream_rng, StreamPhase};

const PRIOR_MEAN_VAR: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryLogitModel {
    n_units: usize,
    trials: u64,
    k: usize,
    x: Vec<f64>, // n_units × k, row-major, first column is the intercept
    y: Vec<u64>,
    ln_choose: Vec<f64>, // ln C(T, y_i), constant in θ
}

/// Simulates β_i ~ MVN(β̄, Σ), covariates (1, k−1 standard normals), and
/// binomial counts y_i ~ Bin(T, logit⁻¹(β_i'x_i)).
pub fn make_model_b(
    n_units: usize,
    trials: u64,
    k: usize,
    beta_bar_true: &[f64],
    sigma_true: &DMatrix<f64>,
    seed: u64,
) -> BinaryLogitModel {
    assert!(n_units >= 1 && trials >= 1 && k >= 1, "invalid sizes");
    assert_eq!(beta_bar_true.len(), k);
    assert_eq!((sigma_true.nrows(), sigma_true.ncols()), (k, k));
    let chol = sigma_true
        .clone()
        .cholesky()
        .expect("Sigma_true must be symmetric positive definite");
    let mut rng = stream_rng(seed, StreamPhase::Simulate, 0);
    let mut x = Vec::with_capacity(n_units * k);
    let mut y = Vec::with_capacity(n_units);
    for _ in 0..n_units {
        let mut xi = vec![1.0f64];
        for _ in 1..k {
            xi.push(rng.sample(StandardNormal));
        }
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let noise = chol.l() * DMatrix::from_column_slice(k, 1, &z);
        let mut eta = 0.0;
        for j in 0..k {
            eta += (beta_bar_true[j] + noise[(j, 0)]) * xi[j];
        }
        let p = 1.0 / (1.0 + (-eta).exp());
        let yi = Binomial::new(trials, p.clamp(0.0, 1.0)).unwrap().sample(&mut rng);
        x.extend_from_slice(&xi);
        y.push(yi);
    }
    BinaryLogitModel::from_parts(trials, k, x, y)
}

impl BinaryLogitModel {
    /// Wraps existing data; `x` is n×k row-major.
    pub fn from_parts(trials: u64, k: usize, x: Vec<f64>, y: Vec<u64>) -> Self {
        let n_units = y.len();
        assert_eq!(x.len(), n_units * k);
        assert!(y.iter().all(|&yi| yi <= trials), "counts must lie in [0, T]");
        let ln_choose = y.iter().map(|&yi| ln_binomial(trials, yi)).collect();
        BinaryLogitModel { n_units, trials, k, x, y, ln_choose }
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn counts(&self) -> &[u64] {
        &self.y
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    fn iw_dof(&self) -> f64 {
        self.k as f64 + 2.0
    }

    fn pop_offset(&self) -> usize {
        self.n_units * self.k
    }

    /// Cholesky factor L of Σ from the ℓ block (diagonal exponentiated).
    fn chol_from_theta(&self, theta: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        let ell = &theta[self.pop_offset() + k..];
        let mut l = DMatrix::zeros(k, k);
        let mut idx = 0;
        for c in 0..k {
            for r in c..k {
                l[(r, c)] = if r == c { ell[idx].exp() } else { ell[idx] };
                idx += 1;
            }
        }
        l
    }

    /// Sum of the log-diagonal entries of L, i.e. ½·log|Σ|.
    fn half_log_det_sigma(&self, theta: &[f64]) -> f64 {
        let k = self.k;
        let ell = &theta[self.pop_offset() + k..];
        let mut idx = 0;
        let mut s = 0.0;
        for c in 0..k {
            s += ell[idx];
            idx += k - c;
        }
        s
    }

    /// Data and mixing-prior contribution of unit i (needs Σ pieces, so it
    /// recomputes the small factor; meant for tests and diagnostics).
    pub fn unit_contribution(&self, i: usize, theta: &[f64]) -> f64 {
        let k = self.k;
        let l = self.chol_from_theta(theta);
        let beta_bar = &theta[self.pop_offset()..self.pop_offset() + k];
        let beta_i = &theta[i * k..(i + 1) * k];
        let xi = self.covariates(i);
        let eta: f64 = beta_i.iter().zip(xi).map(|(b, x)| b * x).sum();
        let yi = self.y[i] as f64;
        let t = self.trials as f64;
        let lik = self.ln_choose[i] + yi * log_sigmoid(eta) + (t - yi) * log_sigmoid(-eta);
        let mut d = DMatrix::from_fn(k, 1, |r, _| beta_i[r] - beta_bar[r]);
        l.solve_lower_triangular_mut(&mut d);
        let q: f64 = d.iter().map(|v| v * v).sum();
        let mix = -0.5 * k as f64 * LN_2PI - self.half_log_det_sigma(theta) - 0.5 * q;
        lik + mix
    }

    /// Hyperprior terms: β̄ prior, inverse-Wishart kernel, log-Cholesky Jacobian.
    pub fn pop_contribution(&self, theta: &[f64]) -> f64 {
        let k = self.k;
        let beta_bar = &theta[self.pop_offset()..self.pop_offset() + k];
        let l = self.chol_from_theta(theta);
        let half_logdet = self.half_log_det_sigma(theta);

        let bb_quad: f64 = beta_bar.iter().map(|b| b * b).sum();
        let prior_mean =
            -0.5 * k as f64 * (LN_2PI + PRIOR_MEAN_VAR.ln()) - 0.5 * bb_quad / PRIOR_MEAN_VAR;

        // tr(Σ⁻¹) = ‖L⁻¹‖_F²
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .expect("positive diagonal by construction");
        let trace_inv: f64 = linv.iter().map(|v| v * v).sum();
        let iw = -(self.iw_dof() + k as f64 + 1.0) * half_logdet - 0.5 * trace_inv;

        let ell = &theta[self.pop_offset() + k..];
        let mut jac = k as f64 * 2f64.ln();
        let mut idx = 0;
        for c in 0..k {
            jac += (k - c + 1) as f64 * ell[idx];
            idx += k - c;
        }
        prior_mean + iw + jac
    }
}

impl HierarchicalModel for BinaryLogitModel {
    fn n_units(&self) -> usize {
        self.n_units
    }

    fn unit_dim(&self) -> usize {
        self.k
    }

    fn pop_dim(&self) -> usize {
        self.k + self.k * (self.k + 1) / 2
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim());
        let k = self.k;
        let t = self.trials as f64;
        let l = self.chol_from_theta(theta);
        let half_logdet = self.half_log_det_sigma(theta);
        let beta_bar = &theta[self.pop_offset()..self.pop_offset() + k];

        let linv = match l.clone().try_inverse() {
            Some(inv) => inv,
            None => return f64::NEG_INFINITY,
        };

        let mut lik = 0.0;
        let mut quad = 0.0;
        let mut work = vec![0.0f64; k];
        for i in 0..self.n_units {
            let beta_i = &theta[i * k..(i + 1) * k];
            let xi = self.covariates(i);
            let eta: f64 = beta_i.iter().zip(xi).map(|(b, x)| b * x).sum();
            let yi = self.y[i] as f64;
            lik += self.ln_choose[i] + yi * log_sigmoid(eta) + (t - yi) * log_sigmoid(-eta);
            // w = L⁻¹ (β_i − β̄)
            for r in 0..k {
                let mut acc = 0.0;
                for c in 0..=r {
                    acc += linv[(r, c)] * (beta_i[c] - beta_bar[c]);
                }
                work[r] = acc;
            }
            quad += work.iter().map(|v| v * v).sum::<f64>();
        }
        let n = self.n_units as f64;
        let mix = -0.5 * n * k as f64 * LN_2PI - n * half_logdet - 0.5 * quad;
        lik + mix + self.pop_contribution(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        assert_eq!(theta.len(), self.dim());
        let k = self.k;
        let n = self.n_units;
        let t = self.trials as f64;
        let l = self.chol_from_theta(theta);
        let beta_bar = &theta[self.pop_offset()..self.pop_offset() + k];

        let linv = l.clone().try_inverse().ok_or(ModelError::OutOfSupport)?;
        let sigma_inv = linv.transpose() * &linv;

        let mut g = vec![0.0; self.dim()];
        let mut dev_sum = vec![0.0f64; k];
        let mut scatter = DMatrix::<f64>::zeros(k, k); // Σ_i (β_i−β̄)(β_i−β̄)'
        for i in 0..n {
            let beta_i = &theta[i * k..(i + 1) * k];
            let xi = self.covariates(i);
            let eta: f64 = beta_i.iter().zip(xi).map(|(b, x)| b * x).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            let resid = self.y[i] as f64 - t * p;
            for r in 0..k {
                let d_r = beta_i[r] - beta_bar[r];
                dev_sum[r] += d_r;
                for c in 0..k {
                    scatter[(r, c)] += d_r * (beta_i[c] - beta_bar[c]);
                }
                // −Σ⁻¹(β_i − β̄) term filled below via matrix product
                g[i * k + r] = resid * xi[r];
            }
        }
        for i in 0..n {
            let beta_i = &theta[i * k..(i + 1) * k];
            for r in 0..k {
                let mut acc = 0.0;
                for c in 0..k {
                    acc += sigma_inv[(r, c)] * (beta_i[c] - beta_bar[c]);
                }
                g[i * k + r] -= acc;
            }
        }

        let off = self.pop_offset();
        for r in 0..k {
            let mut acc = 0.0;
            for c in 0..k {
                acc += sigma_inv[(r, c)] * dev_sum[c];
            }
            g[off + r] = acc - beta_bar[r] / PRIOR_MEAN_VAR;
        }

        // d/dΣ of −(a/2)·log|Σ| − ½·tr(Σ⁻¹ B), a = N + ν + k + 1, B = scatter + I,
        // pushed through Σ = LL' and the log-diagonal: dF/dL = 2(G·L)
        let a = n as f64 + self.iw_dof() + k as f64 + 1.0;
        let b_mat = &scatter + DMatrix::identity(k, k);
        let big_g = 0.5 * (&sigma_inv * &b_mat * &sigma_inv) - (a / 2.0) * &sigma_inv;
        let gl = &big_g * &l;
        let mut idx = 0;
        for c in 0..k {
            for r in c..k {
                g[off + k + idx] = if r == c {
                    2.0 * gl[(c, c)] * l[(c, c)] + (k - c + 1) as f64
                } else {
                    2.0 * gl[(r, c)]
                };
                idx += 1;
            }
        }

        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(ModelError::OutOfSupport)
        }
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let k = self.k;
        let t = self.trials as f64;
        let mut lik = 0.0;
        for i in 0..self.n_units {
            let beta_i = &theta[i * k..(i + 1) * k];
            let xi = self.covariates(i);
            let eta: f64 = beta_i.iter().zip(xi).map(|(b, x)| b * x).sum();
            let yi = self.y[i] as f64;
            lik += self.ln_choose[i] + yi * log_sigmoid(eta) + (t - yi) * log_sigmoid(-eta);
        }
        lik
    }

    fn pop_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.k).map(|j| format!("beta_bar_{j}")).collect();
        for c in 0..self.k {
            for r in c..self.k {
                names.push(if r == c {
                    format!("log_lchol_{r}{c}")
                } else {
                    format!("lchol_{r}{c}")
                });
            }
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_k3() -> (Vec<f64>, DMatrix<f64>) {
        (vec![-10.0, 0.0, 10.0], DMatrix::identity(3, 3) * 0.1)
    }

    #[test]
    fn parameter_counts_match_design() {
        let (bb, sig) = truth_k3();
        let m = make_model_b(500, 52, 3, &bb, &sig, 1);
        assert_eq!(m.n_units() * m.unit_dim(), 1500);
        assert_eq!(m.pop_dim(), 9);
        assert_eq!(m.dim(), 1509);
    }

    #[test]
    fn counts_within_support() {
        let (bb, sig) = truth_k3();
        let m = make_model_b(10, 52, 3, &bb, &sig, 9);
        assert!(m.counts().iter().all(|&y| y <= 52));
    }

    #[test]
    fn midpoint_probability() {
        // β_i'x_i = 0 ⇒ p = ½ ⇒ E[y] = T/2; check via the likelihood value
        let m = BinaryLogitModel::from_parts(2, 1, vec![1.0], vec![1]);
        let theta = vec![0.0; m.dim()];
        // lik = ln C(2,1) + 1·ln½ + 1·ln½
        let expect = (2f64).ln() + 2.0 * 0.5f64.ln();
        assert!((m.log_likelihood(&theta) - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_data_population_gradient_is_prior_only() {
        // all counts zero and every β_i equal to β̄: the mixing terms cancel
        // and the β̄ gradient is the hyperprior gradient −β̄/100 alone
        let k = 2;
        let n = 5;
        let x: Vec<f64> = (0..n).flat_map(|i| vec![1.0, 0.1 * i as f64]).collect();
        let m = BinaryLogitModel::from_parts(4, k, x, vec![0; n]);
        let beta_bar = [0.7, -1.3];
        let mut theta = vec![0.0; m.dim()];
        for i in 0..n {
            theta[i * k..(i + 1) * k].copy_from_slice(&beta_bar);
        }
        theta[n * k..n * k + k].copy_from_slice(&beta_bar);
        let g = m.gradient(&theta).unwrap();
        for j in 0..k {
            let got = g[n * k + j];
            let want = -beta_bar[j] / 100.0;
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn determinism() {
        let (bb, sig) = truth_k3();
        let a = make_model_b(25, 52, 3, &bb, &sig, 5);
        let b = make_model_b(25, 52, 3, &bb, &sig, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn decomposition_matches_total() {
        let (bb, sig) = truth_k3();
        let m = make_model_b(6, 10, 3, &bb, &sig, 2);
        let theta: Vec<f64> = (0..m.dim()).map(|i| 0.05 * (i as f64) - 0.5).collect();
        let total: f64 = (0..6).map(|i| m.unit_contribution(i, &theta)).sum::<f64>()
            + m.pop_contribution(&theta);
        assert!((total - m.log_density(&theta)).abs() < 1e-9);
    }
}
