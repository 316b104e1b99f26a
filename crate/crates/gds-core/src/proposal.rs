//! The scaled-MVN proposal g(θ) = MVN(θ*, s·H⁻¹), held through the sparse
//! Cholesky factor Λ of its precision (1/s)·H, and the acceptance statistic
//! log Φ built on it.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::mode::ModeResult;
use crate::model::HierarchicalModel;
use crate::params::ParameterVector;
use crate::sparse::{cholesky, CholFactor, SolveMode, SparseError, SparseSymMatrix};

/// Positive log Φ values at most this large are treated as floating-point
/// noise at the mode and clamped to zero.
pub const LOG_PHI_SLACK: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Proposal {
    /// θ*, the posterior mode.
    pub mean: ParameterVector,
    /// Factor Λ of the precision (1/s)·H, so the covariance is s·H⁻¹.
    pub factor: CholFactor,
    /// Covariance multiplier s.
    pub scale_s: f64,
    /// log g(θ*), the c₂ constant.
    pub log_c2: f64,
    pub dim: usize,
}

impl Proposal {
    /// Factors (1/s)·hessian and caches log c₂ = −(d/2)·log 2π + Σ log Λ_ii.
    pub fn build(
        mode: &ModeResult,
        hessian: &SparseSymMatrix,
        scale_s: f64,
    ) -> Result<Proposal, SparseError> {
        assert!(scale_s > 0.0);
        let dim = hessian.dim();
        assert_eq!(mode.theta_star.len(), dim);
        let factor = cholesky(&hessian.scaled(1.0 / scale_s))?;
        let log_c2 = -0.5 * dim as f64 * crate::math::LN_2PI + factor.log_det_half();
        Ok(Proposal { mean: mode.theta_star.clone(), factor, scale_s, log_c2, dim })
    }

    /// Draw θ = θ* + Λ⁻ᵀz with z standard normal; cost is linear in the
    /// nonzeros of Λ.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_from_z(&z)
    }

    /// Deterministic part of [`Proposal::sample`]: z = 0 returns exactly θ*.
    pub fn sample_from_z(&self, z: &[f64]) -> ParameterVector {
        let w = self.factor.solve(z, SolveMode::Backward);
        let spread = self.factor.unpermute(&w);
        ParameterVector::new(
            self.mean.iter().zip(&spread).map(|(m, s)| m + s).collect(),
        )
    }

    /// Exact MVN log density via the factor: the quadratic form is ‖Λᵀ·P(θ−θ*)‖².
    pub fn log_g(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim);
        let diff: Vec<f64> = theta.iter().zip(self.mean.iter()).map(|(t, m)| t - m).collect();
        let permuted = self.factor.permute(&diff);
        let u = self.factor.mul_lt(&permuted);
        let quad: f64 = u.iter().map(|v| v * v).sum();
        self.log_c2 - 0.5 * quad
    }
}

/// log Φ(θ|y) = log D(θ,y) − log g(θ) − log c₁ + log c₂. Zero at θ* by
/// construction; tiny positive values (≤ 1e-8) are clamped to zero.
pub fn log_phi(
    model: &dyn HierarchicalModel,
    mode: &ModeResult,
    proposal: &Proposal,
    theta: &[f64],
) -> f64 {
    let v = model.log_density(theta) - proposal.log_g(theta) - mode.log_c1 + proposal.log_c2;
    if v > 0.0 && v <= LOG_PHI_SLACK {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2PI;
    use crate::mode::{find_mode, hessian_at_mode, ModeOptions};
    use crate::model::MvnModel;

    fn unit_mode(dim: usize) -> (MvnModel, ModeResult, SparseSymMatrix) {
        let model = MvnModel::standard(dim);
        let res = find_mode(&model, &ParameterVector::zeros(dim), &ModeOptions::default()).unwrap();
        let h = hessian_at_mode(&model, &res).unwrap();
        (model, res, h)
    }

    #[test]
    fn log_c2_standard_normal() {
        let (_, mode, h) = unit_mode(1);
        let p = Proposal::build(&mode, &h, 1.0).unwrap();
        assert!((p.log_c2 - (-0.5 * LN_2PI)).abs() < 1e-7);
        assert!((p.log_c2 - (-0.918939)).abs() < 1e-5);
    }

    #[test]
    fn doubling_scale_lowers_log_c2_by_half_dim_log2() {
        let (_, mode, h) = unit_mode(3);
        let p1 = Proposal::build(&mode, &h, 1.0).unwrap();
        let p2 = Proposal::build(&mode, &h, 2.0).unwrap();
        let expect = 1.5 * 2f64.ln();
        assert!((p1.log_c2 - p2.log_c2 - expect).abs() < 1e-10);
    }

    #[test]
    fn zero_z_returns_mode() {
        let (_, mode, h) = unit_mode(4);
        let p = Proposal::build(&mode, &h, 1.7).unwrap();
        let s = p.sample_from_z(&[0.0; 4]);
        assert_eq!(s.as_slice(), mode.theta_star.as_slice());
    }

    #[test]
    fn log_phi_zero_at_mode() {
        let (model, mode, h) = unit_mode(3);
        let p = Proposal::build(&mode, &h, 1.3).unwrap();
        let v = log_phi(&model, &mode, &p, mode.theta_star.as_slice());
        assert!(v.abs() <= 1e-9, "log phi at mode = {v}");
        assert!((p.log_g(mode.theta_star.as_slice()) - p.log_c2).abs() < 1e-12);
    }

    #[test]
    fn gaussian_log_phi_closed_form() {
        // target N(0,1), proposal N(0,s): log Φ(θ) = −θ²/2·(1 − 1/s)
        let (model, mode, h) = unit_mode(1);
        for s in [2.0, 0.5] {
            let p = Proposal::build(&mode, &h, s).unwrap();
            for theta in [-2.0, -0.5, 0.7, 3.0] {
                let got = log_phi(&model, &mode, &p, &[theta]);
                let want = -0.5 * theta * theta * (1.0 - 1.0 / s);
                assert!((got - want).abs() < 1e-7, "s={s} theta={theta}: {got} vs {want}");
                if s >= 1.0 {
                    assert!(got <= 0.0);
                } else if theta != 0.0 {
                    assert!(got > 0.0, "under-dispersed proposal must leak above one");
                }
            }
        }
    }
}
