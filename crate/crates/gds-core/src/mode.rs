//! Posterior mode search: trust-region Newton iterations with the subproblem
//! solved by Steihaug conjugate-gradient truncation on the sparse Hessian.

use thiserror::Error;

use crate::model::{HierarchicalModel, ModelError};
use crate::params::ParameterVector;
use crate::sparse::{
    cholesky, color_pattern, fd_hessian, Coloring, FdError, SparseError, SparseSymMatrix,
    SparsityPattern,
};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct ModeOptions {
    /// Stop when ‖∇ log D‖∞ drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub init_radius: f64,
    /// Relative step for the colored finite-difference Hessian.
    pub fd_step: f64,
    /// Cap on conjugate-gradient iterations per subproblem; 0 means `dim`.
    pub max_cg: usize,
    /// Stream the optimizer trace (iteration, log density, grad norm, radius)
    /// as CSV on stderr.
    pub verbose: bool,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            tol: 1e-6,
            max_iter: 500,
            init_radius: 1.0,
            fd_step: DEFAULT_FD_STEP,
            max_cg: 0,
            verbose: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModeResult {
    pub theta_star: ParameterVector,
    /// log D(θ*, y), the c₁ constant.
    pub log_c1: f64,
    /// Negative Hessian of the log density at θ*; positive definite at a
    /// proper interior mode.
    pub hessian: SparseSymMatrix,
    /// ‖∇ log D(θ*)‖∞.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("log density is not finite at the starting point")]
    NonFiniteStart,
    #[error("non-finite density encountered with no recoverable step")]
    NoRecoverableStep,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    FiniteDifference(#[from] FdError),
    #[error(transparent)]
    Factorization(#[from] SparseError),
}

/// Negative Hessian of the log density (the curvature matrix of −log D).
fn neg_hessian(
    model: &dyn HierarchicalModel,
    theta: &[f64],
    pattern: &SparsityPattern,
    coloring: &Coloring,
    step: f64,
) -> Result<SparseSymMatrix, FdError> {
    let grad = |t: &[f64]| model.gradient(t).ok().map(|g| g.iter().map(|v| -v).collect());
    fd_hessian(grad, theta, pattern, coloring, step)
}

pub fn find_mode(
    model: &dyn HierarchicalModel,
    theta0: &ParameterVector,
    opts: &ModeOptions,
) -> Result<ModeResult, ModeError> {
    let dim = model.dim();
    assert_eq!(theta0.len(), dim);
    let pattern = model.sparsity();
    let coloring = color_pattern(&pattern);
    let max_cg = if opts.max_cg == 0 { dim } else { opts.max_cg };

    let mut theta = theta0.as_slice().to_vec();
    let mut f = -model.log_density(&theta);
    if !f.is_finite() {
        return Err(ModeError::NonFiniteStart);
    }
    let mut g = negated(&model.gradient(&theta)?);
    let mut radius = opts.init_radius;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= opts.tol;
    let mut hess: Option<SparseSymMatrix> = None;

    if opts.verbose {
        eprintln!("iteration,log_density,grad_norm,radius");
    }
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        if hess.is_none() {
            hess = Some(neg_hessian(model, &theta, &pattern, &coloring, opts.fd_step)?);
        }
        let b = hess.as_ref().unwrap();
        let (step, at_boundary) = steihaug(b, &g, radius, max_cg);
        let predicted = predicted_decrease(b, &g, &step);
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
        let f_trial = -model.log_density(&trial);
        let rho = if f_trial.is_finite() && predicted > 0.0 {
            (f - f_trial) / predicted
        } else {
            f64::NEG_INFINITY
        };

        if rho > 0.75 && at_boundary {
            radius *= 2.0;
        } else if rho < 0.1 {
            radius *= 0.25;
        }
        if rho > 0.1 {
            theta = trial;
            f = f_trial;
            g = negated(&model.gradient(&theta)?);
            hess = None;
            converged = inf_norm(&g) <= opts.tol;
            if opts.verbose {
                eprintln!("{},{},{},{}", iterations, -f, inf_norm(&g), radius);
            }
        } else if radius < 1e-13 * (1.0 + inf_norm(&theta)) {
            if !f_trial.is_finite() {
                return Err(ModeError::NoRecoverableStep);
            }
            break; // radius collapsed without progress; report non-convergence
        }
    }

    let hessian = match hess {
        Some(h) => h,
        None => neg_hessian(model, &theta, &pattern, &coloring, opts.fd_step)?,
    };
    Ok(ModeResult {
        theta_star: ParameterVector::new(theta),
        log_c1: -f,
        hessian,
        grad_norm: inf_norm(&g),
        iterations,
        converged,
    })
}

/// Re-estimates −∇² log D at the mode and verifies positive definiteness;
/// a factorization error means the point is not a proper interior mode.
pub fn hessian_at_mode(
    model: &dyn HierarchicalModel,
    result: &ModeResult,
) -> Result<SparseSymMatrix, ModeError> {
    let pattern = model.sparsity();
    let coloring = color_pattern(&pattern);
    let h = neg_hessian(model, &result.theta_star, &pattern, &coloring, DEFAULT_FD_STEP)?;
    cholesky(&h)?;
    Ok(h)
}

/// Steihaug truncated CG for min gᵀp + ½pᵀBp subject to ‖p‖ ≤ Δ.
/// Returns the step and whether it ended on the trust-region boundary.
fn steihaug(b: &SparseSymMatrix, g: &[f64], delta: f64, max_cg: usize) -> (Vec<f64>, bool) {
    let n = g.len();
    let mut p = vec![0.0; n];
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return (p, false);
    }
    // near-exact inner solves once the gradient is small, so Newton behaves
    // like Newton on locally quadratic objectives
    let tol = gnorm * gnorm.sqrt().min(0.01);
    let mut r = g.to_vec();
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut bd = vec![0.0; n];
    for _ in 0..max_cg {
        b.mul_vec(&d, &mut bd);
        let kappa: f64 = d.iter().zip(&bd).map(|(a, b)| a * b).sum();
        if kappa <= 0.0 {
            return (to_boundary(&p, &d, delta), true);
        }
        let alpha = rr / kappa;
        let mut pn = vec![0.0; n];
        for i in 0..n {
            pn[i] = p[i] + alpha * d[i];
        }
        if norm2(&pn) >= delta {
            return (to_boundary(&p, &d, delta), true);
        }
        p = pn;
        for i in 0..n {
            r[i] += alpha * bd[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= tol {
            return (p, false);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = -r[i] + beta * d[i];
        }
        rr = rr_new;
    }
    (p, false)
}

/// Positive τ with ‖p + τd‖ = Δ.
fn to_boundary(p: &[f64], d: &[f64], delta: f64) -> Vec<f64> {
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let pd: f64 = p.iter().zip(d).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|v| v * v).sum();
    let tau = ((pd * pd + dd * (delta * delta - pp)).sqrt() - pd) / dd;
    p.iter().zip(d).map(|(a, b)| a + tau * b).collect()
}

fn predicted_decrease(b: &SparseSymMatrix, g: &[f64], p: &[f64]) -> f64 {
    let mut bp = vec![0.0; p.len()];
    b.mul_vec(p, &mut bp);
    let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
    let pbp: f64 = p.iter().zip(&bp).map(|(a, b)| a * b).sum();
    -(gp + 0.5 * pbp)
}

fn negated(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
