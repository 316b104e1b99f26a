//! The model abstraction: an unnormalized log posterior over a parameter
//! vector in the fixed block layout, with an analytic gradient and a
//! block-arrow Hessian sparsity pattern.

mod binary_logit;
mod conjugate_reg;
mod mvn;
mod normal_hier;

pub use binary_logit::{make_model_b, BinaryLogitModel};
pub use conjugate_reg::{make_model_c, model_c_log_marglik, ConjugateRegModel};
pub use mvn::MvnModel;
pub use normal_hier::{make_model_a, NormalHierModel};

use thiserror::Error;

use crate::params::ParameterVector;
use crate::sparse::SparsityPattern;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("evaluation point is outside the model support")]
    OutOfSupport,
}

/// A hierarchical Bayesian model: N conditionally independent units with k
/// heterogeneous parameters each, plus p population-level parameters at the
/// end of θ. All positive quantities enter θ on the log scale (covariances
/// via log-Cholesky) so the parameter space is unconstrained; the Jacobian of
/// each transform is part of the log prior.
///
/// Evaluation methods are pure and safe to call from many threads at once.
pub trait HierarchicalModel: Sync {
    fn n_units(&self) -> usize;
    fn unit_dim(&self) -> usize;
    fn pop_dim(&self) -> usize;

    fn dim(&self) -> usize {
        self.n_units() * self.unit_dim() + self.pop_dim()
    }

    /// Unnormalized log posterior log D(θ, y) = log f(y|θ) + log π(θ).
    /// Returns −∞ (never an error) for θ outside the support, so rejection
    /// proposals landing there are simply never accepted.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// Analytic gradient of [`Self::log_density`]; errors when θ is not
    /// interior to the support.
    fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Data log likelihood log f(y|θ) alone, without the prior (the harmonic
    /// mean estimator integrates exactly this over the posterior).
    fn log_likelihood(&self, theta: &[f64]) -> f64;

    /// Hessian sparsity: block-arrow from the unit/population layout.
    fn sparsity(&self) -> SparsityPattern {
        SparsityPattern::block_arrow(self.n_units(), self.unit_dim(), self.pop_dim())
    }

    /// Deterministic optimizer start: zeros, i.e. prior means for the
    /// population block and centered unit blocks.
    fn default_start(&self) -> ParameterVector {
        ParameterVector::zeros(self.dim())
    }

    fn pop_names(&self) -> Vec<String> {
        (0..self.pop_dim()).map(|i| format!("pop_{i}")).collect()
    }
}
