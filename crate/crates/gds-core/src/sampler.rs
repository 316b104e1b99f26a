//! The sampling pipeline: estimate the threshold distribution q̂_v from M
//! proposal draws (rescaling the proposal until it is valid), draw R
//! thresholds, then rejection-sample each posterior draw independently.
//!
//! All randomness flows through per-task streams keyed by (seed, phase,
//! index), so a run is bitwise reproducible for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::mode::{find_mode, hessian_at_mode, ModeError, ModeOptions, ModeResult};
use crate::model::HierarchicalModel;
use crate::params::ParameterVector;
use crate::proposal::{log_phi, Proposal};
use crate::rng::{qv_index, stream_rng, StreamPhase};
use crate::sparse::{SparseError, SparseSymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdsConfig {
    /// Proposal draws used to estimate q̂_v.
    pub m: usize,
    /// Posterior draws to collect.
    pub r: usize,
    /// Initial covariance multiplier s for the proposal.
    pub scale_s: f64,
    /// Rescale attempts (×1.5 each) before giving up on an invalid proposal.
    pub max_scale_attempts: usize,
    /// Proposal budget per posterior draw.
    pub max_proposals_per_draw: u64,
    pub seed: u64,
    /// Worker threads for the proposal and rejection phases; 0 uses the
    /// default pool.
    pub threads: usize,
}

impl Default for GdsConfig {
    fn default() -> Self {
        GdsConfig {
            m: 10_000,
            r: 500,
            scale_s: 1.05,
            max_scale_attempts: 12,
            max_proposals_per_draw: 10_000_000,
            seed: 0,
            threads: 0,
        }
    }
}

/// The empirical threshold distribution: sorted v₁ ≤ … ≤ v_M with strict-less
/// counts and the unnormalized segment weights ϖᵢ = count_i·(e^{−vᵢ} − e^{−vᵢ₊₁})
/// (v_{M+1} = ∞). Ties share a count; ϖ₁ is zero under strict-less counting.
#[derive(Clone, Debug, PartialEq)]
pub struct QvEstimate {
    v: Vec<f64>,
    cum_count: Vec<u64>,
    weights: Vec<f64>,
    cum_weights: Vec<f64>,
    total_weight: f64,
}

impl QvEstimate {
    /// Builds from raw threshold values v_m = −log Φ(θ_m) ≥ 0 (+∞ allowed for
    /// out-of-support proposals).
    pub fn from_values(mut v: Vec<f64>) -> Self {
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| !x.is_nan() && *x >= 0.0));
        v.sort_unstable_by(f64::total_cmp);
        let m = v.len();
        let mut cum_count = vec![0u64; m];
        let mut group_start = 0usize;
        for i in 0..m {
            if v[i] > v[group_start] {
                group_start = i;
            }
            cum_count[i] = group_start as u64;
        }
        let mut weights = vec![0.0; m];
        let mut cum_weights = vec![0.0; m];
        let mut total = 0.0;
        for i in 0..m {
            let hi = if i + 1 < m { (-v[i + 1]).exp() } else { 0.0 };
            let w = cum_count[i] as f64 * ((-v[i]).exp() - hi);
            weights[i] = w.max(0.0);
            total += weights[i];
            cum_weights[i] = total;
        }
        QvEstimate { v, cum_count, weights, cum_weights, total_weight: total }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn cum_count(&self) -> &[u64] {
        &self.cum_count
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Exact CDF of the threshold sampler at x (the normalized piecewise
    /// density q̂(v)·e^{−v}); the oracle for distributional tests.
    pub fn threshold_cdf(&self, x: f64) -> f64 {
        if self.total_weight == 0.0 {
            // degenerate grid: thresholds fall back to an exponential tail
            let base = self.largest_finite_v();
            return if x <= base { 0.0 } else { 1.0 - (base - x).exp() };
        }
        if x <= self.v[0] {
            return 0.0;
        }
        // segment j with v_j ≤ x (< v_{j+1})
        let j = self.v.partition_point(|&vi| vi <= x) - 1;
        let below = if j == 0 { 0.0 } else { self.cum_weights[j - 1] };
        let part = self.cum_count[j] as f64 * ((-self.v[j]).exp() - (-x).exp());
        ((below + part) / self.total_weight).min(1.0)
    }

    fn largest_finite_v(&self) -> f64 {
        self.v.iter().rev().copied().find(|x| x.is_finite()).unwrap_or(0.0)
    }
}

/// Signal that the proposal is not over-dispersed enough: some draw had
/// Φ > 1 beyond slack. Not a failure, a request to rescale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvalidProposal {
    pub worst_log_phi: f64,
    pub n_offending: usize,
}

#[derive(Debug, Error)]
pub enum GdsError {
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error("mode search did not converge within the iteration budget")]
    ModeNotConverged,
    #[error(transparent)]
    Factorization(#[from] SparseError),
    #[error("proposal still invalid after {attempts} rescale attempts (final s = {final_s}, worst log phi = {worst_log_phi})")]
    ScaleSearchFailed { attempts: usize, final_s: f64, worst_log_phi: f64 },
    #[error("proposal cap {cap} exceeded for threshold v* = {v_star}")]
    CapExceeded { v_star: f64, cap: u64 },
}

/// Draws M proposals, computes v_m = −log Φ(θ_m), and either returns the
/// empirical q̂_v or flags the proposal as invalid (some log Φ > 0 beyond
/// slack), reporting the worst offender.
pub fn estimate_qv(
    model: &dyn HierarchicalModel,
    mode: &ModeResult,
    proposal: &Proposal,
    m: usize,
    seed: u64,
    attempt: u32,
) -> Result<QvEstimate, InvalidProposal> {
    assert!(m >= 2);
    let log_phis: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, StreamPhase::QvProposal, qv_index(attempt, i));
            let theta = proposal.sample(&mut rng);
            log_phi(model, mode, proposal, &theta)
        })
        .collect();
    let offenders: Vec<f64> =
        log_phis.iter().copied().filter(|&lp| lp > 0.0 || lp.is_nan()).collect();
    if !offenders.is_empty() {
        let worst = offenders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(InvalidProposal { worst_log_phi: worst, n_offending: offenders.len() });
    }
    Ok(QvEstimate::from_values(log_phis.iter().map(|lp| -lp).collect()))
}

/// Rescale loop: starts at `config.scale_s`, multiplies s by 1.5 on each
/// invalid batch (fresh M draws per attempt), and returns the first valid
/// proposal/q̂_v pair.
pub fn auto_scale(
    model: &dyn HierarchicalModel,
    mode: &ModeResult,
    hessian: &SparseSymMatrix,
    config: &GdsConfig,
) -> Result<(Proposal, QvEstimate), GdsError> {
    let mut s = config.scale_s;
    let mut worst = f64::NAN;
    for attempt in 0..config.max_scale_attempts.max(1) {
        let proposal = Proposal::build(mode, hessian, s)?;
        match estimate_qv(model, mode, &proposal, config.m, config.seed, attempt as u32) {
            Ok(qv) => return Ok((proposal, qv)),
            Err(invalid) => {
                worst = invalid.worst_log_phi;
                s *= 1.5;
            }
        }
    }
    Err(GdsError::ScaleSearchFailed {
        attempts: config.max_scale_attempts.max(1),
        final_s: s / 1.5,
        worst_log_phi: worst,
    })
}

/// Draws one threshold v* from the piecewise density: pick segment j with
/// probability ∝ ϖ_j, then v* = v_j − log[1 − η(1 − e^{v_j − v_{j+1}})] with
/// η uniform. The last segment reduces to an exponential tail from v_M.
pub fn sample_threshold<R: Rng + ?Sized>(qv: &QvEstimate, rng: &mut R) -> f64 {
    let m = qv.v.len();
    if qv.total_weight == 0.0 {
        let eta: f64 = rng.random();
        return qv.largest_finite_v() - (1.0 - eta).ln();
    }
    let u: f64 = rng.random::<f64>() * qv.total_weight;
    let j = qv.cum_weights.partition_point(|&c| c < u).min(m - 1);
    let eta: f64 = rng.random();
    threshold_in_segment(qv, j, eta)
}

/// The truncated-exponential draw within segment j at uniform η; η = 0 gives
/// exactly v_j.
pub(crate) fn threshold_in_segment(qv: &QvEstimate, j: usize, eta: f64) -> f64 {
    let vj = qv.v[j];
    let gap = if j + 1 < qv.v.len() { vj - qv.v[j + 1] } else { f64::NEG_INFINITY };
    let w = -gap.exp_m1(); // 1 − e^{v_j − v_{j+1}} ∈ [0, 1]
    vj - (-eta * w).ln_1p()
}

/// Repeatedly samples θ ~ g until −log Φ(θ) < v*, sampling at least once.
/// Returns the accepted draw and the number of proposals consumed.
pub fn rejection_sample_one(
    model: &dyn HierarchicalModel,
    mode: &ModeResult,
    proposal: &Proposal,
    v_star: f64,
    rng: &mut impl Rng,
    cap: u64,
) -> Result<(ParameterVector, u64), GdsError> {
    assert!(v_star >= 0.0);
    let mut n = 0u64;
    loop {
        n += 1;
        let theta = proposal.sample(rng);
        let p = -log_phi(model, mode, proposal, &theta);
        if p < v_star {
            return Ok((theta, n));
        }
        if n >= cap {
            return Err(GdsError::CapExceeded { v_star, cap });
        }
    }
}

/// A completed sampling run plus everything the marginal-likelihood
/// estimator needs.
#[derive(Clone, Debug)]
pub struct GdsRun {
    pub samples: Vec<ParameterVector>,
    pub n_per_draw: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub qv: QvEstimate,
    pub log_c1: f64,
    pub log_c2: f64,
    pub scale_s_final: f64,
    pub total_proposals: u64,
}

impl GdsRun {
    /// γ̂ = R / Σ n_r, the estimated marginal acceptance probability.
    pub fn gamma_hat(&self) -> f64 {
        self.samples.len() as f64 / self.total_proposals as f64
    }

    pub fn mean_proposals_per_draw(&self) -> f64 {
        self.total_proposals as f64 / self.samples.len() as f64
    }

    pub fn median_proposals_per_draw(&self) -> f64 {
        let mut counts: Vec<f64> = self.n_per_draw.iter().map(|&n| n as f64).collect();
        counts.sort_unstable_by(f64::total_cmp);
        crate::math::quantile_sorted(&counts, 0.5)
    }
}

/// The full pipeline: find the mode, validate/rescale the proposal while
/// estimating q̂_v, draw all R thresholds up front from a dedicated stream,
/// then collect the R draws in parallel. Output is bitwise identical for any
/// `threads` setting.
pub fn run(model: &dyn HierarchicalModel, config: &GdsConfig) -> Result<GdsRun, GdsError> {
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .expect("thread pool");
        pool.install(|| run_inner(model, config))
    } else {
        run_inner(model, config)
    }
}

fn run_inner(model: &dyn HierarchicalModel, config: &GdsConfig) -> Result<GdsRun, GdsError> {
    assert!(config.m >= 2 && config.r >= 1 && config.scale_s > 0.0);
    let mode = find_mode(model, &model.default_start(), &ModeOptions::default())?;
    if !mode.converged {
        return Err(GdsError::ModeNotConverged);
    }
    let hessian = hessian_at_mode(model, &mode)?;
    let (proposal, qv) = auto_scale(model, &mode, &hessian, config)?;

    let mut threshold_rng = stream_rng(config.seed, StreamPhase::Thresholds, 0);
    let thresholds: Vec<f64> =
        (0..config.r).map(|_| sample_threshold(&qv, &mut threshold_rng)).collect();

    let draws: Vec<(ParameterVector, u64)> = thresholds
        .par_iter()
        .enumerate()
        .map(|(r, &v_star)| {
            let mut rng = stream_rng(config.seed, StreamPhase::Draw, r as u64);
            rejection_sample_one(
                model,
                &mode,
                &proposal,
                v_star,
                &mut rng,
                config.max_proposals_per_draw,
            )
        })
        .collect::<Result<_, GdsError>>()?;

    let mut samples = Vec::with_capacity(config.r);
    let mut n_per_draw = Vec::with_capacity(config.r);
    let mut total = 0u64;
    for (theta, n) in draws {
        total += n;
        samples.push(theta);
        n_per_draw.push(n);
    }
    Ok(GdsRun {
        samples,
        n_per_draw,
        thresholds,
        qv,
        log_c1: mode.log_c1,
        log_c2: proposal.log_c2,
        scale_s_final: proposal.scale_s,
        total_proposals: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::find_mode;
    use crate::model::MvnModel;

    fn gaussian_setup(dim: usize) -> (MvnModel, ModeResult, SparseSymMatrix) {
        let model = MvnModel::standard(dim);
        let mode =
            find_mode(&model, &ParameterVector::zeros(dim), &ModeOptions::default()).unwrap();
        let h = hessian_at_mode(&model, &mode).unwrap();
        (model, mode, h)
    }

    #[test]
    fn qv_strict_less_counts_handle_ties() {
        let qv = QvEstimate::from_values(vec![0.5, 0.2, 0.5, 0.9, 0.2]);
        assert_eq!(qv.v(), &[0.2, 0.2, 0.5, 0.5, 0.9]);
        assert_eq!(qv.cum_count(), &[0, 0, 2, 2, 4]);
        assert!(qv.weights().iter().all(|&w| w >= 0.0));
        assert_eq!(qv.weights()[0], 0.0);
        assert!(qv.total_weight() > 0.0);
    }

    #[test]
    fn qv_handles_infinite_values() {
        let qv = QvEstimate::from_values(vec![0.1, f64::INFINITY, 0.4]);
        assert_eq!(qv.len(), 3);
        assert!(qv.total_weight().is_finite());
        // the infinite segment carries no weight
        assert_eq!(qv.weights()[2], 0.0);
    }

    #[test]
    fn underdispersed_gaussian_flags_invalid() {
        let (model, mode, h) = gaussian_setup(1);
        let proposal = Proposal::build(&mode, &h, 0.5).unwrap();
        let res = estimate_qv(&model, &mode, &proposal, 2000, 7, 0);
        let invalid = res.expect_err("s < 1 must be flagged");
        assert!(invalid.worst_log_phi > 0.0);
        assert!(invalid.n_offending > 0);
    }

    #[test]
    fn overdispersed_gaussian_is_valid() {
        let (model, mode, h) = gaussian_setup(1);
        let proposal = Proposal::build(&mode, &h, 2.0).unwrap();
        let qv = estimate_qv(&model, &mode, &proposal, 10_000, 7, 0).unwrap();
        assert!(qv.v().iter().all(|&v| v >= 0.0));
        assert!(qv.total_weight() > 0.0);
    }

    #[test]
    fn auto_scale_reaches_validity_from_half() {
        let (model, mode, h) = gaussian_setup(1);
        let config = GdsConfig { m: 2000, scale_s: 0.5, seed: 3, ..GdsConfig::default() };
        let (proposal, _) = auto_scale(&model, &mode, &h, &config).unwrap();
        assert!(proposal.scale_s >= 1.0, "final s = {}", proposal.scale_s);
    }

    #[test]
    fn auto_scale_passes_through_valid_initial_scale() {
        let (model, mode, h) = gaussian_setup(1);
        let config = GdsConfig { m: 2000, scale_s: 2.0, seed: 3, ..GdsConfig::default() };
        let (proposal, _) = auto_scale(&model, &mode, &h, &config).unwrap();
        assert_eq!(proposal.scale_s, 2.0);
    }

    #[test]
    fn threshold_segment_endpoints() {
        let qv = QvEstimate::from_values(vec![0.3, 0.7, 1.5]);
        // η = 0 → exactly v_j
        assert_eq!(threshold_in_segment(&qv, 1, 0.0), 0.7);
        // tail segment: v* = v_M − log(1−η)
        let got = threshold_in_segment(&qv, 2, 0.5);
        assert!((got - (1.5 + 2f64.ln())).abs() < 1e-12);
        // interior segment stays inside its bounds
        let mid = threshold_in_segment(&qv, 0, 0.999);
        assert!(mid > 0.3 && mid < 0.7);
    }

    #[test]
    fn infinite_threshold_accepts_first_proposal() {
        let (model, mode, h) = gaussian_setup(2);
        let proposal = Proposal::build(&mode, &h, 1.5).unwrap();
        let mut rng = stream_rng(1, StreamPhase::Draw, 0);
        let (theta, n) =
            rejection_sample_one(&model, &mode, &proposal, f64::INFINITY, &mut rng, 100).unwrap();
        assert_eq!(n, 1);
        assert_eq!(theta.len(), 2);
    }

    #[test]
    fn zero_threshold_hits_cap() {
        let (model, mode, h) = gaussian_setup(1);
        let proposal = Proposal::build(&mode, &h, 1.5).unwrap();
        let mut rng = stream_rng(1, StreamPhase::Draw, 0);
        match rejection_sample_one(&model, &mode, &proposal, 0.0, &mut rng, 50) {
            Err(GdsError::CapExceeded { cap: 50, .. }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn tiny_end_to_end_run() {
        let model = MvnModel::standard(1);
        let config = GdsConfig { m: 2, r: 1, scale_s: 2.0, seed: 5, ..GdsConfig::default() };
        let run = run(&model, &config).unwrap();
        assert_eq!(run.samples.len(), 1);
        assert_eq!(run.total_proposals, run.n_per_draw.iter().sum::<u64>());
        // acceptance inequality holds post hoc
        let mode =
            find_mode(&model, &ParameterVector::zeros(1), &ModeOptions::default()).unwrap();
        let h = hessian_at_mode(&model, &mode).unwrap();
        let proposal = Proposal::build(&mode, &h, run.scale_s_final).unwrap();
        let p = -log_phi(&model, &mode, &proposal, &run.samples[0]);
        assert!(p < run.thresholds[0]);
    }
}
