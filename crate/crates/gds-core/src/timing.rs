//! Wall-time scaling measurements for the six per-iteration operations, on
//! the binary-choice model (k = 3, T = 52) across a grid of unit counts.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::math::ls_slope;
use crate::mode::{find_mode, hessian_at_mode, ModeOptions};
use crate::model::{make_model_b, HierarchicalModel};
use crate::proposal::Proposal;
use crate::rng::{stream_rng, StreamPhase};
use crate::sampler::GdsError;
use crate::sparse::{cholesky, color_pattern, fd_hessian, SolveMode};

pub const OP_NAMES: [&str; 6] =
    ["log_density", "gradient", "hessian", "cholesky", "mvn_sample", "tri_solve"];

#[derive(Clone, Debug)]
pub struct OpTimings {
    pub n_units: usize,
    /// Mean seconds per evaluation, ordered as [`OP_NAMES`].
    pub seconds: [f64; 6],
}

/// Times each operation at the posterior mode of a simulated model with
/// `n_units` households. Mode finding itself is setup, not timed.
pub fn benchmark_model_b(ns: &[usize], reps: usize, seed: u64) -> Result<Vec<OpTimings>, GdsError> {
    assert!(reps >= 1);
    let beta_bar = [-10.0, 0.0, 10.0];
    let sigma = DMatrix::identity(3, 3) * 0.1;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let model = make_model_b(n, 52, 3, &beta_bar, &sigma, seed ^ n as u64);
        let mode = find_mode(&model, &model.default_start(), &ModeOptions::default())?;
        let hessian = hessian_at_mode(&model, &mode)?;
        let pattern = model.sparsity();
        let coloring = color_pattern(&pattern);
        let theta = mode.theta_star.as_slice().to_vec();
        let proposal = Proposal::build(&mode, &hessian, 1.1)?;
        let factor = &proposal.factor;
        let rhs: Vec<f64> = (0..model.dim()).map(|i| ((i % 17) as f64 - 8.0) * 0.1).collect();
        let mut rng = stream_rng(seed, StreamPhase::Draw, n as u64);

        let seconds = [
            time_op(reps, || {
                std::hint::black_box(model.log_density(&theta));
            }),
            time_op(reps, || {
                std::hint::black_box(model.gradient(&theta).unwrap());
            }),
            time_op(reps, || {
                let grad =
                    |t: &[f64]| model.gradient(t).ok().map(|g| g.iter().map(|v| -v).collect());
                std::hint::black_box(
                    fd_hessian(grad, &theta, &pattern, &coloring, 1e-5).unwrap(),
                );
            }),
            time_op(reps, || {
                std::hint::black_box(cholesky(&hessian).unwrap());
            }),
            time_op(reps, || {
                std::hint::black_box(proposal.sample(&mut rng));
            }),
            time_op(reps, || {
                std::hint::black_box(factor.solve(&rhs, SolveMode::Full));
            }),
        ];
        rows.push(OpTimings { n_units: n, seconds });
    }
    Ok(rows)
}

/// Fitted slope of log time against log N for each operation.
pub fn fit_slopes(rows: &[OpTimings]) -> [f64; 6] {
    let logn: Vec<f64> = rows.iter().map(|r| (r.n_units as f64).ln()).collect();
    let mut slopes = [0.0; 6];
    for (op, slope) in slopes.iter_mut().enumerate() {
        let logt: Vec<f64> = rows.iter().map(|r| r.seconds[op].ln()).collect();
        *slope = ls_slope(&logn, &logt);
    }
    slopes
}

/// Mean seconds per call over `reps` measurements, batching fast operations
/// so each measurement spans at least ~2 ms of wall time.
pub fn time_op<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    // pilot call: warm caches, estimate duration
    let pilot = Instant::now();
    f();
    let est = pilot.elapsed().as_secs_f64();
    let batch = if est > 0.0 { (2e-3 / est).ceil().max(1.0) as usize } else { 1000 };
    let mut total = 0.0;
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..batch {
            f();
        }
        total += start.elapsed().as_secs_f64() / batch as f64;
    }
    total / reps as f64
}

/// CSV with one row per N: `n,log_density,gradient,hessian,cholesky,mvn_sample,tri_solve`.
pub fn timings_csv(rows: &[OpTimings]) -> String {
    let mut out = format!("n,{}\n", OP_NAMES.join(","));
    for r in rows {
        out.push_str(&format!(
            "{},{}\n",
            r.n_units,
            r.seconds.map(|s| s.to_string()).join(",")
        ));
    }
    out
}

/// CSV with one row per operation: `op,slope`.
pub fn slopes_csv(slopes: &[f64; 6]) -> String {
    let mut out = String::from("op,slope\n");
    for (name, s) in OP_NAMES.iter().zip(slopes) {
        out.push_str(&format!("{name},{s}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_single_point() {
        let rows = benchmark_model_b(&[500], 1, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].seconds.iter().all(|&s| s > 0.0));
        let csv = timings_csv(&rows);
        assert!(csv.starts_with("n,log_density,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
