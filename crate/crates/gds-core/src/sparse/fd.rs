//! Sparse Hessian estimation by forward differences of the gradient, with all
//! coordinates of one color perturbed simultaneously. Costs exactly
//! n_colors + 1 gradient evaluations regardless of dimension.

use rayon::prelude::*;
use thiserror::Error;

use super::coloring::Coloring;
use super::matrix::SparseSymMatrix;
use super::pattern::SparsityPattern;

#[derive(Debug, Error, PartialEq)]
pub enum FdError {
    #[error("gradient not finite at {}", match color { Some(c) => format!("perturbation of color {c}"), None => "the base point".to_string() })]
    NonFiniteGradient { color: Option<usize> },
}

/// Estimates the Hessian of the scalar function whose gradient is
/// `gradient_fn`, scattering difference quotients into `pattern`. Entries
/// observable from both sides (i,j) and (j,i) are averaged, which also makes
/// the result exactly symmetric. `gradient_fn` returns None when the point is
/// out of support; it may be called concurrently.
///
/// Per-coordinate steps are `step · max(1, |θ_j|)`.
pub fn fd_hessian<F>(
    gradient_fn: F,
    theta: &[f64],
    pattern: &SparsityPattern,
    coloring: &Coloring,
    step: f64,
) -> Result<SparseSymMatrix, FdError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    assert!(step > 0.0);
    assert_eq!(theta.len(), pattern.dim());
    assert_eq!(coloring.color_of().len(), pattern.dim());
    let dim = pattern.dim();
    let nc = coloring.n_colors();

    let base = eval(&gradient_fn, theta, None)?;
    let groups = coloring.groups();

    let diffs: Vec<Vec<f64>> = groups
        .par_iter()
        .enumerate()
        .map(|(c, group)| {
            let mut point = theta.to_vec();
            for &j in group {
                point[j] += step * theta[j].abs().max(1.0);
            }
            let g = eval(&gradient_fn, &point, Some(c))?;
            Ok(g.iter().zip(&base).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_, FdError>>()?;

    // cover[i*nc + c]: columns of color c structurally hitting row i; an entry
    // is attributed only where that count is one
    let (adj_ptr, adj_rows) = pattern.full_adjacency();
    let mut cover = vec![0u32; dim * nc];
    for j in 0..dim {
        let c = coloring.color_of()[j];
        for &i in &adj_rows[adj_ptr[j]..adj_ptr[j + 1]] {
            cover[i * nc + c] += 1;
        }
    }

    let mut sums = vec![0.0f64; pattern.nnz_lower()];
    let mut counts = vec![0u8; pattern.nnz_lower()];
    for (c, group) in groups.iter().enumerate() {
        let diff = &diffs[c];
        for &j in group {
            let delta = step * theta[j].abs().max(1.0);
            for &i in &adj_rows[adj_ptr[j]..adj_ptr[j + 1]] {
                if cover[i * nc + c] == 1 {
                    let slot = pattern.slot(i, j).expect("adjacency within pattern");
                    sums[slot] += diff[i] / delta;
                    counts[slot] += 1;
                }
            }
        }
    }

    let mut out = SparseSymMatrix::zeros_from_pattern(pattern);
    for (slot, v) in out.values_mut().iter_mut().enumerate() {
        assert!(counts[slot] > 0, "coloring cannot recover entry at slot {slot}");
        *v = sums[slot] / counts[slot] as f64;
    }
    Ok(out)
}

fn eval<F>(f: &F, point: &[f64], color: Option<usize>) -> Result<Vec<f64>, FdError>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    match f(point) {
        Some(g) if g.iter().all(|v| v.is_finite()) => Ok(g),
        _ => Err(FdError::NonFiniteGradient { color }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::coloring::color_pattern;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Quadratic ½θ'Aθ over a 2-unit block arrow; gradient Aθ, Hessian A.
    fn quad_setup() -> (SparsityPattern, SparseSymMatrix) {
        let pattern = SparsityPattern::block_arrow(2, 2, 1);
        let mut a = SparseSymMatrix::zeros_from_pattern(&pattern);
        for (slot, v) in a.values_mut().iter_mut().enumerate() {
            *v = 0.1 * slot as f64 + 0.5;
        }
        // bump diagonal so the matrix is unambiguous, PD not required here
        for j in 0..pattern.dim() {
            let s = pattern.slot(j, j).unwrap();
            a.values_mut()[s] += 4.0;
        }
        (pattern, a)
    }

    #[test]
    fn recovers_quadratic_exactly() {
        let (pattern, a) = quad_setup();
        let coloring = color_pattern(&pattern);
        let theta: Vec<f64> = (0..pattern.dim()).map(|i| 0.3 * i as f64 - 0.7).collect();
        let grad = |t: &[f64]| {
            let mut y = vec![0.0; t.len()];
            a.mul_vec(t, &mut y);
            Some(y)
        };
        let h = fd_hessian(grad, &theta, &pattern, &coloring, 1e-5).unwrap();
        for (got, want) in h.values().iter().zip(a.values()) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn gradient_evaluation_count_is_colors_plus_one() {
        let (pattern, a) = quad_setup();
        let coloring = color_pattern(&pattern);
        let theta = vec![0.0; pattern.dim()];
        let calls = AtomicUsize::new(0);
        let grad = |t: &[f64]| {
            calls.fetch_add(1, Ordering::SeqCst);
            let mut y = vec![0.0; t.len()];
            a.mul_vec(t, &mut y);
            Some(y)
        };
        fd_hessian(grad, &theta, &pattern, &coloring, 1e-5).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), coloring.n_colors() + 1);
    }

    #[test]
    fn non_finite_gradient_reports_color() {
        let (pattern, _) = quad_setup();
        let coloring = color_pattern(&pattern);
        let theta = vec![0.0; pattern.dim()];
        // fails whenever coordinate 1 (color 1 under natural order) is perturbed
        let grad = |t: &[f64]| {
            if t[1] > 0.0 {
                None
            } else {
                Some(vec![0.0; t.len()])
            }
        };
        let err = fd_hessian(grad, &theta, &pattern, &coloring, 1e-5).unwrap_err();
        assert_eq!(err, FdError::NonFiniteGradient { color: Some(1) });
    }
}
