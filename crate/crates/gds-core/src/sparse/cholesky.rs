//! Sparse Cholesky factorization A = L·Lᵀ for symmetric positive definite
//! input, plus the triangular solves built on the factor.
//!
//! The factorization is up-looking: row k of L is the solution of a sparse
//! triangular system whose nonzero pattern is read off the elimination tree.
//! No fill-reducing ordering is applied; parameter vectors already arrive in
//! the unit-blocks-first, population-block-last order, which confines all
//! fill-in of a block-arrow matrix to the trailing border columns, so the
//! factor nonzeros (and the work) stay linear in the number of units.

use std::io::{self, Write};

use thiserror::Error;

use super::matrix::SparseSymMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
}

/// How to apply a factor in [`CholFactor::solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// L x = b, in factor (permuted) coordinates.
    Forward,
    /// Lᵀ x = b, in factor (permuted) coordinates.
    Backward,
    /// (P A Pᵀ)⁻¹ applied to b in original coordinates.
    Full,
}

/// Lower-triangular Cholesky factor with its row permutation. Each column
/// stores the diagonal entry first, then subdiagonal rows in increasing order.
#[derive(Clone, Debug)]
pub struct CholFactor {
    dim: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    log_det_half: f64,
}

/// Factors A (block ordering, identity permutation).
pub fn cholesky(a: &SparseSymMatrix) -> Result<CholFactor, SparseError> {
    let n = a.dim();
    let (up_ptr, up_rows, up_vals) = upper_csc(a);
    let parent = etree(n, &up_ptr, &up_rows);

    // symbolic pass: entries per column of L
    let mut counts = vec![1usize; n]; // diagonals
    {
        let mut marks = vec![NONE; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &up_ptr, &up_rows, &parent, &mut marks, &mut stack);
            for &j in &stack[top..n] {
                counts[j] += 1;
            }
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + counts[j];
    }
    let nnz = col_ptr[n];
    let mut row_idx = vec![0usize; nnz];
    let mut values = vec![0.0f64; nnz];

    // numeric pass
    let mut cursor: Vec<usize> = col_ptr[..n].to_vec();
    let mut marks = vec![NONE; n];
    let mut stack = vec![0usize; n];
    let mut x = vec![0.0f64; n];
    let mut log_det_half = 0.0;
    for k in 0..n {
        let top = ereach(k, &up_ptr, &up_rows, &parent, &mut marks, &mut stack);
        x[k] = 0.0;
        for p in up_ptr[k]..up_ptr[k + 1] {
            x[up_rows[p]] = up_vals[p];
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &i in &stack[top..n] {
            // L(k,i) = x(i) / L(i,i), then sparse update of x by column i
            let lki = x[i] / values[col_ptr[i]];
            x[i] = 0.0;
            for p in col_ptr[i] + 1..cursor[i] {
                x[row_idx[p]] -= values[p] * lki;
            }
            d -= lki * lki;
            row_idx[cursor[i]] = k;
            values[cursor[i]] = lki;
            cursor[i] += 1;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(SparseError::NotPositiveDefinite { pivot: k });
        }
        let lkk = d.sqrt();
        row_idx[cursor[k]] = k;
        values[cursor[k]] = lkk;
        cursor[k] += 1;
        log_det_half += lkk.ln();
    }

    Ok(CholFactor {
        dim: n,
        perm: (0..n).collect(),
        col_ptr,
        row_idx,
        values,
        log_det_half,
    })
}

/// Triangular solve against the factor; see [`SolveMode`].
pub fn solve_lt(factor: &CholFactor, rhs: &[f64], mode: SolveMode) -> Vec<f64> {
    factor.solve(rhs, mode)
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Σ log L_ii, i.e. half the log determinant of the factored matrix.
    pub fn log_det_half(&self) -> f64 {
        self.log_det_half
    }

    pub fn solve(&self, rhs: &[f64], mode: SolveMode) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim);
        match mode {
            SolveMode::Forward => {
                let mut x = rhs.to_vec();
                self.solve_forward(&mut x);
                x
            }
            SolveMode::Backward => {
                let mut x = rhs.to_vec();
                self.solve_backward(&mut x);
                x
            }
            SolveMode::Full => {
                let mut x = self.permute(rhs);
                self.solve_forward(&mut x);
                self.solve_backward(&mut x);
                self.unpermute(&x)
            }
        }
    }

    fn solve_forward(&self, x: &mut [f64]) {
        for j in 0..self.dim {
            let pj = self.col_ptr[j];
            x[j] /= self.values[pj];
            let xj = x[j];
            for p in pj + 1..self.col_ptr[j + 1] {
                x[self.row_idx[p]] -= self.values[p] * xj;
            }
        }
    }

    fn solve_backward(&self, x: &mut [f64]) {
        for j in (0..self.dim).rev() {
            let pj = self.col_ptr[j];
            let mut acc = x[j];
            for p in pj + 1..self.col_ptr[j + 1] {
                acc -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = acc / self.values[pj];
        }
    }

    /// u = Lᵀ·v in factor coordinates (used for MVN quadratic forms).
    pub fn mul_lt(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut u = vec![0.0; self.dim];
        for j in 0..self.dim {
            let mut acc = 0.0;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[p] * v[self.row_idx[p]];
            }
            u[j] = acc;
        }
        u
    }

    /// y[i] = x[perm[i]].
    pub fn permute(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&p| x[p]).collect()
    }

    /// Inverse of [`CholFactor::permute`].
    pub fn unpermute(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// MatrixMarket coordinate dump of L (real general, 1-based).
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for j in 0..self.dim {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                writeln!(w, "{} {} {:e}", self.row_idx[p] + 1, j + 1, self.values[p])?;
            }
        }
        Ok(())
    }
}

/// Upper-triangle CSC (column k holds rows i ≤ k) from the stored lower
/// triangle; the transpose puts each column's rows in sorted order.
fn upper_csc(a: &SparseSymMatrix) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.dim();
    let mut ptr = vec![0usize; n + 1];
    for j in 0..n {
        for p in a.col_ptr()[j]..a.col_ptr()[j + 1] {
            ptr[a.row_idx()[p] + 1] += 1;
        }
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let mut cursor = ptr.clone();
    let mut rows = vec![0usize; ptr[n]];
    let mut vals = vec![0.0f64; ptr[n]];
    for j in 0..n {
        for p in a.col_ptr()[j]..a.col_ptr()[j + 1] {
            let i = a.row_idx()[p];
            rows[cursor[i]] = j;
            vals[cursor[i]] = a.values()[p];
            cursor[i] += 1;
        }
    }
    (ptr, rows, vals)
}

/// Elimination tree of the factored matrix, from the upper-triangle pattern.
fn etree(n: usize, up_ptr: &[usize], up_rows: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in up_ptr[k]..up_ptr[k + 1] {
            let mut i = up_rows[p];
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row k of L: walks each A(i,k) up the elimination tree,
/// returning stack positions [top, n) in topological order (descendants
/// first), suitable for the up-looking triangular solve.
fn ereach(
    k: usize,
    up_ptr: &[usize],
    up_rows: &[usize],
    parent: &[usize],
    marks: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = marks.len();
    let mut top = n;
    marks[k] = k;
    for p in up_ptr[k]..up_ptr[k + 1] {
        let mut i = up_rows[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while marks[i] != k {
            stack[len] = i;
            len += 1;
            marks[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}
