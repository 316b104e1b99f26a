//! Symmetric sparse matrices in compressed-column form, lower triangle only.

use std::io::{self, Write};

use nalgebra::DMatrix;

use super::pattern::SparsityPattern;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Zero matrix over a given pattern.
    pub fn zeros_from_pattern(pattern: &SparsityPattern) -> Self {
        SparseSymMatrix {
            dim: pattern.dim(),
            col_ptr: pattern.col_ptr().to_vec(),
            row_idx: pattern.row_idx().to_vec(),
            values: vec![0.0; pattern.nnz_lower()],
        }
    }

    /// Builds from a dense symmetric matrix, keeping entries of `pattern`.
    pub fn from_dense(dense: &DMatrix<f64>, pattern: &SparsityPattern) -> Self {
        let mut m = Self::zeros_from_pattern(pattern);
        for j in 0..m.dim {
            for k in m.col_ptr[j]..m.col_ptr[j + 1] {
                m.values[k] = dense[(m.row_idx[k], j)];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let col = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        match col.binary_search(&r) {
            Ok(k) => self.values[self.col_ptr[c] + k],
            Err(_) => 0.0,
        }
    }

    /// Same structure with all values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// y = A·x using the symmetric structure.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.fill(0.0);
        for j in 0..self.dim {
            let xj = x[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                let a = self.values[k];
                y[i] += a * xj;
                if i != j {
                    y[j] += a * x[i];
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                d[(i, j)] = self.values[k];
                d[(j, i)] = self.values[k];
            }
        }
        d
    }

    /// MatrixMarket coordinate dump (real symmetric, 1-based).
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz_lower())?;
        for j in 0..self.dim {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                writeln!(w, "{} {} {:e}", self.row_idx[k] + 1, j + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arrow_matrix() -> SparseSymMatrix {
        // [[2, 0, 1], [0, 3, 1], [1, 1, 4]]
        let pattern = SparsityPattern::block_arrow(2, 1, 1);
        let mut m = SparseSymMatrix::zeros_from_pattern(&pattern);
        let vals = [(0, 0, 2.0), (1, 1, 3.0), (2, 0, 1.0), (2, 1, 1.0), (2, 2, 4.0)];
        for (i, j, v) in vals {
            let pat = SparsityPattern::block_arrow(2, 1, 1);
            let k = pat.slot(i, j).unwrap();
            m.values_mut()[k] = v;
        }
        m
    }

    #[test]
    fn symmetric_matvec() {
        let m = arrow_matrix();
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        m.mul_vec(&x, &mut y);
        assert_eq!(y, [2.0 + 3.0, 6.0 + 3.0, 1.0 + 2.0 + 12.0]);
    }

    #[test]
    fn dense_roundtrip() {
        let m = arrow_matrix();
        let d = m.to_dense();
        let pattern = SparsityPattern::block_arrow(2, 1, 1);
        let back = SparseSymMatrix::from_dense(&d, &pattern);
        assert_eq!(m, back);
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
    }
}
