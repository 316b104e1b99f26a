//! Symmetric sparsity patterns, stored as the lower triangle in compressed
//! column form. The diagonal is always structurally present.

use std::io::{self, Write};

#[derive(Clone, Debug, PartialEq)]
pub struct SparsityPattern {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-column row lists (lower triangle, may be
    /// unsorted, diagonal added if missing).
    pub fn from_columns(dim: usize, columns: &[Vec<usize>]) -> Self {
        assert_eq!(columns.len(), dim, "one row list per column");
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (j, col) in columns.iter().enumerate() {
            let mut rows: Vec<usize> = col.clone();
            rows.push(j);
            rows.sort_unstable();
            rows.dedup();
            assert!(
                rows.iter().all(|&r| r >= j && r < dim),
                "column {j}: lower-triangle rows only"
            );
            row_idx.extend_from_slice(&rows);
            col_ptr.push(row_idx.len());
        }
        SparsityPattern { dim, col_ptr, row_idx }
    }

    /// The block-arrow family: dense k×k blocks for each of `n_units` units on
    /// the diagonal, a dense p×p population block in the corner, and dense k×p
    /// couplings between every unit and the population block.
    pub fn block_arrow(n_units: usize, unit_dim: usize, pop_dim: usize) -> Self {
        let dim = n_units * unit_dim + pop_dim;
        let pop_start = n_units * unit_dim;
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for i in 0..n_units {
            for t in 0..unit_dim {
                let j = i * unit_dim + t;
                row_idx.extend(j..(i + 1) * unit_dim);
                row_idx.extend(pop_start..dim);
                col_ptr.push(row_idx.len());
            }
        }
        for j in pop_start..dim {
            row_idx.extend(j..dim);
            col_ptr.push(row_idx.len());
        }
        SparsityPattern { dim, col_ptr, row_idx }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (lower-triangle) entry count.
    pub fn nnz_lower(&self) -> usize {
        self.row_idx.len()
    }

    /// Nonzero count of the full symmetric matrix.
    pub fn nnz_full(&self) -> usize {
        2 * self.nnz_lower() - self.dim
    }

    pub fn col(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Position of entry (i, j) in the stored value array, if structural.
    /// Arguments may be given in either order.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let col = self.col(c);
        col.binary_search(&r).ok().map(|k| self.col_ptr[c] + k)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.slot(i, j).is_some()
    }

    /// Compressed-column adjacency of the full symmetric pattern, diagonal
    /// included. Row indices are sorted within each column.
    pub fn full_adjacency(&self) -> (Vec<usize>, Vec<usize>) {
        let mut counts = vec![0usize; self.dim + 1];
        for j in 0..self.dim {
            for &i in self.col(j) {
                counts[j + 1] += 1;
                if i != j {
                    counts[i + 1] += 1;
                }
            }
        }
        for j in 0..self.dim {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut cursor = counts;
        let mut rows = vec![0usize; col_ptr[self.dim]];
        for j in 0..self.dim {
            for &i in self.col(j) {
                rows[cursor[j]] = i;
                cursor[j] += 1;
                if i != j {
                    rows[cursor[i]] = j;
                    cursor[i] += 1;
                }
            }
        }
        // columns come out sorted because the outer sweep visits (i, j) pairs
        // in column-major order of the lower triangle
        (col_ptr, rows)
    }

    /// MatrixMarket coordinate dump (pattern symmetric, 1-based).
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate pattern symmetric")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz_lower())?;
        for j in 0..self.dim {
            for &i in self.col(j) {
                writeln!(w, "{} {}", i + 1, j + 1)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_arrow_counts() {
        // 6 units, k=2, p=2: 14x14 with 76 nonzeros in the full matrix
        let p = SparsityPattern::block_arrow(6, 2, 2);
        assert_eq!(p.dim(), 14);
        assert_eq!(p.nnz_lower(), 6 * 3 + 6 * 2 * 2 + 3);
        assert_eq!(p.nnz_full(), 76);
    }

    #[test]
    fn block_arrow_lower_count_formula() {
        // N·k(k+1)/2 + N·k·p + p(p+1)/2
        for &(n, k, p) in &[(1usize, 1usize, 0usize), (10, 3, 9), (5, 2, 4)] {
            let pat = SparsityPattern::block_arrow(n, k, p);
            assert_eq!(pat.nnz_lower(), n * k * (k + 1) / 2 + n * k * p + p * (p + 1) / 2);
        }
    }

    #[test]
    fn single_entry_pattern() {
        let p = SparsityPattern::block_arrow(1, 1, 0);
        assert_eq!(p.dim(), 1);
        assert_eq!(p.nnz_lower(), 1);
        assert_eq!(p.col(0), &[0]);
    }

    #[test]
    fn slot_lookup_symmetric() {
        let p = SparsityPattern::block_arrow(2, 2, 1);
        assert!(p.contains(0, 1));
        assert!(p.contains(1, 0));
        assert!(!p.contains(0, 2));
        assert_eq!(p.slot(4, 0), p.slot(0, 4));
    }

    #[test]
    fn full_adjacency_is_symmetric_and_sorted() {
        let p = SparsityPattern::block_arrow(3, 2, 2);
        let (cp, rows) = p.full_adjacency();
        assert_eq!(cp[p.dim()], p.nnz_full());
        for j in 0..p.dim() {
            let col = &rows[cp[j]..cp[j + 1]];
            assert!(col.windows(2).all(|w| w[0] < w[1]), "sorted col {j}");
            for &i in col {
                let back = &rows[cp[i]..cp[i + 1]];
                assert!(back.binary_search(&j).is_ok());
            }
        }
    }

    #[test]
    fn matrix_market_header() {
        let p = SparsityPattern::block_arrow(1, 1, 1);
        let mut buf = Vec::new();
        p.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 3\n"));
    }
}
