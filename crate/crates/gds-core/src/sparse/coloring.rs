//! Graph coloring for structurally exact Hessian recovery from grouped
//! gradient differences.
//!
//! Columns adjacent in the symmetric pattern (i.e. coupled by a structural
//! nonzero) must get distinct colors. That alone already makes every entry of
//! a block-arrow Hessian recoverable, because each entry (i, j) can be read
//! from the perturbation of color(j) whenever column j is the only member of
//! its group with a nonzero in row i, and from color(i) otherwise. For the
//! block-arrow family the greedy count is k + p, independent of the number of
//! units.

use super::pattern::SparsityPattern;

#[derive(Clone, Debug, PartialEq)]
pub struct Coloring {
    n_colors: usize,
    color_of: Vec<usize>,
}

impl Coloring {
    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn color_of(&self) -> &[usize] {
        &self.color_of
    }

    /// Column indices grouped by color.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_colors];
        for (j, &c) in self.color_of.iter().enumerate() {
            groups[c].push(j);
        }
        groups
    }
}

/// Greedy sequential coloring of the column adjacency graph, columns visited
/// in natural order.
pub fn color_pattern(pattern: &SparsityPattern) -> Coloring {
    let dim = pattern.dim();
    let (adj_ptr, adj_rows) = pattern.full_adjacency();
    let mut color_of = vec![usize::MAX; dim];
    let mut banned = vec![usize::MAX; dim]; // banned[c] == j means color c is taken near j
    let mut n_colors = 0;
    for j in 0..dim {
        for &i in &adj_rows[adj_ptr[j]..adj_ptr[j + 1]] {
            if color_of[i] != usize::MAX {
                banned[color_of[i]] = j;
            }
        }
        let c = (0..).find(|&c| banned.get(c) != Some(&j)).unwrap();
        color_of[j] = c;
        n_colors = n_colors.max(c + 1);
    }
    Coloring { n_colors, color_of }
}

/// For each (row, color), how many columns of that color have a structural
/// nonzero in the row (the column itself counts for its own diagonal). An
/// entry is directly recoverable from a perturbation exactly when this count
/// is one.
pub fn cover_counts(pattern: &SparsityPattern, coloring: &Coloring) -> Vec<u32> {
    let dim = pattern.dim();
    let nc = coloring.n_colors();
    let (adj_ptr, adj_rows) = pattern.full_adjacency();
    let mut counts = vec![0u32; dim * nc];
    for j in 0..dim {
        let c = coloring.color_of()[j];
        for &i in &adj_rows[adj_ptr[j]..adj_ptr[j + 1]] {
            counts[i * nc + c] += 1;
        }
    }
    counts
}

/// A coloring is usable when adjacent columns have distinct colors and every
/// structural entry is recoverable from at least one of its two sides.
pub fn coloring_is_valid(pattern: &SparsityPattern, coloring: &Coloring) -> bool {
    let dim = pattern.dim();
    if coloring.color_of().len() != dim {
        return false;
    }
    let counts = cover_counts(pattern, coloring);
    let nc = coloring.n_colors();
    for j in 0..dim {
        for &i in pattern.col(j) {
            if i != j && coloring.color_of()[i] == coloring.color_of()[j] {
                return false;
            }
            let from_j = counts[i * nc + coloring.color_of()[j]] == 1;
            let from_i = counts[j * nc + coloring.color_of()[i]] == 1;
            if !(from_j || from_i) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_arrow_k2_p2_needs_four_colors() {
        for n in [6, 60, 600] {
            let p = SparsityPattern::block_arrow(n, 2, 2);
            let c = color_pattern(&p);
            assert_eq!(c.n_colors(), 4, "N={n}");
            assert!(coloring_is_valid(&p, &c));
        }
    }

    #[test]
    fn diagonal_pattern_one_color() {
        let p = SparsityPattern::block_arrow(5, 1, 0);
        let c = color_pattern(&p);
        assert_eq!(c.n_colors(), 1);
        assert!(coloring_is_valid(&p, &c));
    }

    #[test]
    fn color_count_independent_of_units() {
        let reference = color_pattern(&SparsityPattern::block_arrow(10, 3, 4)).n_colors();
        for n in [100, 1000] {
            let c = color_pattern(&SparsityPattern::block_arrow(n, 3, 4));
            assert_eq!(c.n_colors(), reference);
        }
        assert_eq!(reference, 7);
    }

    #[test]
    fn same_color_for_adjacent_columns_is_invalid() {
        let p = SparsityPattern::block_arrow(1, 2, 0);
        let bad = Coloring { n_colors: 1, color_of: vec![0, 0] };
        assert!(!coloring_is_valid(&p, &bad));
    }
}
