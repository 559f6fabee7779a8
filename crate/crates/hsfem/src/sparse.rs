//! Symmetric sparse operators over mesh nodes in compressed row form.
//!
//! All operators assembled on the same mesh share one [`CsrPattern`], so
//! linear combinations (the time-stepping system matrix) are entrywise
//! vector operations and matrix-vector products are allocation-free.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Sparsity pattern: row pointers plus column indices sorted ascending per row.
#[derive(Debug, PartialEq, Eq)]
pub struct CsrPattern {
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) col_idx: Vec<u32>,
}

impl CsrPattern {
    /// Build from per-row neighbour lists (need not be sorted or deduplicated).
    pub fn from_adjacency(mut rows: Vec<Vec<u32>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0usize);
        for cols in rows.iter_mut() {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        CsrPattern { row_ptr, col_idx }
    }

    pub fn num_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Index into the value array for entry (row, col), if present.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .binary_search(&(col as u32))
            .ok()
            .map(|p| lo + p)
    }
}

/// Symmetric sparse matrix tied to a mesh's node set.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let n = pattern.nnz();
        SparseOperator {
            pattern,
            values: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.num_rows()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry (row, col); zero when outside the pattern.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern
            .slot(row, col)
            .map_or(0.0, |s| self.values[s])
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for row in 0..p.num_rows() {
            let mut acc = 0.0;
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                acc += self.values[idx] * x[p.col_idx[idx] as usize];
            }
            y[row] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// Quadratic form x·(A x).
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let p = &*self.pattern;
        let mut acc = 0.0;
        for row in 0..p.num_rows() {
            let mut rowdot = 0.0;
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                rowdot += self.values[idx] * x[p.col_idx[idx] as usize];
            }
            acc += x[row] * rowdot;
        }
        acc
    }

    /// self + s * other, requiring a shared pattern.
    pub fn add_scaled(&self, scale: f64, other: &SparseOperator) -> Result<SparseOperator> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && *self.pattern != *other.pattern {
            return Err(Error::InvalidArgument(
                "operators have different sparsity patterns".into(),
            ));
        }
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v += scale * o;
        }
        Ok(out)
    }

    /// Add d[i] to each diagonal entry.
    pub fn add_diagonal(&mut self, d: &[f64]) -> Result<()> {
        if d.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "diagonal length {} does not match operator dimension {}",
                d.len(),
                self.dim()
            )));
        }
        for (row, di) in d.iter().enumerate() {
            let slot = self.pattern.slot(row, row).ok_or_else(|| {
                Error::InvalidArgument(format!("pattern is missing diagonal entry {row}"))
            })?;
            self.values[slot] += di;
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let p = &*self.pattern;
        (0..p.num_rows())
            .map(|row| self.values[p.row_ptr[row]..p.row_ptr[row + 1]].iter().sum())
            .collect()
    }

    /// Largest |A[i,j] - A[j,i]| relative to the largest entry magnitude.
    pub fn asymmetry(&self) -> f64 {
        let p = &*self.pattern;
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for row in 0..p.num_rows() {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                let col = p.col_idx[idx] as usize;
                if col > row {
                    worst = worst.max((self.values[idx] - self.get(col, row)).abs());
                }
            }
        }
        worst / scale
    }

    /// Per-row diagonal dominance margin: A[i,i] - sum_{j!=i} |A[i,j]|.
    pub fn dominance_margins(&self) -> Vec<f64> {
        let p = &*self.pattern;
        (0..p.num_rows())
            .map(|row| {
                let mut diag = 0.0;
                let mut off = 0.0;
                for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                    let v = self.values[idx];
                    if p.col_idx[idx] as usize == row {
                        diag = v;
                    } else {
                        off += v.abs();
                    }
                }
                diag - off
            })
            .collect()
    }

    /// Visit every stored entry as (row, col, value).
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        let p = &*self.pattern;
        for row in 0..p.num_rows() {
            for idx in p.row_ptr[row]..p.row_ptr[row + 1] {
                f(row, p.col_idx[idx] as usize, self.values[idx]);
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseOperator {
        // [[2, -1], [-1, 2]]
        let pattern = Arc::new(CsrPattern::from_adjacency(vec![vec![0, 1], vec![0, 1]]));
        let mut a = SparseOperator::zeros(pattern);
        let vals = [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)];
        for (r, c, v) in vals {
            let s = a.pattern.slot(r, c).unwrap();
            a.values_mut()[s] = v;
        }
        a
    }

    #[test]
    fn matvec_and_quad_form() {
        let a = small();
        assert_eq!(a.apply(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(a.quad_form(&[1.0, 2.0]), 2.0 - 2.0 - 2.0 + 8.0);
    }

    #[test]
    fn add_scaled_and_diag() {
        let a = small();
        let mut s = a.add_scaled(2.0, &a).unwrap();
        assert_eq!(s.get(0, 0), 6.0);
        s.add_diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(s.get(1, 1), 7.0);
        assert_eq!(s.get(0, 1), -3.0);
    }

    #[test]
    fn dominance_and_symmetry() {
        let a = small();
        assert_eq!(a.dominance_margins(), vec![1.0, 1.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }
}
