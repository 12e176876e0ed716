//! Sparse LDL' factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization over an elimination tree, with an AMD fill-reducing
//! ordering computed once per sparsity pattern. Pivots whose sign disagrees
//! with the expected inertia are replaced by a small signed regularization, so
//! the factorization never breaks down on the KKT systems of the interior-point
//! method; accuracy is recovered by iterative refinement in the caller.

use crate::error::SolverError;

const NONE: usize = usize::MAX;

/// Sparsity pattern, ordering and symbolic factorization of a KKT matrix.
#[derive(Debug, Clone)]
pub struct KktSolver {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `pinv[old] = new`
    pinv: Vec<usize>,
    /// Permuted upper-triangular CSC pattern.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    /// Position in `values` of each caller-provided triplet.
    entry_pos: Vec<usize>,
    /// Expected pivot sign of each permuted column (+1 or -1).
    sign: Vec<f64>,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
    work: Vec<f64>,
    regularized: usize,
}

impl KktSolver {
    /// `entries` lists `(row, col)` positions of the upper triangle (`row <=
    /// col`); duplicates are summed. Every diagonal position is added to the
    /// pattern even if missing. `signs[k]` is the expected sign of pivot `k`.
    pub fn new(n: usize, entries: &[(usize, usize)], signs: &[f64]) -> Result<Self, SolverError> {
        assert_eq!(signs.len(), n);
        // Original upper CSC pattern (sorted, deduplicated) for the ordering.
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..n {
            cols[j].push(j);
        }
        for &(i, j) in entries {
            debug_assert!(i <= j && j < n);
            cols[j].push(i);
        }
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
        }
        let perm = if n == 0 {
            Vec::new()
        } else {
            let mut ap = Vec::with_capacity(n + 1);
            let mut ai = Vec::new();
            ap.push(0usize);
            for c in &cols {
                ai.extend_from_slice(c);
                ap.push(ai.len());
            }
            let (p, _pinv, _info) = amd::order(n, &ap, &ai, &amd::Control::default())
                .map_err(|s| SolverError::Numerical(format!("AMD ordering failed: {s:?}")))?;
            p
        };
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }

        // Permuted pattern. Each position is keyed by (col, row) in new indices.
        let mut pcols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, c) in cols.iter().enumerate() {
            for &i in c {
                let (a, b) = (pinv[i], pinv[j]);
                let (r, cc) = if a <= b { (a, b) } else { (b, a) };
                pcols[cc].push(r);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in pcols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let find = |r: usize, c: usize| -> usize {
            let slice = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + slice.binary_search(&r).expect("pattern entry")
        };
        let entry_pos = entries
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (pinv[i], pinv[j]);
                if a <= b {
                    find(a, b)
                } else {
                    find(b, a)
                }
            })
            .collect();
        let sign = perm.iter().map(|&old| signs[old]).collect();

        let (etree, l_ptr) = symbolic(n, &col_ptr, &row_idx)?;
        let nnz_l = l_ptr[n];
        let nnz = row_idx.len();
        Ok(Self {
            n,
            perm,
            pinv,
            col_ptr,
            row_idx,
            values: vec![0.0; nnz],
            entry_pos,
            sign,
            etree,
            l_ptr,
            l_idx: vec![0; nnz_l],
            l_val: vec![0.0; nnz_l],
            d: vec![0.0; n],
            d_inv: vec![0.0; n],
            work: vec![0.0; n],
            regularized: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nonzeros(&self) -> usize {
        self.l_ptr[self.n]
    }

    /// Number of pivots replaced by regularization in the last factorization.
    pub fn regularized_pivots(&self) -> usize {
        self.regularized
    }

    /// Loads values for the triplets given to [`KktSolver::new`] (same order)
    /// plus diagonal values indexed by original position, then factors.
    pub fn factor(
        &mut self,
        entry_values: &[f64],
        diagonal: &[f64],
        eps: f64,
        delta: f64,
    ) -> Result<(), SolverError> {
        debug_assert_eq!(entry_values.len(), self.entry_pos.len());
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for (k, &pos) in self.entry_pos.iter().enumerate() {
            self.values[pos] += entry_values[k];
        }
        for (old, &dv) in diagonal.iter().enumerate() {
            let c = self.pinv[old];
            // the diagonal is always the last entry of an upper CSC column
            let pos = self.col_ptr[c + 1] - 1;
            debug_assert_eq!(self.row_idx[pos], c);
            self.values[pos] += dv;
        }
        self.numeric(eps, delta)
    }

    fn numeric(&mut self, eps: f64, delta: f64) -> Result<(), SolverError> {
        let n = self.n;
        let mut y_marker = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.l_ptr[..n].to_vec();
        let y = &mut self.work;
        y.iter_mut().for_each(|v| *v = 0.0);
        self.regularized = 0;

        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let bidx = self.row_idx[p];
                if bidx == k {
                    self.d[k] = self.values[p];
                    continue;
                }
                y[bidx] = self.values[p];
                if !y_marker[bidx] {
                    y_marker[bidx] = true;
                    elim[0] = bidx;
                    let mut n_e = 1;
                    let mut next = self.etree[bidx];
                    while next != NONE && next < k {
                        if y_marker[next] {
                            break;
                        }
                        y_marker[next] = true;
                        elim[n_e] = next;
                        n_e += 1;
                        next = self.etree[next];
                    }
                    while n_e > 0 {
                        n_e -= 1;
                        y_idx[nnz_y] = elim[n_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y[c];
                for q in self.l_ptr[c]..tmp {
                    y[self.l_idx[q]] -= self.l_val[q] * yc;
                }
                self.l_idx[tmp] = k;
                let lv = yc * self.d_inv[c];
                self.l_val[tmp] = lv;
                self.d[k] -= yc * lv;
                next_space[c] += 1;
                y[c] = 0.0;
                y_marker[c] = false;
            }
            if !self.d[k].is_finite() {
                return Err(SolverError::Numerical(format!("non-finite pivot at {k}")));
            }
            if self.d[k] * self.sign[k] <= eps {
                self.d[k] = self.sign[k] * delta;
                self.regularized += 1;
            }
            self.d_inv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place (original ordering).
    pub fn solve(&mut self, b: &mut [f64]) {
        let n = self.n;
        let x = &mut self.work;
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let xi = x[i];
            for q in self.l_ptr[i]..self.l_ptr[i + 1] {
                x[self.l_idx[q]] -= self.l_val[q] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.d_inv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for q in self.l_ptr[i]..self.l_ptr[i + 1] {
                xi -= self.l_val[q] * x[self.l_idx[q]];
            }
            x[i] = xi;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }
}

/// Elimination tree and column pointers of L for an upper CSC pattern.
fn symbolic(
    n: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
) -> Result<(Vec<usize>, Vec<usize>), SolverError> {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in col_ptr[j]..col_ptr[j + 1] {
            let mut i = row_idx[p];
            if i > j {
                return Err(SolverError::Numerical("pattern is not upper triangular".into()));
            }
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    let mut l_ptr = Vec::with_capacity(n + 1);
    l_ptr.push(0);
    let mut acc = 0;
    for &c in &lnz {
        acc += c;
        l_ptr.push(acc);
    }
    Ok((etree, l_ptr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [[4, 1, 1], [1, 3, 0], [1, 0, -2]]
        let dense = vec![
            vec![4.0, 1.0, 1.0],
            vec![1.0, 3.0, 0.0],
            vec![1.0, 0.0, -2.0],
        ];
        let entries = [(0, 1), (0, 2)];
        let mut kkt = KktSolver::new(3, &entries, &[1.0, 1.0, -1.0]).unwrap();
        kkt.factor(&[1.0, 1.0], &[4.0, 3.0, -2.0], 1e-14, 1e-9).unwrap();
        assert_eq!(kkt.regularized_pivots(), 0);
        let x_true = [0.5, -1.0, 2.0];
        let mut b = dense_mul(&dense, &x_true);
        kkt.solve(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn tridiagonal_with_duplicates_summed() {
        let n = 6;
        let mut dense = vec![vec![0.0; n]; n];
        let mut entries = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n - 1 {
            // split the off-diagonal into two duplicate triplets
            entries.push((i, i + 1));
            vals.push(-0.5);
            entries.push((i, i + 1));
            vals.push(-0.5);
            dense[i][i + 1] = -1.0;
            dense[i + 1][i] = -1.0;
        }
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + i as f64).collect();
        for i in 0..n {
            dense[i][i] = diag[i];
        }
        let mut kkt = KktSolver::new(n, &entries, &vec![1.0; n]).unwrap();
        kkt.factor(&vals, &diag, 1e-14, 1e-9).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = dense_mul(&dense, &x_true);
        kkt.solve(&mut b);
        for (a, e) in b.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_sign_pivot_is_regularized() {
        let mut kkt = KktSolver::new(2, &[], &[1.0, -1.0]).unwrap();
        kkt.factor(&[], &[0.0, 0.0], 1e-12, 1e-7).unwrap();
        assert_eq!(kkt.regularized_pivots(), 2);
        let mut b = [1e-7, -1e-7];
        kkt.solve(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }
}
