//! Sparse symmetric matrices and an up-looking sparse Cholesky factorization.
//!
//! Symmetric matrices are stored as the lower triangle (diagonal included) in compressed
//! sparse column form with sorted row indices. The factorization separates a symbolic phase
//! (fill-reducing ordering, elimination tree, column pointers of `L`) that is reused for every
//! numeric factorization of a matrix with the same pattern.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymCsc {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymCsc {
    /// Assemble from `(row, col, value)` entries; an entry above the diagonal is stored at its
    /// mirror position, duplicates are summed and every diagonal slot is present.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(triplets.len() + n);
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Spec(format!("entry ({r}, {c}) outside a {n}x{n} matrix")));
            }
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            entries.push((c, r, v));
        }
        entries.extend((0..n).map(|i| (i, i, 0.0)));
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in entries {
            if last == Some((c, r)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((c, r));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(SymCsc {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize, value: f64) -> Self {
        SymCsc {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![value; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the lower triangle.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
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

    /// Storage slot of entry `(i, j)` (either triangle), if present in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        self.row_idx[lo..hi].binary_search(&r).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Lower-triangle entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let v = self.values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let t = self.values[k] * x[r] * x[c];
                s += if r == c { t } else { 2.0 * t };
            }
        }
        s
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// Adjacency lists of the off-diagonal pattern.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (r, c, _) in self.triplets() {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        adj
    }
}

/// Approximate minimum-degree ordering (AMD). Nodes listed in `tail` are left out of the
/// graph being ordered and placed last, in the given order.
pub fn minimum_degree_order(a: &SymCsc, tail: &[usize]) -> Vec<usize> {
    let n = a.dim();
    let mut in_tail = vec![false; n];
    for &t in tail {
        in_tail[t] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !in_tail[i]).collect();
    let mut local = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        local[i] = k;
    }
    let mut adj = vec![Vec::new(); free.len()];
    for (k, nb) in a.adjacency().into_iter().enumerate() {
        if in_tail[k] {
            continue;
        }
        // The diagonal is ignored by AMD but keeps nnz >= n, which its debug checks assume.
        adj[local[k]] = nb.into_iter().filter(|&j| !in_tail[j]).map(|j| local[j]).collect();
        adj[local[k]].push(local[k]);
        adj[local[k]].sort_unstable();
        adj[local[k]].dedup();
    }
    let mut col_ptr = Vec::with_capacity(free.len() + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for nb in &adj {
        row_idx.extend(nb.iter().copied());
        col_ptr.push(row_idx.len());
    }
    let mut order: Vec<usize> = if free.is_empty() {
        Vec::new()
    } else {
        let (p, _, _) = amd::order(free.len(), &col_ptr, &row_idx, &amd::Control::default())
            .expect("adjacency lists form a valid sorted pattern");
        p.into_iter().map(|k| free[k]).collect()
    };
    order.extend_from_slice(tail);
    order
}

/// Symbolic analysis shared by all numeric factorizations of one sparsity pattern.
#[derive(Debug)]
pub struct Symbolic {
    n: usize,
    /// `perm[k]` is the original index eliminated at step `k`.
    perm: Vec<usize>,
    /// Inverse permutation.
    pinv: Vec<usize>,
    parent: Vec<Option<usize>>,
    /// Upper triangle of the permuted matrix, by columns.
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    /// Source slot in the original lower-triangle storage of each permuted entry.
    c_src: Vec<usize>,
    l_col_ptr: Vec<usize>,
    a_col_ptr: Vec<usize>,
    a_row_idx: Vec<usize>,
}

impl Symbolic {
    /// Analyse `a` with a minimum-degree ordering, placing `tail` last.
    pub fn analyze(a: &SymCsc, tail: &[usize]) -> Result<Arc<Self>> {
        let perm = minimum_degree_order(a, tail);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &SymCsc, perm: Vec<usize>) -> Result<Arc<Self>> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::Spec(format!("ordering of length {} for dimension {n}", perm.len())));
        }
        let mut pinv = vec![usize::MAX; n];
        for (k, &i) in perm.iter().enumerate() {
            if i >= n || pinv[i] != usize::MAX {
                return Err(Error::Spec("ordering is not a permutation".into()));
            }
            pinv[i] = k;
        }

        // Permuted upper triangle C = P A P^T, column-wise, remembering source slots.
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(a.nnz());
        for c in 0..n {
            for k in a.col_ptr[c]..a.col_ptr[c + 1] {
                let (pi, pj) = (pinv[a.row_idx[k]], pinv[c]);
                let (row, col) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                entries.push((col, row, k));
            }
        }
        entries.sort_unstable();
        let mut c_col_ptr = vec![0usize; n + 1];
        for &(col, _, _) in &entries {
            c_col_ptr[col + 1] += 1;
        }
        for c in 0..n {
            c_col_ptr[c + 1] += c_col_ptr[c];
        }
        let c_row_idx: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let c_src: Vec<usize> = entries.iter().map(|e| e.2).collect();

        // Elimination tree of C (upper triangle by columns), with path compression.
        let mut parent = vec![None; n];
        let mut ancestor: Vec<Option<usize>> = vec![None; n];
        for k in 0..n {
            for p in c_col_ptr[k]..c_col_ptr[k + 1] {
                let mut i = c_row_idx[p];
                while i < k {
                    let next = ancestor[i];
                    ancestor[i] = Some(k);
                    match next {
                        None => {
                            parent[i] = Some(k);
                            break;
                        }
                        Some(nx) if nx == k => break,
                        Some(nx) => i = nx,
                    }
                }
            }
        }

        let mut sym = Symbolic {
            n,
            perm,
            pinv,
            parent,
            c_col_ptr,
            c_row_idx,
            c_src,
            l_col_ptr: Vec::new(),
            a_col_ptr: a.col_ptr.clone(),
            a_row_idx: a.row_idx.clone(),
        };

        // Column counts of L from the row patterns.
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let top = sym.ereach(k, &mut stack, &mut mark);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_col_ptr[j + 1] = l_col_ptr[j] + counts[j];
        }
        sym.l_col_ptr = l_col_ptr;
        Ok(Arc::new(sym))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Nonzeros of `L`, diagonal included.
    pub fn l_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }

    /// Pattern of row `k` of `L` (excluding the diagonal), written to `stack[top..]` in
    /// topological order. `mark` must not contain `k` on entry.
    fn ereach(&self, k: usize, stack: &mut [usize], mark: &mut [usize]) -> usize {
        let n = self.n;
        let mut top = n;
        mark[k] = k;
        let mut path = Vec::new();
        for p in self.c_col_ptr[k]..self.c_col_ptr[k + 1] {
            let mut i = self.c_row_idx[p];
            if i > k {
                continue;
            }
            path.clear();
            while mark[i] != k {
                path.push(i);
                mark[i] = k;
                match self.parent[i] {
                    Some(pi) => i = pi,
                    None => break,
                }
            }
            while let Some(v) = path.pop() {
                top -= 1;
                stack[top] = v;
            }
        }
        top
    }
}

/// Numeric Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    symbolic: Arc<Symbolic>,
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
}

impl Cholesky {
    /// Factor `a`, which must share the pattern `symbolic` was built from.
    pub fn factor(symbolic: &Arc<Symbolic>, a: &SymCsc) -> Result<Self> {
        let sym = symbolic.as_ref();
        if a.n != sym.n || a.col_ptr != sym.a_col_ptr || a.row_idx != sym.a_row_idx {
            return Err(Error::Spec("matrix pattern differs from the analysed pattern".into()));
        }
        let n = sym.n;
        let lnz = sym.l_nnz();
        let mut l_row_idx = vec![0usize; lnz];
        let mut l_values = vec![0.0; lnz];
        let mut next: Vec<usize> = sym.l_col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let top = sym.ereach(k, &mut stack, &mut mark);
            for p in sym.c_col_ptr[k]..sym.c_col_ptr[k + 1] {
                x[sym.c_row_idx[p]] += a.values[sym.c_src[p]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / l_values[sym.l_col_ptr[i]];
                x[i] = 0.0;
                for p in sym.l_col_ptr[i] + 1..next[i] {
                    x[l_row_idx[p]] -= l_values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                l_row_idx[p] = k;
                l_values[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: sym.perm[k],
                    value: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            l_row_idx[p] = k;
            l_values[p] = d.sqrt();
        }
        Ok(Cholesky {
            symbolic: Arc::clone(symbolic),
            l_row_idx,
            l_values,
        })
    }

    /// Analyse and factor in one step.
    pub fn new(a: &SymCsc, tail: &[usize]) -> Result<Self> {
        let sym = Symbolic::analyze(a, tail)?;
        Self::factor(&sym, a)
    }

    pub fn symbolic(&self) -> &Arc<Symbolic> {
        &self.symbolic
    }

    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    fn col(&self, j: usize) -> std::ops::Range<usize> {
        self.symbolic.l_col_ptr[j]..self.symbolic.l_col_ptr[j + 1]
    }

    /// `log |A|`.
    pub fn logdet(&self) -> f64 {
        (0..self.dim())
            .map(|j| 2.0 * self.l_values[self.symbolic.l_col_ptr[j]].ln())
            .sum()
    }

    /// In place `L y = b` (permuted space).
    fn lsolve(&self, y: &mut [f64]) {
        for j in 0..self.dim() {
            let r = self.col(j);
            y[j] /= self.l_values[r.start];
            let yj = y[j];
            for p in r.start + 1..r.end {
                y[self.l_row_idx[p]] -= self.l_values[p] * yj;
            }
        }
    }

    /// In place `L^T y = b` (permuted space).
    fn ltsolve(&self, y: &mut [f64]) {
        for j in (0..self.dim()).rev() {
            let r = self.col(j);
            let mut s = y[j];
            for p in r.start + 1..r.end {
                s -= self.l_values[p] * y[self.l_row_idx[p]];
            }
            y[j] = s / self.l_values[r.start];
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let sym = &self.symbolic;
        let mut y: Vec<f64> = sym.perm.iter().map(|&i| b[i]).collect();
        self.lsolve(&mut y);
        self.ltsolve(&mut y);
        let mut x = vec![0.0; self.dim()];
        for (k, &i) in sym.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    /// Map standard normal `z` to a draw from `N(0, A^-1)`.
    pub fn sample_from_standard(&self, z: &[f64]) -> Vec<f64> {
        let mut y = z.to_vec();
        self.ltsolve(&mut y);
        let mut x = vec![0.0; self.dim()];
        for (k, &i) in self.symbolic.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    /// `a^T A^-1 a` for a sparse vector given as `(index, value)` pairs, by one forward solve.
    pub fn inverse_quadratic_form(&self, a: &[(usize, f64)]) -> f64 {
        let mut y = vec![0.0; self.dim()];
        for &(i, v) in a {
            y[self.symbolic.pinv[i]] += v;
        }
        let start = y.iter().position(|&v| v != 0.0).unwrap_or(self.dim());
        for j in start..self.dim() {
            let r = self.col(j);
            y[j] /= self.l_values[r.start];
            let yj = y[j];
            if yj != 0.0 {
                for p in r.start + 1..r.end {
                    y[self.l_row_idx[p]] -= self.l_values[p] * yj;
                }
            }
        }
        y.iter().map(|v| v * v).sum()
    }

    /// Entries of `A^-1` on the pattern of `L + L^T` (Takahashi recursion).
    pub fn selected_inverse(&self) -> SelectedInverse {
        let n = self.dim();
        let sym = &self.symbolic;
        let mut z = vec![0.0; self.l_values.len()];
        let lookup = |z: &[f64], i: usize, j: usize| -> f64 {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            let range = self.col(c);
            let rows = &self.l_row_idx[range.clone()];
            match rows.binary_search(&r) {
                Ok(k) => z[range.start + k],
                Err(_) => unreachable!("selected inverse entry outside the filled pattern"),
            }
        };
        for i in (0..n).rev() {
            let r = self.col(i);
            let d = self.l_values[r.start];
            let off = r.start + 1..r.end;
            // Unit-lower multipliers L_ki / L_ii.
            let mult: Vec<(usize, f64)> = off
                .clone()
                .map(|p| (self.l_row_idx[p], self.l_values[p] / d))
                .collect();
            for (slot, &(j, _)) in off.clone().zip(&mult) {
                let s: f64 = mult.iter().map(|&(k, lk)| lk * lookup(&z, j, k)).sum();
                z[slot] = -s;
            }
            let s: f64 = off.zip(&mult).map(|(slot, &(_, lk))| lk * z[slot]).sum();
            z[r.start] = 1.0 / (d * d) - s;
        }
        SelectedInverse {
            symbolic: Arc::clone(sym),
            l_row_idx: self.l_row_idx.clone(),
            values: z,
        }
    }

    /// Diagonal of `A^-1` in original ordering.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let sel = self.selected_inverse();
        (0..self.dim()).map(|i| sel.get(i, i).expect("diagonal is in the pattern")).collect()
    }
}

/// Entries of an inverse restricted to the filled Cholesky pattern.
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    symbolic: Arc<Symbolic>,
    l_row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SelectedInverse {
    /// `(A^-1)_ij` in original indices, if it lies on the computed pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (pi, pj) = (self.symbolic.pinv[i], self.symbolic.pinv[j]);
        let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
        let lo = self.symbolic.l_col_ptr[c];
        let hi = self.symbolic.l_col_ptr[c + 1];
        self.l_row_idx[lo..hi]
            .binary_search(&r)
            .ok()
            .map(|k| self.values[lo + k])
    }

    /// `a^T A^-1 a` when every pair of indices of `a` is on the pattern.
    pub fn quadratic_form(&self, a: &[(usize, f64)]) -> Option<f64> {
        let mut s = 0.0;
        for &(i, vi) in a {
            for &(j, vj) in a {
                s += vi * vj * self.get(i, j)?;
            }
        }
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_2d(m: usize) -> SymCsc {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.1));
                if i + 1 < m {
                    t.push((idx(i + 1, j), idx(i, j), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j + 1), idx(i, j), -1.0));
                }
            }
        }
        SymCsc::from_triplets(m * m, &t).unwrap()
    }

    #[test]
    fn triplets_mirror_and_sum() {
        let a = SymCsc::from_triplets(2, &[(0, 1, 1.0), (1, 0, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert!(SymCsc::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn factor_solve_logdet_against_dense() {
        let a = laplacian_2d(7);
        let chol = Cholesky::new(&a, &[]).unwrap();
        let dense = a.to_dense();
        let b: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = chol.solve(&b);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let dchol = dense.clone().cholesky().unwrap();
        let dense_logdet: f64 = dchol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        assert!((chol.logdet() - dense_logdet).abs() < 1e-10);
        let inv = dense.try_inverse().unwrap();
        let diag = chol.inverse_diagonal();
        for i in 0..a.dim() {
            assert!((diag[i] - inv[(i, i)]).abs() < 1e-13);
        }
        let sel = chol.selected_inverse();
        for (r, c, _) in a.triplets() {
            assert!((sel.get(r, c).unwrap() - inv[(r, c)]).abs() < 1e-13);
        }
        let v = [(3, 1.0), (10, -2.0)];
        let direct = inv[(3, 3)] + 4.0 * inv[(10, 10)] - 4.0 * inv[(3, 10)];
        assert!((chol.inverse_quadratic_form(&v) - direct).abs() < 1e-13);
    }

    #[test]
    fn refactor_reuses_symbolic() {
        let a = laplacian_2d(5);
        let sym = Symbolic::analyze(&a, &[0, 1]).unwrap();
        assert_eq!(&sym.permutation()[23..], &[0, 1]);
        let mut b = a.clone();
        b.scale(2.0);
        let f = Cholesky::factor(&sym, &b).unwrap();
        let g = Cholesky::factor(&sym, &a).unwrap();
        assert!((f.logdet() - g.logdet() - 25.0 * 2f64.ln()).abs() < 1e-10);
        let other = laplacian_2d(4);
        assert!(Cholesky::factor(&sym, &other).is_err());
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = SymCsc::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(Cholesky::new(&a, &[]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn minimum_degree_is_a_permutation_with_less_fill_than_natural() {
        let a = laplacian_2d(12);
        let order = minimum_degree_order(&a, &[]);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..144).collect::<Vec<_>>());
        let md = Symbolic::with_ordering(&a, order).unwrap().l_nnz();
        let natural = Symbolic::with_ordering(&a, (0..144).collect()).unwrap().l_nnz();
        assert!(md < natural, "{md} vs {natural}");
    }

    proptest! {
        #[test]
        fn random_spd_matches_dense(n in 2usize..25, seed in 0u64..1000, density in 0.05f64..0.5) {
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut next = || { state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (state >> 11) as f64 / (1u64 << 53) as f64 };
            let mut t = Vec::new();
            let mut rowsum = vec![0.0; n];
            for i in 0..n {
                for j in 0..i {
                    if next() < density {
                        let v = next() - 0.5;
                        t.push((i, j, v));
                        rowsum[i] += v.abs();
                        rowsum[j] += v.abs();
                    }
                }
            }
            for (i, s) in rowsum.iter().enumerate() {
                t.push((i, i, s + 0.5 + next()));
            }
            let a = SymCsc::from_triplets(n, &t).unwrap();
            let chol = Cholesky::new(&a, &[n - 1]).unwrap();
            let dense = a.to_dense();
            let inv = dense.clone().try_inverse().unwrap();
            let diag = chol.inverse_diagonal();
            for i in 0..n {
                prop_assert!((diag[i] - inv[(i, i)]).abs() < 1e-12);
            }
            let dl: f64 = dense.cholesky().unwrap().l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            prop_assert!((chol.logdet() - dl).abs() < 1e-10);
        }
    }
}
