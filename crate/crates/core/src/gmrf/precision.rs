//! Structured precision matrices: AR(1), first-order random walk and Kronecker grouping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{Cholesky, SymCsc};

/// Precision of the soft sum-to-zero penalty `kappa_c (1^T x)^2` added to intrinsic blocks.
pub const SOFT_CONSTRAINT_PRECISION: f64 = 1e6;

/// A sum-to-zero constraint over a subset of indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumToZero {
    pub indices: Vec<usize>,
}

/// Sparse symmetric GMRF precision with its null-space bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePrecision {
    pub matrix: SymCsc,
    /// Dimension of the null space of `matrix`.
    pub rank_deficiency: usize,
    pub constraints: Vec<SumToZero>,
}

impl SparsePrecision {
    pub fn proper(matrix: SymCsc) -> Self {
        SparsePrecision {
            matrix,
            rank_deficiency: 0,
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Lower-triangle `(row, col, value)` entries.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.matrix.triplets().collect()
    }

    /// Entries of the constraint penalty `kappa_c 11^T` over each constrained subset.
    pub fn constraint_triplets(&self, kappa_c: f64) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for c in &self.constraints {
            for (a, &i) in c.indices.iter().enumerate() {
                for &j in &c.indices[..=a] {
                    t.push((i, j, kappa_c));
                }
            }
        }
        t
    }

    /// Proper precision: the matrix plus the soft constraint penalties plus `jitter * I`.
    pub fn constrained(&self, kappa_c: f64, jitter: f64) -> Result<SymCsc> {
        let mut t = self.triplets();
        t.extend(self.constraint_triplets(kappa_c));
        t.extend((0..self.dim()).map(|i| (i, i, jitter)));
        SymCsc::from_triplets(self.dim(), &t)
    }

    /// Factor after constraint handling; fails unless the result is positive definite.
    pub fn factor_constrained(&self, jitter: f64) -> Result<Cholesky> {
        Cholesky::new(&self.constrained(SOFT_CONSTRAINT_PRECISION, jitter)?, &[])
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("autocorrelation must lie in (-1, 1), got {rho}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Lower-triangle entries of the stationary AR(1) precision with covariance
/// `rho^|i-j| / marginal_prec`. Off-diagonal slots are always emitted, even for `rho = 0`.
pub fn ar1_triplets(n: usize, rho: f64, marginal_prec: f64) -> Vec<(usize, usize, f64)> {
    if n == 1 {
        return vec![(0, 0, marginal_prec)];
    }
    let s = marginal_prec / (1.0 - rho * rho);
    let mut t = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        let d = if i == 0 || i == n - 1 { 1.0 } else { 1.0 + rho * rho };
        t.push((i, i, s * d));
        if i + 1 < n {
            t.push((i + 1, i, -s * rho));
        }
    }
    t
}

pub fn ar1_precision(n: usize, rho: f64, marginal_prec: f64) -> Result<SparsePrecision> {
    if n == 0 {
        return Err(Error::domain("AR(1) length must be at least 1"));
    }
    check_rho(rho)?;
    check_positive("marginal precision", marginal_prec)?;
    Ok(SparsePrecision::proper(SymCsc::from_triplets(n, &ar1_triplets(n, rho, marginal_prec))?))
}

/// `log |Q|` of [`ar1_precision`].
pub fn ar1_logdet(n: usize, rho: f64, marginal_prec: f64) -> f64 {
    n as f64 * marginal_prec.ln() - (n as f64 - 1.0) * (1.0 - rho * rho).ln()
}

/// `prec * D^T D` for the first-difference matrix `D`, with a sum-to-zero constraint.
pub fn rw1_precision(n: usize, prec: f64) -> Result<SparsePrecision> {
    if n < 2 {
        return Err(Error::domain("RW(1) length must be at least 2"));
    }
    check_positive("RW(1) precision", prec)?;
    let mut t = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        let d = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
        t.push((i, i, prec * d));
        if i + 1 < n {
            t.push((i + 1, i, -prec));
        }
    }
    Ok(SparsePrecision {
        matrix: SymCsc::from_triplets(n, &t)?,
        rank_deficiency: 1,
        constraints: vec![SumToZero {
            indices: (0..n).collect(),
        }],
    })
}

/// `log |prec D^T D + kappa_c 11^T|`: the nonzero path-Laplacian eigenvalues multiply to `n`.
pub fn rw1_constrained_logdet(n: usize, prec: f64, kappa_c: f64) -> f64 {
    let n = n as f64;
    (n - 1.0) * prec.ln() + n.ln() + (kappa_c * n).ln()
}

/// `Q_ar1(n_groups, group_rho, 1) ⊗ Q_within`, indexed `group * dim + i`.
pub fn kron_group(within: &SparsePrecision, n_groups: usize, group_rho: f64) -> Result<SparsePrecision> {
    if n_groups == 0 {
        return Err(Error::domain("number of groups must be at least 1"));
    }
    check_rho(group_rho)?;
    let n = within.dim();
    let outer = ar1_triplets(n_groups, group_rho, 1.0);
    let inner = within.triplets();
    let mut t = Vec::with_capacity(outer.len() * inner.len() * 2);
    for &(g1, g2, a) in &outer {
        for &(i, j, b) in &inner {
            t.push((g1 * n + i, g2 * n + j, a * b));
            if g1 != g2 && i != j {
                t.push((g1 * n + j, g2 * n + i, a * b));
            }
        }
    }
    let constraints = (0..n_groups)
        .flat_map(|g| {
            within.constraints.iter().map(move |c| SumToZero {
                indices: c.indices.iter().map(|&i| g * n + i).collect(),
            })
        })
        .collect();
    Ok(SparsePrecision {
        matrix: SymCsc::from_triplets(n * n_groups, &t)?,
        rank_deficiency: within.rank_deficiency * n_groups,
        constraints,
    })
}

/// Block-diagonal replication of `block` with its constraints shifted per copy.
pub fn replicate(block: &SparsePrecision, copies: usize) -> Result<SparsePrecision> {
    let n = block.dim();
    let inner = block.triplets();
    let t: Vec<_> = (0..copies)
        .flat_map(|k| inner.iter().map(move |&(i, j, v)| (k * n + i, k * n + j, v)))
        .collect();
    let constraints = (0..copies)
        .flat_map(|k| {
            block.constraints.iter().map(move |c| SumToZero {
                indices: c.indices.iter().map(|&i| k * n + i).collect(),
            })
        })
        .collect();
    Ok(SparsePrecision {
        matrix: SymCsc::from_triplets(n * copies, &t)?,
        rank_deficiency: block.rank_deficiency * copies,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_closed_forms() {
        let q = ar1_precision(1, 0.7, 3.0).unwrap();
        assert_eq!(q.matrix.to_dense()[(0, 0)], 3.0);
        let q = ar1_precision(4, 0.0, 2.5).unwrap().matrix.to_dense();
        assert_eq!(q, nalgebra::DMatrix::identity(4, 4) * 2.5);
        assert!(ar1_precision(3, 1.0, 1.0).is_err());
        assert!(ar1_precision(3, -1.2, 1.0).is_err());
        assert!(ar1_precision(0, 0.5, 1.0).is_err());
    }

    #[test]
    fn rw1_small_cases() {
        let q = rw1_precision(2, 3.0).unwrap();
        let d = q.matrix.to_dense();
        assert_eq!(d, nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, -3.0, -3.0, 3.0]));
        assert_eq!(q.rank_deficiency, 1);
        let q = rw1_precision(7, 1.7).unwrap().matrix.to_dense();
        for i in 0..7 {
            assert!(q.row(i).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn logdets_match_factorization() {
        let q = ar1_precision(9, 0.8, 2.0).unwrap();
        let chol = Cholesky::new(&q.matrix, &[]).unwrap();
        assert!((chol.logdet() - ar1_logdet(9, 0.8, 2.0)).abs() < 1e-10);
        let r = rw1_precision(6, 4.0).unwrap();
        let chol = Cholesky::new(&r.constrained(SOFT_CONSTRAINT_PRECISION, 0.0).unwrap(), &[]).unwrap();
        assert!((chol.logdet() - rw1_constrained_logdet(6, 4.0, SOFT_CONSTRAINT_PRECISION)).abs() < 1e-6);
    }

    #[test]
    fn kron_independent_groups_are_block_diagonal() {
        let w = ar1_precision(3, 0.4, 2.0).unwrap();
        let k = kron_group(&w, 2, 0.0).unwrap().matrix.to_dense();
        let wd = w.matrix.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k[(i, j)], wd[(i, j)]);
                assert_eq!(k[(3 + i, 3 + j)], wd[(i, j)]);
                assert_eq!(k[(i, 3 + j)], 0.0);
            }
        }
    }
}
