//! Finite-element SPDE representation of a Matérn field with smoothness 1.

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::precision::SparsePrecision;
use crate::error::{Error, Result};
use crate::sparse::SymCsc;

/// `kappa` for a practical range (correlation about 0.14 at `range`).
pub fn kappa_from_range(range_km: f64) -> f64 {
    8f64.sqrt() / range_km
}

/// `tau` giving stationary marginal standard deviation `sd`.
pub fn tau_from_sd(sd: f64, kappa: f64) -> f64 {
    1.0 / (sd * kappa * (4.0 * std::f64::consts::PI).sqrt())
}

/// Mesh matrices of the SPDE discretization, computed once per mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdeOperator {
    /// Lumped (diagonal) mass matrix.
    pub mass: Vec<f64>,
    /// P1 stiffness matrix.
    pub stiffness: SymCsc,
    /// `G C^-1 G`.
    pub stiffness2: SymCsc,
    /// Shared pattern of the precision, with the slot of each term's entries in it.
    pattern: SymCsc,
    stiffness_slots: Vec<usize>,
    stiffness2_slots: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub kappa: f64,
    pub tau: f64,
}

impl SpdeParams {
    pub fn from_range_sd(range_km: f64, sd: f64) -> Result<Self> {
        if !(range_km.is_finite() && range_km > 0.0 && sd.is_finite() && sd > 0.0) {
            return Err(Error::domain(format!("SPDE needs positive finite range and sd, got ({range_km}, {sd})")));
        }
        let kappa = kappa_from_range(range_km);
        Ok(SpdeParams {
            kappa,
            tau: tau_from_sd(sd, kappa),
        })
    }
}

impl SpdeOperator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let n = mesh.n_vertices();
        let mut mass = vec![0.0; n];
        let mut g = Vec::with_capacity(mesh.n_triangles() * 6);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.triangle_area(t);
            let p = tri.map(|v| mesh.vertices[v]);
            // Edge vector opposite each vertex.
            let e = [0usize, 1, 2].map(|k| {
                let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                [b[0] - a[0], b[1] - a[1]]
            });
            for i in 0..3 {
                mass[tri[i]] += area / 3.0;
                for j in 0..=i {
                    let v = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
                    g.push((tri[i], tri[j], v));
                }
            }
        }
        if let Some(v) = mass.iter().position(|&m| m <= 0.0) {
            return Err(Error::Mesh(format!("vertex {v} belongs to no triangle")));
        }
        let stiffness = SymCsc::from_triplets(n, &g)?;

        // G C^-1 G through the neighbour lists of G.
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in stiffness.triplets() {
            nbrs[r].push((c, v));
            if r != c {
                nbrs[c].push((r, v));
            }
        }
        let mut g2 = Vec::new();
        for (k, list) in nbrs.iter().enumerate() {
            for &(i, gi) in list {
                for &(j, gj) in list {
                    if i >= j {
                        g2.push((i, j, gi * gj / mass[k]));
                    }
                }
            }
        }
        let stiffness2 = SymCsc::from_triplets(n, &g2)?;

        let mut all: Vec<_> = stiffness2.triplets().map(|(r, c, _)| (r, c, 0.0)).collect();
        all.extend(stiffness.triplets().map(|(r, c, _)| (r, c, 0.0)));
        let pattern = SymCsc::from_triplets(n, &all)?;
        let slots = |m: &SymCsc| -> Vec<usize> {
            m.triplets()
                .map(|(r, c, _)| pattern.slot(r, c).expect("pattern is a superset"))
                .collect()
        };
        Ok(SpdeOperator {
            stiffness_slots: slots(&stiffness),
            stiffness2_slots: slots(&stiffness2),
            mass,
            stiffness,
            stiffness2,
            pattern,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G)`.
    pub fn precision(&self, params: SpdeParams) -> SparsePrecision {
        let SpdeParams { kappa, tau } = params;
        let t2 = tau * tau;
        let mut q = self.pattern.clone();
        let vals = q.values_mut();
        for (k, v) in self.stiffness.values().iter().enumerate() {
            vals[self.stiffness_slots[k]] += t2 * 2.0 * kappa * kappa * v;
        }
        for (k, v) in self.stiffness2.values().iter().enumerate() {
            vals[self.stiffness2_slots[k]] += t2 * v;
        }
        for (i, &c) in self.mass.iter().enumerate() {
            let s = self.pattern.slot(i, i).expect("diagonal present");
            vals[s] += t2 * kappa.powi(4) * c;
        }
        SparsePrecision::proper(q)
    }
}

/// SPDE operator and precision for a range and marginal standard deviation.
pub fn spde_precision(mesh: &Mesh, range_km: f64, sd: f64) -> Result<(SpdeOperator, SparsePrecision)> {
    let params = SpdeParams::from_range_sd(range_km, sd)?;
    let op = SpdeOperator::new(mesh)?;
    let q = op.precision(params);
    Ok((op, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fem_matrices_on_grid() {
        let mesh = Mesh::regular_grid(5, 4, 1.5).unwrap();
        let op = SpdeOperator::new(&mesh).unwrap();
        let total: f64 = op.mass.iter().sum();
        assert!((total - 4.0 * 1.5 * 3.0 * 1.5).abs() < 1e-12);
        assert!(op.mass.iter().all(|&c| c > 0.0));
        let g = op.stiffness.to_dense();
        for i in 0..op.dim() {
            assert!(g.row(i).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn precision_scales_with_tau_squared() {
        let mesh = Mesh::regular_grid(4, 4, 1.0).unwrap();
        let op = SpdeOperator::new(&mesh).unwrap();
        let a = op.precision(SpdeParams { kappa: 0.7, tau: 1.0 }).matrix;
        let b = op.precision(SpdeParams { kappa: 0.7, tau: 2.0 }).matrix;
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((4.0 * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn invalid_parameters() {
        let mesh = Mesh::regular_grid(3, 3, 1.0).unwrap();
        assert!(spde_precision(&mesh, f64::NAN, 1.0).is_err());
        assert!(spde_precision(&mesh, 10.0, 0.0).is_err());
    }
}
