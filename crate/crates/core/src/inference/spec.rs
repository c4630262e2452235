//! Generic latent Gaussian model: an observation likelihood, a linear predictor built from
//! sparse rows over the latent vector, and a list of latent blocks with structured priors.

use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::hyper::{HyperName, HyperPriors, N_HYPER};
use crate::error::{Error, Result};
use crate::gmrf::SpdeOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Tweedie with log link; `p` and `sigma2` are hyperparameters.
    Tweedie,
    /// Normal with identity link and variance `sigma2`.
    Gaussian,
}

#[derive(Debug, Clone)]
pub enum BlockKind {
    /// Independent `N(0, 1/prior_precision)` coefficients.
    Fixed { prior_precision: f64 },
    /// SPDE field replicated over `groups` with AR(1) dependence between groups, group-major.
    Spatial { operator: Arc<SpdeOperator>, groups: usize },
    /// Stationary AR(1) over the block.
    Ar1,
    /// RW(1) of length `length` with a soft sum-to-zero constraint, replicated
    /// `dim / length` times.
    Rw1 { length: usize },
}

impl BlockKind {
    fn tag(&self) -> &'static str {
        match self {
            BlockKind::Fixed { .. } => "fixed",
            BlockKind::Spatial { .. } => "spatial",
            BlockKind::Ar1 => "ar1",
            BlockKind::Rw1 { .. } => "rw1",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatentBlock {
    pub name: String,
    pub kind: BlockKind,
    /// One label per coefficient, unique across the model.
    pub labels: Vec<String>,
}

impl LatentBlock {
    pub fn fixed(names: &[String], prior_precision: f64) -> Self {
        LatentBlock {
            name: "fixed".into(),
            kind: BlockKind::Fixed { prior_precision },
            labels: names.to_vec(),
        }
    }

    pub fn spatial(name: &str, operator: Arc<SpdeOperator>, groups: usize) -> Self {
        let n = operator.dim();
        let labels = (0..groups)
            .flat_map(|g| (0..n).map(move |v| (g, v)))
            .map(|(g, v)| format!("{name}[{}][{v}]", g + 1))
            .collect();
        LatentBlock {
            name: name.into(),
            kind: BlockKind::Spatial { operator, groups },
            labels,
        }
    }

    pub fn ar1(name: &str, n: usize) -> Self {
        LatentBlock {
            name: name.into(),
            kind: BlockKind::Ar1,
            labels: (1..=n).map(|i| format!("{name}[{i}]")).collect(),
        }
    }

    /// Replicated RW(1) with caller-supplied labels, replicate-major.
    pub fn rw1(name: &str, length: usize, labels: Vec<String>) -> Self {
        LatentBlock {
            name: name.into(),
            kind: BlockKind::Rw1 { length },
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// Latent Gaussian model specification. Row `i` of the predictor is
/// `eta_i = sum_k rows[i][k].1 * x[rows[i][k].0]`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub likelihood: Likelihood,
    pub blocks: Vec<LatentBlock>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub y: Vec<f64>,
    pub priors: HyperPriors,
    offsets: Vec<usize>,
    dim: usize,
}

impl ModelSpec {
    pub fn new(
        likelihood: Likelihood,
        blocks: Vec<LatentBlock>,
        rows: Vec<Vec<(usize, f64)>>,
        y: Vec<f64>,
        priors: HyperPriors,
    ) -> Result<Self> {
        let rows: Vec<_> = rows.into_iter().map(merge_row).collect();
        if blocks.is_empty() {
            return Err(Error::Spec("a model needs at least one latent block".into()));
        }
        if rows.len() != y.len() {
            return Err(Error::Spec(format!("{} predictor rows for {} observations", rows.len(), y.len())));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            offsets.push(dim);
            check_block(b)?;
            dim += b.dim();
        }
        for tag in ["spatial", "ar1", "rw1"] {
            if blocks.iter().filter(|b| b.kind.tag() == tag).count() > 1 {
                return Err(Error::Spec(format!("at most one {tag} block is supported")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for b in &blocks {
            for l in &b.labels {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Spec(format!("duplicate latent label {l}")));
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(&(j, _)) = row.iter().find(|&&(j, v)| j >= dim || !v.is_finite()) {
                return Err(Error::Spec(format!("row {i} references latent index {j} (dimension {dim})")));
            }
        }
        for &v in &y {
            let ok = match likelihood {
                Likelihood::Tweedie => v.is_finite() && v >= 0.0,
                Likelihood::Gaussian => v.is_finite(),
            };
            if !ok {
                return Err(Error::Spec(format!("response value {v} is invalid for {likelihood:?}")));
            }
        }
        Ok(ModelSpec {
            likelihood,
            blocks,
            rows,
            y,
            priors,
            offsets,
            dim,
        })
    }

    /// Same structure with a new response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        ModelSpec::new(self.likelihood, self.blocks.clone(), self.rows.clone(), y, self.priors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        self.offsets[block]..self.offsets[block] + self.blocks[block].dim()
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Latent labels in index order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().flat_map(|b| b.labels.iter().map(String::as_str))
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().position(|l| l == label)
    }

    /// Indices of fixed-effect blocks, used as the trailing part of the elimination order.
    pub fn fixed_indices(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .filter(|&b| matches!(self.blocks[b].kind, BlockKind::Fixed { .. }))
            .flat_map(|b| self.block_range(b))
            .collect()
    }

    /// Hyperparameters that enter the model.
    pub fn active_hypers(&self) -> [bool; N_HYPER] {
        let mut a = [false; N_HYPER];
        a[HyperName::Sigma2.index()] = true;
        a[HyperName::P.index()] = self.likelihood == Likelihood::Tweedie;
        for b in &self.blocks {
            match &b.kind {
                BlockKind::Fixed { .. } => {}
                BlockKind::Spatial { groups, .. } => {
                    a[HyperName::SpatialRange.index()] = true;
                    a[HyperName::SpatialSd.index()] = true;
                    a[HyperName::GroupRho.index()] = *groups > 1;
                }
                BlockKind::Ar1 => {
                    a[HyperName::WeekPrec.index()] = true;
                    a[HyperName::WeekRho.index()] = b.dim() > 1;
                }
                BlockKind::Rw1 { .. } => a[HyperName::RegionRwPrec.index()] = true,
            }
        }
        a
    }

    pub fn eta(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, x)).collect()
    }

    /// SHA-256 over a canonical byte encoding of the full specification.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}|{}|{}", self.likelihood, self.dim, self.y.len()).as_bytes());
        for b in &self.blocks {
            h.update(format!("|{}:{}:{}", b.name, b.kind.tag(), b.dim()).as_bytes());
            match &b.kind {
                BlockKind::Fixed { prior_precision } => h.update(prior_precision.to_le_bytes()),
                BlockKind::Spatial { operator, groups } => {
                    h.update(groups.to_le_bytes());
                    for v in &operator.mass {
                        h.update(v.to_le_bytes());
                    }
                    for (r, c, v) in operator.stiffness.triplets() {
                        h.update(r.to_le_bytes());
                        h.update(c.to_le_bytes());
                        h.update(v.to_le_bytes());
                    }
                }
                BlockKind::Ar1 => {}
                BlockKind::Rw1 { length } => h.update(length.to_le_bytes()),
            }
            for l in &b.labels {
                h.update(l.as_bytes());
                h.update([0u8]);
            }
        }
        for (row, y) in self.rows.iter().zip(&self.y) {
            h.update(y.to_le_bytes());
            for &(j, v) in row {
                h.update(j.to_le_bytes());
                h.update(v.to_le_bytes());
            }
            h.update([0xffu8]);
        }
        h.update(serde_json::to_vec(&self.priors).expect("priors serialize"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_block(b: &LatentBlock) -> Result<()> {
    let bad = |msg: String| Err(Error::Spec(format!("block {}: {msg}", b.name)));
    if b.dim() == 0 {
        return bad("empty block".into());
    }
    match &b.kind {
        BlockKind::Fixed { prior_precision } if !(prior_precision.is_finite() && *prior_precision > 0.0) => {
            bad(format!("prior precision {prior_precision} must be positive"))
        }
        BlockKind::Spatial { operator, groups } if *groups == 0 || operator.dim() * groups != b.dim() => {
            bad(format!("{} labels for {} vertices x {groups} groups", b.dim(), operator.dim()))
        }
        BlockKind::Rw1 { length } if *length < 2 || b.dim() % length != 0 => {
            bad(format!("{} labels are not a multiple of RW(1) length {length}", b.dim()))
        }
        _ => Ok(()),
    }
}

/// Sort a sparse row by index and sum repeated indices.
fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

#[inline]
pub(crate) fn dot(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * x[j]).sum()
}
