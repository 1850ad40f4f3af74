//! Closed-form sparse correlation and sparse cross-correlation.
//!
//! With centered, unit-norm columns the L1-penalized pairwise regression
//! problems
//!
//! ```text
//! ½ Σ_j Σ_{k≠j} ‖x_j − γ_jk x_k‖² + λ Σ_j Σ_{k≠j} |γ_jk|
//! ½ Σ_{i,j} ‖y(v_j) − β_ij x(v_i)‖² + λ Σ_{i,j} |β_ij|
//! ```
//!
//! separate into one-dimensional problems
//! `(γ − x_jᵀx_k)² + 2λ|γ| + const`, each solved by soft-thresholding the
//! sample (cross-)correlation. Stacked into a single regression the design is
//! block diagonal with orthonormal columns, which is why no iterative solver
//! is needed. That stacked design is never built here.

use rayon::prelude::*;

use crate::data::{MatrixKind, SymmetricMatrix};
use crate::error::{Error, Result};

/// Above this many nodes estimates are stored as coordinate triplets.
pub const DENSE_LIMIT: usize = 2000;

/// `sign(r) · max(|r| − λ, 0)`. Ties `|r| = λ` give exactly zero.
#[inline]
pub fn soft_threshold(r: f64, lambda: f64) -> f64 {
    // Branch-free so random-sign inputs don't stall the pipeline; adding
    // +0.0 turns the −0.0 of a negative tie into +0.0.
    (r.abs() - lambda).max(0.0).copysign(r) + 0.0
}

/// Checked [`soft_threshold`]: rejects non-finite input and negative λ.
pub fn soft_threshold_scalar(r: f64, lambda: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::NonFiniteScalar(r));
    }
    check_lambda(lambda)?;
    Ok(soft_threshold(r, lambda))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    Correlation,
    CrossCorrelation,
}

impl EstimateSource {
    /// Matrix kind of a dense estimate. Cross estimates are asymmetric and
    /// keep the cross-correlation kind, with λ attached.
    pub fn estimate_kind(self) -> MatrixKind {
        match self {
            EstimateSource::Correlation => MatrixKind::SparseEstimate,
            EstimateSource::CrossCorrelation => MatrixKind::CrossCorrelation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageMode {
    /// Dense below [`DENSE_LIMIT`] nodes, triplets at or above.
    #[default]
    Auto,
    Dense,
    Triplets,
}

impl StorageMode {
    fn dense_for(self, p: usize) -> bool {
        match self {
            StorageMode::Auto => p < DENSE_LIMIT,
            StorageMode::Dense => true,
            StorageMode::Triplets => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EstimateStorage {
    Dense(SymmetricMatrix),
    /// Nonzero entries only. Symmetric estimates keep `i < j`; cross
    /// estimates keep every ordered pair including `i = j`. The diagonal of a
    /// sparse correlation is implicitly one.
    Triplets {
        dim: usize,
        entries: Vec<(u32, u32, f64)>,
    },
}

/// Soft-thresholded (cross-)correlation at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    storage: EstimateStorage,
    lambda: f64,
    nnz: usize,
    source: EstimateSource,
}

impl SparseEstimate {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of nonzero off-diagonal entries, counting `(i, j)` and `(j, i)`
    /// separately.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn source(&self) -> EstimateSource {
        self.source
    }

    pub fn storage(&self) -> &EstimateStorage {
        &self.storage
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            EstimateStorage::Dense(m) => m.dim(),
            EstimateStorage::Triplets { dim, .. } => *dim,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            EstimateStorage::Dense(m) => m[(i, j)],
            EstimateStorage::Triplets { entries, .. } => {
                if self.source == EstimateSource::Correlation {
                    if i == j {
                        return 1.0;
                    }
                    let key = (i.min(j) as u32, i.max(j) as u32);
                    lookup(entries, key)
                } else {
                    lookup(entries, (i as u32, j as u32))
                }
            }
        }
    }

    /// Nonzero entries as `(i, j, value)`: the strict upper triangle for
    /// sparse correlations, every ordered pair for cross-correlations.
    pub fn nonzeros(&self) -> Vec<(usize, usize, f64)> {
        match &self.storage {
            EstimateStorage::Triplets { entries, .. } => entries
                .iter()
                .map(|&(i, j, v)| (i as usize, j as usize, v))
                .collect(),
            EstimateStorage::Dense(m) => {
                let p = m.dim();
                let mut out = Vec::new();
                for i in 0..p {
                    let start = if self.source == EstimateSource::Correlation { i + 1 } else { 0 };
                    for j in start..p {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        match &self.storage {
            EstimateStorage::Dense(m) => m.clone(),
            EstimateStorage::Triplets { dim, entries } => {
                let mut d = nalgebra::DMatrix::zeros(*dim, *dim);
                for &(i, j, v) in entries {
                    d[(i as usize, j as usize)] = v;
                }
                if self.source == EstimateSource::Correlation {
                    d.fill_diagonal(1.0);
                }
                SymmetricMatrix::from_upper(d, self.source.estimate_kind()).with_lambda(self.lambda)
            }
        }
    }
}

fn lookup(entries: &[(u32, u32, f64)], key: (u32, u32)) -> f64 {
    entries
        .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
        .map_or(0.0, |k| entries[k].2)
}

/// Sparse correlation at λ: soft-thresholds every off-diagonal entry and
/// keeps the diagonal at one.
pub fn sparse_correlation(corr: &SymmetricMatrix, lambda: f64) -> Result<SparseEstimate> {
    sparse_correlation_with(corr, lambda, StorageMode::Auto)
}

pub fn sparse_correlation_with(
    corr: &SymmetricMatrix,
    lambda: f64,
    mode: StorageMode,
) -> Result<SparseEstimate> {
    if corr.kind() != MatrixKind::Correlation {
        return Err(Error::InvalidArgument(format!(
            "sparse correlation needs a correlation matrix, got {:?}",
            corr.kind()
        )));
    }
    check_lambda(lambda)?;
    threshold_matrix(corr, lambda, EstimateSource::Correlation, mode)
}

/// Sparse cross-correlation at λ: soft-thresholds all `p²` entries, the
/// diagonal included.
pub fn sparse_cross_correlation(cross: &SymmetricMatrix, lambda: f64) -> Result<SparseEstimate> {
    sparse_cross_correlation_with(cross, lambda, StorageMode::Auto)
}

pub fn sparse_cross_correlation_with(
    cross: &SymmetricMatrix,
    lambda: f64,
    mode: StorageMode,
) -> Result<SparseEstimate> {
    if cross.kind() != MatrixKind::CrossCorrelation {
        return Err(Error::InvalidArgument(format!(
            "sparse cross-correlation needs a cross-correlation matrix, got {:?}",
            cross.kind()
        )));
    }
    check_lambda(lambda)?;
    threshold_matrix(cross, lambda, EstimateSource::CrossCorrelation, mode)
}

fn threshold_matrix(
    m: &SymmetricMatrix,
    lambda: f64,
    source: EstimateSource,
    mode: StorageMode,
) -> Result<SparseEstimate> {
    let p = m.dim();
    let input = m.as_matrix();
    let keep_diag = source == EstimateSource::Correlation;

    if mode.dense_for(p) {
        let mut out = nalgebra::DMatrix::<f64>::zeros(p, p);
        // Column-major: chunk j is column j. One pass reads, thresholds and
        // counts off-diagonal nonzeros.
        let nnz: usize = out
            .as_mut_slice()
            .par_chunks_mut(p)
            .zip(input.as_slice().par_chunks(p))
            .enumerate()
            .with_min_len((1 << 14) / p + 1)
            .map(|(j, (dst, src))| {
                let mut count = 0;
                for (d, &r) in dst.iter_mut().zip(src) {
                    *d = soft_threshold(r, lambda);
                    count = usize::wrapping_add(count, usize::from(*d != 0.0));
                }
                count -= usize::from(dst[j] != 0.0);
                if keep_diag {
                    dst[j] = 1.0;
                }
                count
            })
            .sum();
        let matrix = SymmetricMatrix::from_upper(out, source.estimate_kind()).with_lambda(lambda);
        return Ok(SparseEstimate {
            storage: EstimateStorage::Dense(matrix),
            lambda,
            nnz,
            source,
        });
    }

    // Row i of the triplet list, gathered in parallel then concatenated in
    // order so the result is independent of scheduling.
    let rows: Vec<Vec<(u32, u32, f64)>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let start = if keep_diag { i + 1 } else { 0 };
            (start..p)
                .filter_map(|j| {
                    let v = soft_threshold(input[(i, j)], lambda);
                    (v != 0.0).then_some((i as u32, j as u32, v))
                })
                .collect()
        })
        .collect();
    let entries: Vec<(u32, u32, f64)> = rows.into_iter().flatten().collect();
    let nnz = match source {
        EstimateSource::Correlation => 2 * entries.len(),
        EstimateSource::CrossCorrelation => entries.iter().filter(|&&(i, j, _)| i != j).count(),
    };
    Ok(SparseEstimate {
        storage: EstimateStorage::Triplets { dim: p, entries },
        lambda,
        nnz,
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum GridOrigin {
    Explicit,
    Uniform { count: usize, max: f64 },
    DataDriven { count: usize, max: f64 },
}

/// Strictly increasing, non-negative sparsity values.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
    origin: GridOrigin,
}

impl LambdaGrid {
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("grid contains non-finite values".into()));
        }
        if values[0] < 0.0 {
            return Err(Error::InvalidGrid(format!("first value {} is negative", values[0])));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            values,
            origin: GridOrigin::Explicit,
        })
    }

    /// `count` evenly spaced values from 0 to `max` inclusive.
    pub fn uniform(count: usize, max: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        if !(max.is_finite() && max > 0.0) {
            return Err(Error::InvalidGrid(format!("grid maximum must be positive, got {max}")));
        }
        Ok(Self {
            values: uniform_values(count, max),
            origin: GridOrigin::Uniform { count, max },
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn origin(&self) -> GridOrigin {
        self.origin
    }

    /// Keeps the points whose index is not in `skip`.
    pub fn without(&self, skip: &[usize]) -> Option<LambdaGrid> {
        let values: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .filter(|(t, _)| !skip.contains(t))
            .map(|(_, &v)| v)
            .collect();
        if values.is_empty() {
            return None;
        }
        Some(LambdaGrid {
            values,
            origin: GridOrigin::Explicit,
        })
    }
}

fn uniform_values(count: usize, max: f64) -> Vec<f64> {
    let last = (count - 1) as f64;
    (0..count)
        .map(|t| if t + 1 == count { max } else { max * t as f64 / last })
        .collect()
}

/// Uniform grid over `[0, max_{i≠j} |m_ij|]`. The top value empties every
/// threshold graph. An all-zero off-diagonal gives the degenerate grid `{0}`.
pub fn lambda_grid_from_data(m: &SymmetricMatrix, count: usize) -> Result<LambdaGrid> {
    if m.dim() < 2 {
        return Err(Error::EmptyMatrix);
    }
    if count < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
    }
    let max = m.max_off_diagonal_abs();
    if max == 0.0 {
        log::warn!("all off-diagonal entries are zero; using the degenerate grid {{0}}");
        return Ok(LambdaGrid {
            values: vec![0.0],
            origin: GridOrigin::DataDriven { count: 1, max },
        });
    }
    Ok(LambdaGrid {
        values: uniform_values(count, max),
        origin: GridOrigin::DataDriven { count, max },
    })
}
