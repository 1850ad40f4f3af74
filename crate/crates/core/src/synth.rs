//! Reproducible synthetic data sets.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Structure {
    /// Independent standard normal entries.
    IidNormal,
    /// `blocks` contiguous node groups; unit variances, correlation `within`
    /// inside a group and `between` across groups.
    PlantedBlocks { blocks: usize, within: f64, between: f64 },
    /// Gaussian with tridiagonal precision: unit diagonal and `−coupling`
    /// next to it, so neighbouring nodes have partial correlation `coupling`.
    ChainPrecision { coupling: f64 },
}

/// Block index of node `j` when `p` nodes are split into `k` contiguous,
/// nearly equal groups.
pub fn block_of(j: usize, p: usize, k: usize) -> usize {
    j * k / p
}

pub fn planted_covariance(p: usize, blocks: usize, within: f64, between: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if block_of(i, p, blocks) == block_of(j, p, blocks) {
            within
        } else {
            between
        }
    })
}

pub fn chain_precision(p: usize, coupling: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            -coupling
        } else {
            0.0
        }
    })
}

/// `n` draws of `p` nodes. Same arguments, same matrix, bit for bit.
pub fn synth_data(n: usize, p: usize, structure: Structure, seed: u64) -> Result<DataMatrix> {
    if n < 2 || p < 2 {
        return Err(Error::InvalidStructureParams(format!("need n ≥ 2 and p ≥ 2, got n = {n}, p = {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, p, |_, _| 0.0);
    let mut z = z;
    // Row-major draw order keeps rows stable if p changes.
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let covariance = match structure {
        Structure::IidNormal => return DataMatrix::new(z),
        Structure::PlantedBlocks { blocks, within, between } => {
            if blocks == 0 || blocks > p {
                return Err(Error::InvalidStructureParams(format!("{blocks} blocks for {p} nodes")));
            }
            if !(within.abs() < 1.0 && between.abs() < 1.0) {
                return Err(Error::InvalidStructureParams("correlations must lie in (−1, 1)".into()));
            }
            planted_covariance(p, blocks, within, between)
        }
        Structure::ChainPrecision { coupling } => {
            let precision = chain_precision(p, coupling);
            precision.try_inverse().ok_or_else(|| {
                Error::InvalidStructureParams(format!("chain precision with coupling {coupling} is singular"))
            })?
        }
    };
    let chol = covariance.cholesky().ok_or_else(|| {
        Error::InvalidStructureParams(format!("implied covariance for {structure:?} is not positive definite"))
    })?;
    // Rows z_i ~ N(0, I) become z_i Lᵀ ~ N(0, LLᵀ).
    DataMatrix::new(z * chol.l().transpose())
}
