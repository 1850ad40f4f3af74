//! Sparse correlation networks: soft-thresholded correlation and
//! cross-correlation estimates, graphical LASSO with block screening,
//! partial correlations and persistent-homology style graph filtrations.

pub mod bench;
pub mod data;
pub mod error;
pub mod filtration;
pub mod glasso;
pub mod io;
mod lasso;
pub mod partial;
pub mod synth;
pub mod threshold;

pub use data::{
    rank_diagnostic, sample_cross_correlation, ConstantColumns, DataMatrix, MatrixKind, Normalization,
    RankDiagnostic, SymmetricMatrix,
};
pub use error::{Error, Result};
pub use filtration::{
    block_permutation, build_filtration, connected_components, glasso_filtration, threshold_adjacency,
    verify_nestedness, zero_pattern_adjacency, AdjacencyMatrix, BlockPermutation, FiltrationResult,
    GraphPartition, Nestedness,
};
pub use glasso::{glasso_fit, glasso_fit_screened, glasso_path, penalized_loglik, GlassoOptions, GlassoSolution};
pub use partial::{
    nodewise_lasso, nodewise_lse, partial_from_precision, partial_from_residuals, sparse_partial_network,
    EdgeRule, PartialCorrelationMatrix,
};
pub use synth::{synth_data, Structure};
pub use threshold::{
    lambda_grid_from_data, soft_threshold, sparse_correlation, sparse_cross_correlation, LambdaGrid,
    SparseEstimate,
};
