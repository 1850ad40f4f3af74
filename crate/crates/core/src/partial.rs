//! Partial correlation networks.
//!
//! Three routes:
//!
//! * from a precision matrix, `ρ_ij = −σ^{ij} / √(σ^{ii} σ^{jj})`;
//! * from least-squares residuals of each node regressed on all others;
//! * from L1-penalized node-wise regressions when `n ≤ p`.
//!
//! For the residual route, each `r_i` comes from regressing `x_i` on every
//! other node, `x_j` included. Those residuals satisfy
//! `corr(r_i, r_j) = σ^{ij} / √(σ^{ii} σ^{jj})`, so the partial correlation is
//! the *negated* residual correlation. With that sign the two routes agree
//! to round-off whenever the sample covariance is invertible.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{DataMatrix, Normalization, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::lasso::quadratic_lasso;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRule {
    /// Edge iff both `β_ij` and `β_ji` are nonzero.
    #[default]
    And,
    /// Edge iff either coefficient is nonzero.
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum PartialMethod {
    Precision,
    Residual,
    Sparse { lambda: f64, rule: EdgeRule },
}

/// Symmetric `p × p` matrix of partial correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrelationMatrix {
    rho: DMatrix<f64>,
    method: PartialMethod,
}

impl PartialCorrelationMatrix {
    pub fn method(&self) -> PartialMethod {
        self.method
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[(i, j)]
    }

    /// Off-diagonal pairs `i < j` with `|ρ_ij| > threshold`.
    pub fn edges(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let p = self.dim();
        let mut out = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                let v = self.rho[(i, j)];
                if v.abs() > threshold {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for PartialCorrelationMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.rho[idx]
    }
}

/// `ρ_ij = −σ^{ij} / √(σ^{ii} σ^{jj})`, unit diagonal.
pub fn partial_from_precision(precision: &SymmetricMatrix) -> Result<PartialCorrelationMatrix> {
    let p = precision.dim();
    let m = precision.as_matrix();
    if let Some(i) = (0..p).find(|&i| !(m[(i, i)] > 0.0)) {
        return Err(Error::NonPositiveDiagonal(i));
    }
    let d: Vec<f64> = (0..p).map(|i| m[(i, i)].sqrt()).collect();
    let rho = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            -m[(i.min(j), i.max(j))] / (d[i] * d[j])
        }
    });
    Ok(PartialCorrelationMatrix {
        rho,
        method: PartialMethod::Precision,
    })
}

/// One node regressed on all the others.
#[derive(Debug, Clone, PartialEq)]
pub struct NodewiseRegression {
    pub node: usize,
    /// Length `p`; entry `node` is zero.
    pub coefficients: DVector<f64>,
    pub residual: DVector<f64>,
    /// Zero for least squares.
    pub lambda: f64,
    /// Least squares fell back to the pseudo-inverse.
    pub rank_deficient: bool,
    /// Coordinate-descent passes (zero for least squares).
    pub passes: usize,
}

impl NodewiseRegression {
    /// Column indices with nonzero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

fn others(p: usize, j: usize) -> Vec<usize> {
    (0..p).filter(|&k| k != j).collect()
}

fn require_centered(data: &DataMatrix) -> Result<()> {
    if data.normalization() == Normalization::Raw {
        return Err(Error::NotNormalized("node-wise regression needs centered data".into()));
    }
    Ok(())
}

fn check_node(data: &DataMatrix, node: usize) -> Result<()> {
    if node >= data.p() {
        return Err(Error::InvalidArgument(format!(
            "node {node} out of range for {} nodes",
            data.p()
        )));
    }
    if data.p() < 2 {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

fn residual_of(data: &DataMatrix, node: usize, beta: &DVector<f64>) -> DVector<f64> {
    data.column(node) - data.values() * beta
}

/// Least-squares regression of `x_node` on every other column. Requires
/// `n > p` unless `force_pinv` is set; a singular normal matrix falls back to
/// the pseudo-inverse and is flagged.
pub fn nodewise_lse(data: &DataMatrix, node: usize, force_pinv: bool) -> Result<NodewiseRegression> {
    require_centered(data)?;
    check_node(data, node)?;
    let (n, p) = (data.n(), data.p());
    if n <= p && !force_pinv {
        return Err(Error::Underdetermined { n, p });
    }
    let idx = others(p, node);
    let x = data.values();
    let xr = DMatrix::from_fn(n, p - 1, |i, k| x[(i, idx[k])]);
    let gram = xr.tr_mul(&xr);
    let rhs = xr.tr_mul(&data.column(node));

    let (sub, rank_deficient) = match gram.clone().cholesky() {
        Some(ch) if !force_pinv => (ch.solve(&rhs), false),
        _ => {
            let svd = gram.svd(true, true);
            let sol = svd
                .solve(&rhs, f64::EPSILON * (p as f64) * svd.singular_values.max())
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let full = svd.rank(f64::EPSILON * (p as f64) * svd.singular_values.max()) == p - 1;
            (sol, !full)
        }
    };
    let mut beta = DVector::zeros(p);
    for (k, &col) in idx.iter().enumerate() {
        beta[col] = sub[k];
    }
    let residual = residual_of(data, node, &beta);
    Ok(NodewiseRegression {
        node,
        coefficients: beta,
        residual,
        lambda: 0.0,
        rank_deficient,
        passes: 0,
    })
}

/// `ρ_ij = −corr(r_i, r_j)` from least-squares residuals; requires `n > p`.
pub fn partial_from_residuals(data: &DataMatrix) -> Result<PartialCorrelationMatrix> {
    partial_from_residuals_with(data, false)
}

/// [`partial_from_residuals`], optionally regressing through the
/// pseudo-inverse when `n ≤ p`.
pub fn partial_from_residuals_with(data: &DataMatrix, force_pinv: bool) -> Result<PartialCorrelationMatrix> {
    require_centered(data)?;
    let p = data.p();
    let fits: Vec<NodewiseRegression> = (0..p)
        .into_par_iter()
        .map(|j| nodewise_lse(data, j, force_pinv))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = fits.iter().map(|f| f.residual.norm()).collect();
    if let Some(j) = norms.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "node {j} is fitted exactly by the others; residual correlation undefined"
        )));
    }
    let mut rho = DMatrix::identity(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let c = fits[i].residual.dot(&fits[j].residual) / (norms[i] * norms[j]);
            rho[(i, j)] = -c;
            rho[(j, i)] = -c;
        }
    }
    Ok(PartialCorrelationMatrix {
        rho,
        method: PartialMethod::Residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NodewiseOptions {
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for NodewiseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_passes: 10_000,
        }
    }
}

fn require_unit_norm(data: &DataMatrix) -> Result<()> {
    if data.normalization() != Normalization::CenteredUnitNorm {
        return Err(Error::NotNormalized("node-wise LASSO needs centered unit-norm data".into()));
    }
    Ok(())
}

fn lasso_on_gram(
    gram: &DMatrix<f64>,
    data: &DataMatrix,
    node: usize,
    lambda: f64,
    opts: &NodewiseOptions,
) -> Result<NodewiseRegression> {
    let p = data.p();
    let idx = others(p, node);
    let q = DMatrix::from_fn(p - 1, p - 1, |a, b| gram[(idx[a], idx[b])]);
    let c = DVector::from_fn(p - 1, |a, _| -gram[(idx[a], node)]);
    let mut sub = DVector::zeros(p - 1);
    let out = quadratic_lasso(&q, &c, lambda, &mut sub, opts.tol, opts.max_passes);
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.passes,
            residual: out.kkt,
        });
    }
    let mut beta = DVector::zeros(p);
    for (k, &col) in idx.iter().enumerate() {
        beta[col] = sub[k];
    }
    Ok(NodewiseRegression {
        node,
        residual: residual_of(data, node, &beta),
        coefficients: beta,
        lambda,
        rank_deficient: false,
        passes: out.passes,
    })
}

/// `min ½‖x_node − X_{−node} β‖² + λ‖β‖₁` by cyclic coordinate descent.
pub fn nodewise_lasso(
    data: &DataMatrix,
    node: usize,
    lambda: f64,
    opts: &NodewiseOptions,
) -> Result<NodewiseRegression> {
    require_unit_norm(data)?;
    check_node(data, node)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    let gram = data.values().tr_mul(data.values());
    lasso_on_gram(&gram, data, node, lambda, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsePartialNetwork {
    pub rho: PartialCorrelationMatrix,
    /// Per-node regressions, `None` where the solver failed.
    pub regressions: Vec<Option<NodewiseRegression>>,
    pub failed_nodes: Vec<usize>,
}

impl SparsePartialNetwork {
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.rho.edges(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkOptions {
    pub rule: EdgeRule,
    /// Keep only positive weights.
    pub positive_only: bool,
    pub solver: NodewiseOptions,
}

/// Runs the node-wise LASSO for every node and symmetrizes.
///
/// Edge weight is `sign(β_ij)·√|β_ij β_ji|` (for `i < j`) clamped to
/// `[−1, 1]`. Under the OR rule a pair with a single nonzero coefficient
/// takes that coefficient, clamped. Nodes whose solver fails contribute no
/// edges and are listed in `failed_nodes`.
pub fn sparse_partial_network(data: &DataMatrix, lambda: f64, opts: &NetworkOptions) -> Result<SparsePartialNetwork> {
    require_unit_norm(data)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    let p = data.p();
    if p < 2 {
        return Err(Error::EmptyMatrix);
    }
    let gram = data.values().tr_mul(data.values());
    let fits: Vec<Result<NodewiseRegression>> = (0..p)
        .into_par_iter()
        .map(|j| lasso_on_gram(&gram, data, j, lambda, &opts.solver))
        .collect();

    let mut failed_nodes = Vec::new();
    let mut regressions = Vec::with_capacity(p);
    for (j, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(f) => regressions.push(Some(f)),
            Err(e) => {
                log::warn!("node {j}: {e}");
                failed_nodes.push(j);
                regressions.push(None);
            }
        }
    }
    let coef = |i: usize, j: usize| regressions[i].as_ref().map_or(0.0, |f| f.coefficients[j]);

    let mut rho = DMatrix::identity(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let (bij, bji) = (coef(i, j), coef(j, i));
            let w = match (bij != 0.0, bji != 0.0, opts.rule) {
                (true, true, _) => bij.signum() * (bij * bji).abs().sqrt(),
                (true, false, EdgeRule::Or) => bij,
                (false, true, EdgeRule::Or) => bji,
                _ => 0.0,
            };
            let mut w = w.clamp(-1.0, 1.0);
            if opts.positive_only && w < 0.0 {
                w = 0.0;
            }
            rho[(i, j)] = w;
            rho[(j, i)] = w;
        }
    }
    Ok(SparsePartialNetwork {
        rho: PartialCorrelationMatrix {
            rho,
            method: PartialMethod::Sparse {
                lambda,
                rule: opts.rule,
            },
        },
        regressions,
        failed_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MatrixKind;

    fn unit(rows: &[Vec<f64>]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap().normalize().unwrap()
    }

    #[test]
    fn diagonal_precision_has_no_partial_edges() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.5]));
        let rho = partial_from_precision(&SymmetricMatrix::from_upper(m, MatrixKind::Precision)).unwrap();
        assert_eq!(rho.as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two_precision() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let rho = partial_from_precision(&SymmetricMatrix::from_upper(m, MatrixKind::Precision)).unwrap();
        assert!((rho[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(rho[(0, 1)], rho[(1, 0)]);
    }

    #[test]
    fn non_positive_diagonal_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            partial_from_precision(&SymmetricMatrix::from_upper(m, MatrixKind::Precision)),
            Err(Error::NonPositiveDiagonal(1))
        ));
    }

    #[test]
    fn single_regressor_lse_is_correlation() {
        let d = unit(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![0.0, -1.0]]);
        let fit = nodewise_lse(&d, 0, false).unwrap();
        let c = d.column(0).dot(&d.column(1));
        assert!((fit.coefficients[1] - c).abs() < 1e-14);
        assert_eq!(fit.coefficients[0], 0.0);
    }

    #[test]
    fn orthogonal_target_has_zero_coefficients() {
        let d = unit(&[
            vec![1.0, 1.0, 1.0],
            vec![-1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let fit = nodewise_lse(&d, 0, false).unwrap();
        assert!(fit.coefficients.amax() < 1e-14);
        assert!((fit.residual.clone() - d.column(0)).amax() < 1e-14);
    }

    #[test]
    fn underdetermined_lse_is_an_error() {
        let d = unit(&[vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 1.0], vec![0.0, 1.0, 3.0]]);
        assert!(matches!(nodewise_lse(&d, 0, false), Err(Error::Underdetermined { n: 3, p: 3 })));
        let forced = nodewise_lse(&d, 0, true).unwrap();
        assert!(forced.residual.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn residual_route_needs_centered_data() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![0.0, 4.0]]).unwrap();
        assert!(matches!(partial_from_residuals(&d), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn lasso_null_threshold_and_single_regressor() {
        let d = unit(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![0.0, -1.0]]);
        let c = d.column(0).dot(&d.column(1));
        let opts = NodewiseOptions::default();
        let null = nodewise_lasso(&d, 0, c.abs() + 1e-3, &opts).unwrap();
        assert!(null.support().is_empty());
        let fit = nodewise_lasso(&d, 0, 0.1, &opts).unwrap();
        let want = crate::threshold::soft_threshold(c, 0.1);
        assert!((fit.coefficients[1] - want).abs() < 1e-12);
    }

    #[test]
    fn duplicated_columns_give_one_strong_edge() {
        let d = unit(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![-0.5, -0.5], vec![4.0, 4.0]]);
        let net = sparse_partial_network(&d, 0.05, &NetworkOptions::default()).unwrap();
        assert!((net.rho[(0, 1)] - 0.95).abs() < 1e-10);
        assert!(net.failed_nodes.is_empty());
    }

    #[test]
    fn network_requires_positive_lambda() {
        let d = unit(&[vec![1.0, 1.0], vec![2.0, 0.0], vec![-0.5, 3.0]]);
        assert!(sparse_partial_network(&d, 0.0, &NetworkOptions::default()).is_err());
    }
}
