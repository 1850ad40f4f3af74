//! Graphical LASSO: sparse inverse covariance by maximizing
//! `log det Θ − tr(ΘS) − λ‖Θ‖₁`.
//!
//! The solver is block coordinate descent over columns on the precision
//! matrix itself. For column `j`, with the rest of `Θ` held fixed, the
//! optimal off-diagonal column solves the LASSO
//!
//! ```text
//! min_θ  ½ θᵀ (w_jj A) θ + s_jᵀ θ + λ‖θ‖₁,   A = Θ_{−j,−j}⁻¹,  w_jj = s_jj + λ
//! ```
//!
//! and the diagonal entry then has the closed form
//! `θ_jj = 1/w_jj + θᵀAθ`. Both `Θ` and `W = Θ⁻¹` are updated in place by
//! block inversion, so every iterate is positive definite and the penalized
//! log-likelihood never decreases from one column update to the next.
//!
//! Starting from a diagonal `Θ`, any column whose off-diagonal sample
//! covariances all satisfy `|s_ij| ≤ λ` across a screening block stays
//! exactly zero, which is what makes [`screen_partition`] and the block-wise
//! solve in [`glasso_fit_screened`] exact.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{MatrixKind, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::filtration::{connected_components, threshold_adjacency, GraphPartition};
use crate::lasso::quadratic_lasso;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GlassoOptions {
    /// Stop when the largest change in `W` over a sweep, relative to the mean
    /// `|s_ii|`, and the KKT residual are both at most `tol`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Penalize the diagonal of `Θ` as well (the full `‖Θ‖₁`). When false
    /// only off-diagonal entries are penalized.
    pub penalize_diagonal: bool,
    /// Coordinate-descent passes allowed per column subproblem.
    pub max_inner_passes: usize,
    /// Solve screening blocks independently in [`glasso_path`].
    pub screening: bool,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 200,
            penalize_diagonal: true,
            max_inner_passes: 10_000,
            screening: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BlockFit {
    pub nodes: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoSolution {
    pub precision: SymmetricMatrix,
    /// `W = Θ⁻¹`, recomputed from the returned precision.
    pub covariance: SymmetricMatrix,
    pub lambda: f64,
    /// Penalized log-likelihood at the returned precision.
    pub objective: f64,
    /// Outer sweeps performed (largest over blocks when screened).
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Objective after each sweep, starting with the initial iterate.
    pub objective_trace: Vec<f64>,
    /// Per-block reports from a screened solve; empty otherwise.
    pub blocks: Vec<BlockFit>,
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky(m)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn objective_with(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64, penalize_diagonal: bool) -> Result<f64> {
    let log_det = log_det_spd(theta)?;
    let trace = theta.component_mul(s).sum();
    let mut l1 = theta.iter().map(|v| v.abs()).sum::<f64>();
    if !penalize_diagonal {
        l1 -= theta.diagonal().iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok(log_det - trace - lambda * l1)
}

/// `log det Θ − tr(ΘS) − λ Σ_ij |θ_ij|`, the diagonal included.
pub fn penalized_loglik(precision: &SymmetricMatrix, s: &SymmetricMatrix, lambda: f64) -> Result<f64> {
    check_same_dim(precision, s)?;
    objective_with(precision.as_matrix(), s.as_matrix(), lambda, true)
}

fn check_same_dim(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}×{0}", a.dim()),
            got: format!("{0}×{0}", b.dim()),
        });
    }
    Ok(())
}

/// Largest violation of the optimality conditions
/// `W_ij − S_ij = λ·sign(θ_ij)` (for `θ_ij ≠ 0`) and `|W_ij − S_ij| ≤ λ`
/// (for `θ_ij = 0`). Unpenalized diagonal entries must satisfy `W_ii = S_ii`.
pub fn kkt_residual(
    precision: &DMatrix<f64>,
    covariance: &DMatrix<f64>,
    s: &DMatrix<f64>,
    lambda: f64,
    penalize_diagonal: bool,
) -> f64 {
    let p = s.nrows();
    let mut worst = 0.0_f64;
    for j in 0..p {
        for i in 0..p {
            let g = covariance[(i, j)] - s[(i, j)];
            let t = precision[(i, j)];
            let v = if i == j && !penalize_diagonal {
                g.abs()
            } else if t > 0.0 {
                (g - lambda).abs()
            } else if t < 0.0 {
                (g + lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

fn validate(s: &SymmetricMatrix, lambda: f64, opts: &GlassoOptions) -> Result<()> {
    if !s.is_symmetric_kind() {
        return Err(Error::InvalidArgument("GLASSO needs a symmetric matrix".into()));
    }
    if s.dim() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    for j in 0..s.dim() {
        let d = s[(j, j)];
        if d < 0.0 {
            return Err(Error::InvalidArgument(format!("S has negative diagonal entry {d} at {j}")));
        }
        if diag_target(d, lambda, opts.penalize_diagonal) <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry {j} of S plus its penalty is not positive"
            )));
        }
    }
    if lambda == 0.0 {
        // No regularization: the estimate exists only for positive definite S.
        cholesky(s.as_matrix())?;
    }
    Ok(())
}

#[inline]
fn diag_target(s_jj: f64, lambda: f64, penalize_diagonal: bool) -> f64 {
    if penalize_diagonal {
        s_jj + lambda
    } else {
        s_jj
    }
}

/// Fits GLASSO on the full matrix from a diagonal start.
pub fn glasso_fit(s: &SymmetricMatrix, lambda: f64, opts: &GlassoOptions) -> Result<GlassoSolution> {
    glasso_fit_warm(s, lambda, opts, None)
}

/// Like [`glasso_fit`] but starts from `warm`, a positive definite precision
/// matrix (typically the solution at a nearby λ).
pub fn glasso_fit_warm(
    s: &SymmetricMatrix,
    lambda: f64,
    opts: &GlassoOptions,
    warm: Option<&DMatrix<f64>>,
) -> Result<GlassoSolution> {
    validate(s, lambda, opts)?;
    let sm = s.as_matrix();
    let p = s.dim();
    let targets: Vec<f64> = (0..p)
        .map(|j| diag_target(sm[(j, j)], lambda, opts.penalize_diagonal))
        .collect();

    let (mut theta, mut w) = match warm {
        Some(t0) => {
            if t0.nrows() != p || t0.ncols() != p {
                return Err(Error::ShapeMismatch {
                    expected: format!("{p}×{p} warm start"),
                    got: format!("{}×{}", t0.nrows(), t0.ncols()),
                });
            }
            let w0 = cholesky(t0)?.inverse();
            (t0.clone(), symmetrize(w0))
        }
        None => (
            DMatrix::from_diagonal(&DVector::from_iterator(p, targets.iter().map(|t| 1.0 / t))),
            DMatrix::from_diagonal(&DVector::from_vec(targets.clone())),
        ),
    };

    let scale = {
        let m = sm.diagonal().iter().map(|d| d.abs()).sum::<f64>() / p as f64;
        if m > 0.0 { m } else { 1.0 }
    };
    let inner_tol = 1e-2 * opts.tol;

    let mut trace = vec![objective_with(&theta, sm, lambda, opts.penalize_diagonal)?];
    let mut converged = false;
    let mut sweeps = 0;

    if p > 1 {
        let mut a = DMatrix::<f64>::zeros(p - 1, p - 1);
        let mut c = DVector::<f64>::zeros(p - 1);
        let mut beta = DVector::<f64>::zeros(p - 1);
        let mut idx: Vec<usize> = Vec::with_capacity(p - 1);

        for sweep in 1..=opts.max_sweeps {
            sweeps = sweep;
            let w_before = w.clone();
            for j in 0..p {
                idx.clear();
                idx.extend((0..p).filter(|&k| k != j));
                let wjj = w[(j, j)];
                // A = Θ_{-j,-j}⁻¹ = W11 − w12 w12ᵀ / w22.
                for (bb, &ib) in idx.iter().enumerate() {
                    for (aa, &ia) in idx.iter().enumerate() {
                        a[(aa, bb)] = w[(ia, ib)] - w[(ia, j)] * w[(ib, j)] / wjj;
                    }
                    c[bb] = sm[(ib, j)];
                    beta[bb] = theta[(ib, j)];
                }
                let wt = targets[j];
                let q = &a * wt;
                quadratic_lasso(&q, &c, lambda, &mut beta, inner_tol, opts.max_inner_passes);

                let u = &a * &beta;
                theta[(j, j)] = 1.0 / wt + beta.dot(&u);
                for (aa, &ia) in idx.iter().enumerate() {
                    theta[(ia, j)] = beta[aa];
                    theta[(j, ia)] = beta[aa];
                }
                w[(j, j)] = wt;
                for (bb, &ib) in idx.iter().enumerate() {
                    let v = -wt * u[bb];
                    w[(ib, j)] = v;
                    w[(j, ib)] = v;
                    for (aa, &ia) in idx.iter().enumerate() {
                        w[(ia, ib)] = a[(aa, bb)] + wt * u[aa] * u[bb];
                    }
                }
            }

            let obj = objective_with(&theta, sm, lambda, opts.penalize_diagonal)?;
            let prev = *trace.last().expect("trace starts non-empty");
            debug_assert!(
                obj >= prev - 1e-9 * (1.0 + prev.abs()),
                "objective decreased across a sweep: {prev} -> {obj}"
            );
            trace.push(obj);

            let delta = (&w - &w_before).amax() / scale;
            let kkt = kkt_residual(&theta, &w, sm, lambda, opts.penalize_diagonal);
            if delta <= opts.tol && kkt <= opts.tol {
                converged = true;
                break;
            }
        }
    } else {
        converged = true;
    }

    finish(s, lambda, opts, theta, sweeps, converged, trace)
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn finish(
    s: &SymmetricMatrix,
    lambda: f64,
    opts: &GlassoOptions,
    theta: DMatrix<f64>,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
) -> Result<GlassoSolution> {
    let sm = s.as_matrix();
    let w = symmetrize(cholesky(&theta)?.inverse());
    let kkt = kkt_residual(&theta, &w, sm, lambda, opts.penalize_diagonal);
    let objective = objective_with(&theta, sm, lambda, opts.penalize_diagonal)?;
    Ok(GlassoSolution {
        precision: SymmetricMatrix::from_upper(theta, MatrixKind::Precision).with_lambda(lambda),
        covariance: SymmetricMatrix::from_upper(w, MatrixKind::Covariance).with_lambda(lambda),
        lambda,
        objective,
        iterations,
        converged,
        kkt_residual: kkt,
        objective_trace,
        blocks: Vec::new(),
    })
}

/// Connected components of `{(i, j) : i ≠ j, |s_ij| > λ}`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ScreeningPartition {
    partition: GraphPartition,
}

impl ScreeningPartition {
    pub fn labels(&self) -> &[usize] {
        self.partition.labels()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        self.partition.components()
    }

    pub fn kappa(&self) -> usize {
        self.partition.kappa()
    }

    pub fn partition(&self) -> &GraphPartition {
        &self.partition
    }
}

/// Node blocks of the GLASSO solution at λ, read off the sample covariance.
/// The fitted precision is zero across blocks and the blocks coincide with
/// the components of its zero pattern.
pub fn screen_partition(s: &SymmetricMatrix, lambda: f64) -> ScreeningPartition {
    ScreeningPartition {
        partition: connected_components(&threshold_adjacency(s, lambda)),
    }
}

/// Screens, solves each block independently (in parallel), and assembles a
/// block-diagonal precision.
pub fn glasso_fit_screened(s: &SymmetricMatrix, lambda: f64, opts: &GlassoOptions) -> Result<GlassoSolution> {
    glasso_fit_screened_warm(s, lambda, opts, None)
}

pub fn glasso_fit_screened_warm(
    s: &SymmetricMatrix,
    lambda: f64,
    opts: &GlassoOptions,
    warm: Option<&DMatrix<f64>>,
) -> Result<GlassoSolution> {
    validate(s, lambda, opts)?;
    let screen = screen_partition(s, lambda);
    if screen.kappa() == 1 {
        return glasso_fit_warm(s, lambda, opts, warm);
    }

    let fits: Vec<Result<GlassoSolution>> = screen
        .blocks()
        .par_iter()
        .map(|nodes| {
            let sub = s.submatrix(nodes);
            let sub_warm = warm.map(|t| DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| t[(nodes[a], nodes[b])]));
            glasso_fit_warm(&sub, lambda, opts, sub_warm.as_ref())
        })
        .collect();

    let p = s.dim();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    let mut blocks = Vec::with_capacity(fits.len());
    let mut iterations = 0;
    let mut converged = true;
    for (nodes, fit) in screen.blocks().iter().zip(fits) {
        let fit = fit?;
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                theta[(i, j)] = fit.precision[(a, b)];
            }
        }
        iterations = iterations.max(fit.iterations);
        converged &= fit.converged;
        blocks.push(BlockFit {
            nodes: nodes.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            kkt_residual: fit.kkt_residual,
        });
    }
    let mut sol = finish(s, lambda, opts, theta, iterations, converged, Vec::new())?;
    sol.objective_trace = vec![sol.objective];
    sol.blocks = blocks;
    Ok(sol)
}

/// Solves at every λ in `lambdas`, largest first, warm starting each fit
/// from the previous successful one. Results are returned in input order.
pub fn glasso_path(
    s: &SymmetricMatrix,
    lambdas: &[f64],
    opts: &GlassoOptions,
) -> Result<Vec<Result<GlassoSolution>>> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut out: Vec<Option<Result<GlassoSolution>>> = (0..lambdas.len()).map(|_| None).collect();
    let mut warm: Option<DMatrix<f64>> = None;
    for t in order {
        let lambda = lambdas[t];
        let fit = if opts.screening {
            glasso_fit_screened_warm(s, lambda, opts, warm.as_ref())
        } else {
            glasso_fit_warm(s, lambda, opts, warm.as_ref())
        };
        if let Ok(sol) = &fit {
            if sol.converged {
                warm = Some(sol.precision.as_matrix().clone());
            }
        }
        out[t] = Some(fit);
    }
    Ok(out.into_iter().map(|r| r.expect("every index visited")).collect())
}
