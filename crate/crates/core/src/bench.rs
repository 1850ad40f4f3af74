//! Generic coordinate-descent LASSO and the soft-threshold vs LASSO runtime
//! comparison.
//!
//! [`reference_lasso`] knows nothing about orthogonality: it is the plain
//! iterative solver the closed form replaces, and doubles as the numerical
//! oracle the closed form is checked against.

use std::hint::black_box;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{sample_cross_correlation, DataMatrix};
use crate::error::{Error, Result};
use crate::synth::{synth_data, Structure};
use crate::threshold::{soft_threshold, sparse_cross_correlation_with, LambdaGrid, SparseEstimate, StorageMode};

/// A design column whose nonzeros occupy `offset .. offset + values.len()`.
#[derive(Debug, Clone, Copy)]
pub struct DesignColumn<'a> {
    pub offset: usize,
    pub values: &'a [f64],
}

impl<'a> DesignColumn<'a> {
    pub fn dense(values: &'a [f64]) -> Self {
        Self { offset: 0, values }
    }

    fn dot(&self, v: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&v[self.offset..self.offset + self.values.len()])
            .map(|(a, b)| a * b)
            .sum()
    }

    fn axpy(&self, alpha: f64, v: &mut [f64]) {
        for (a, b) in self.values.iter().zip(&mut v[self.offset..self.offset + self.values.len()]) {
            *b += alpha * a;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub passes: usize,
    pub kkt_residual: f64,
    /// KKT residual after each pass.
    pub kkt_trace: Vec<f64>,
}

pub const REFERENCE_MAX_PASSES: usize = 100_000;

/// `min ½‖target − Σ β_k c_k‖² + λ‖β‖₁` over dense columns.
pub fn reference_lasso(columns: &[Vec<f64>], target: &[f64], lambda: f64, tol: f64) -> Result<LassoFit> {
    for (k, c) in columns.iter().enumerate() {
        if c.len() != target.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("columns of length {}", target.len()),
                got: format!("column {k} of length {}", c.len()),
            });
        }
    }
    let cols: Vec<DesignColumn<'_>> = columns.iter().map(|c| DesignColumn::dense(c)).collect();
    reference_lasso_columns(&cols, target, lambda, tol, REFERENCE_MAX_PASSES)
}

/// Cyclic coordinate descent in fixed column order until the KKT residual
/// is at most `tol`.
pub fn reference_lasso_columns(
    columns: &[DesignColumn<'_>],
    target: &[f64],
    lambda: f64,
    tol: f64,
    max_passes: usize,
) -> Result<LassoFit> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteScalar(f64::NAN));
    }
    for (k, c) in columns.iter().enumerate() {
        if c.offset + c.values.len() > target.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("column support within {}", target.len()),
                got: format!("column {k} ends at {}", c.offset + c.values.len()),
            });
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScalar(f64::NAN));
        }
    }

    let sq_norms: Vec<f64> = columns.iter().map(|c| c.values.iter().map(|v| v * v).sum()).collect();
    let mut beta = vec![0.0; columns.len()];
    let mut residual = target.to_vec();
    let mut kkt_trace = Vec::new();

    let kkt_of = |residual: &[f64], beta: &[f64]| -> f64 {
        columns
            .iter()
            .zip(beta)
            .map(|(c, &b)| {
                let g = c.dot(residual);
                if b > 0.0 {
                    (g - lambda).abs()
                } else if b < 0.0 {
                    (g + lambda).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    };

    for pass in 1..=max_passes {
        for (k, c) in columns.iter().enumerate() {
            if sq_norms[k] == 0.0 {
                continue;
            }
            let rho = c.dot(&residual) + sq_norms[k] * beta[k];
            let new = soft_threshold(rho, lambda) / sq_norms[k];
            let delta = new - beta[k];
            if delta != 0.0 {
                c.axpy(-delta, &mut residual);
                beta[k] = new;
            }
        }
        residual.copy_from_slice(target);
        for (c, &b) in columns.iter().zip(&beta) {
            if b != 0.0 {
                c.axpy(-b, &mut residual);
            }
        }
        let kkt = kkt_of(&residual, &beta);
        kkt_trace.push(kkt);
        if kkt <= tol {
            return Ok(LassoFit {
                coefficients: beta,
                passes: pass,
                kkt_residual: kkt,
                kkt_trace,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_passes,
        residual: kkt_trace.last().copied().unwrap_or(f64::NAN),
    })
}

/// The stacked cross-correlation regression: target `1_p ⊗ vec(Y)` and one
/// column per coefficient `b_ij`, namely `x(v_i)` placed against `y(v_j)` in
/// the `i`-th copy of `vec(Y)`. Only the column supports are stored.
pub struct StackedProblem<'a> {
    pub target: Vec<f64>,
    pub columns: Vec<DesignColumn<'a>>,
    /// `(i, j)` for each column.
    pub index: Vec<(usize, usize)>,
    pub p: usize,
}

pub fn stacked_cross_problem<'a>(x: &'a DataMatrix, y: &DataMatrix) -> Result<StackedProblem<'a>> {
    if x.n() != y.n() || x.p() != y.p() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}×{}", x.n(), x.p()),
            got: format!("{}×{}", y.n(), y.p()),
        });
    }
    let (n, p) = (x.n(), x.p());
    let vec_y = y.values().as_slice();
    let mut target = Vec::with_capacity(n * p * p);
    for _ in 0..p {
        target.extend_from_slice(vec_y);
    }
    let xs = x.values().as_slice();
    let mut columns = Vec::with_capacity(p * p);
    let mut index = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            columns.push(DesignColumn {
                offset: i * n * p + j * n,
                values: &xs[i * n..(i + 1) * n],
            });
            index.push((i, j));
        }
    }
    Ok(StackedProblem { target, columns, index, p })
}

/// The stacked sparse-correlation regression: one column per ordered pair
/// `(j, k)`, `k ≠ j`, regressing `x_j` on `x_k`.
pub fn stacked_correlation_problem(x: &DataMatrix) -> StackedProblem<'_> {
    let (n, p) = (x.n(), x.p());
    let xs = x.values().as_slice();
    let mut target = Vec::with_capacity(n * p * (p - 1));
    let mut columns = Vec::with_capacity(p * (p - 1));
    let mut index = Vec::with_capacity(p * (p - 1));
    for j in 0..p {
        for k in 0..p {
            if k == j {
                continue;
            }
            columns.push(DesignColumn {
                offset: target.len(),
                values: &xs[k * n..(k + 1) * n],
            });
            target.extend_from_slice(&xs[j * n..(j + 1) * n]);
            index.push((j, k));
        }
    }
    StackedProblem { target, columns, index, p }
}

impl StackedProblem<'_> {
    /// Solves with [`reference_lasso_columns`] and scatters the coefficients
    /// into a `p × p` matrix (unfitted entries stay zero).
    pub fn solve(&self, lambda: f64, tol: f64) -> Result<DMatrix<f64>> {
        let fit = reference_lasso_columns(&self.columns, &self.target, lambda, tol, REFERENCE_MAX_PASSES)?;
        let mut out = DMatrix::zeros(self.p, self.p);
        for (&(i, j), b) in self.index.iter().zip(fit.coefficients) {
            out[(i, j)] = b;
        }
        Ok(out)
    }
}

/// Solver tolerance for the LASSO side of the benchmark.
pub const BENCH_LASSO_TOL: f64 = 1e-10;
/// A report is valid only if the two methods agree this closely.
pub const BENCH_AGREEMENT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchCell {
    pub n: usize,
    pub p: usize,
    /// Seconds per full grid sweep.
    pub t_soft: f64,
    pub t_lasso: f64,
    pub ratio: f64,
    /// Max-norm difference between the two solutions over the grid.
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchReport {
    pub methods: (String, String),
    pub seed: u64,
    pub grid: Vec<f64>,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,p,t_soft,t_lasso,ratio,agreement\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.n,
                c.p,
                crate::io::fmt_f64(c.t_soft),
                crate::io::fmt_f64(c.t_lasso),
                crate::io::fmt_f64(c.ratio),
                crate::io::fmt_f64(c.agreement)
            ));
        }
        s
    }
}

/// Repeats `f` until at least `budget` has elapsed (and at least once);
/// returns mean seconds per call.
fn time_per_call<T>(budget: Duration, mut f: impl FnMut() -> T) -> f64 {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        black_box(f());
        calls += 1;
        let elapsed = start.elapsed();
        if elapsed >= budget {
            return elapsed.as_secs_f64() / f64::from(calls);
        }
    }
}

// Both paths hand each λ's estimate to `sink` as soon as it is ready, so a
// timed sweep holds one estimate at a time, the way a filtration consumes
// them.
fn soft_path(x: &DataMatrix, y: &DataMatrix, grid: &[f64], mut sink: impl FnMut(SparseEstimate)) -> Result<()> {
    let cross = sample_cross_correlation(x, y)?;
    for &l in grid {
        sink(sparse_cross_correlation_with(&cross, l, StorageMode::Dense)?);
    }
    Ok(())
}

/// The numerical baseline: every `(i, j, λ)` problem handed to the generic
/// solver as its own one-column LASSO.
fn lasso_path(x: &DataMatrix, y: &DataMatrix, grid: &[f64], mut sink: impl FnMut(DMatrix<f64>)) -> Result<()> {
    let p = x.p();
    let n = x.n();
    let xs = x.values().as_slice();
    let ys = y.values().as_slice();
    for &l in grid {
        let mut out = DMatrix::zeros(p, p);
        for j in 0..p {
            let target = &ys[j * n..(j + 1) * n];
            for i in 0..p {
                let col = [DesignColumn::dense(&xs[i * n..(i + 1) * n])];
                let fit = reference_lasso_columns(&col, target, l, BENCH_LASSO_TOL, REFERENCE_MAX_PASSES)?;
                out[(i, j)] = fit.coefficients[0];
            }
        }
        sink(out);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    /// Minimum wall time spent timing each path per cell.
    pub budget: Duration,
    /// Worker threads for the timed runs; one keeps measurements stable.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            budget: Duration::from_millis(200),
            threads: 1,
        }
    }
}

/// Times closed-form soft-thresholding against the generic LASSO on paired
/// standard-normal data for every `(n, p)` cell, over the same λ grid.
/// Fails with [`Error::AgreementFailure`] if any cell's solutions differ by
/// more than [`BENCH_AGREEMENT_TOL`].
pub fn bench_sparse_cross(
    ns: &[usize],
    ps: &[usize],
    grid: &LambdaGrid,
    seed: u64,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    if ns.is_empty() || ps.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one n and one p".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| bench_cells(ns, ps, grid, seed, opts))
}

fn bench_cells(ns: &[usize], ps: &[usize], grid: &LambdaGrid, seed: u64, opts: &BenchOptions) -> Result<BenchReport> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    for &n in ns {
        for &p in ps {
            let (sx, sy): (u64, u64) = (master.random(), master.random());
            let x = synth_data(n, p, Structure::IidNormal, sx)?.normalize()?;
            let y = synth_data(n, p, Structure::IidNormal, sy)?.normalize()?;

            let mut soft = Vec::new();
            soft_path(&x, &y, grid.values(), |e| soft.push(e))?;
            let mut lasso = Vec::new();
            lasso_path(&x, &y, grid.values(), |m| lasso.push(m))?;
            let agreement = soft
                .iter()
                .zip(&lasso)
                .map(|(a, b)| (a.to_dense().into_matrix() - b).amax())
                .fold(0.0, f64::max);
            if agreement > BENCH_AGREEMENT_TOL {
                return Err(Error::AgreementFailure {
                    n,
                    p,
                    diff: agreement,
                    tol: BENCH_AGREEMENT_TOL,
                });
            }
            let t_soft = time_per_call(opts.budget, || soft_path(&x, &y, grid.values(), |e| drop(black_box(e))));
            let t_lasso = time_per_call(opts.budget, || lasso_path(&x, &y, grid.values(), |m| drop(black_box(m))));
            cells.push(BenchCell {
                n,
                p,
                t_soft,
                t_lasso,
                ratio: t_lasso / t_soft,
                agreement,
            });
        }
    }
    Ok(BenchReport {
        methods: ("soft-threshold".into(), "reference-lasso".into()),
        seed,
        grid: grid.values().to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns_are_soft_thresholded() {
        let c1 = vec![1.0, 0.0, 0.0];
        let c2 = vec![0.0, 0.6, 0.8];
        let t = vec![0.9, -0.3, 0.5];
        let fit = reference_lasso(&[c1.clone(), c2.clone()], &t, 0.2, 1e-12).unwrap();
        let z1: f64 = c1.iter().zip(&t).map(|(a, b)| a * b).sum();
        let z2: f64 = c2.iter().zip(&t).map(|(a, b)| a * b).sum();
        assert!((fit.coefficients[0] - soft_threshold(z1, 0.2)).abs() < 1e-12);
        assert!((fit.coefficients[1] - soft_threshold(z2, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn null_threshold_gives_zero() {
        let cols = vec![vec![1.0, 2.0, 0.5], vec![-1.0, 0.3, 2.0]];
        let t = vec![0.2, 0.1, -0.3];
        let max_corr = cols
            .iter()
            .map(|c| c.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let fit = reference_lasso(&cols, &t, max_corr + 1e-9, 1e-12).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert_eq!(fit.passes, 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(reference_lasso(&[vec![1.0, 2.0]], &[1.0], 0.1, 1e-9).is_err());
        assert!(reference_lasso(&[vec![1.0]], &[1.0], -0.1, 1e-9).is_err());
        assert!(reference_lasso(&[vec![1.0]], &[1.0], 0.1, 0.0).is_err());
        assert!(reference_lasso(&[vec![f64::NAN]], &[1.0], 0.1, 1e-9).is_err());
    }

    #[test]
    fn not_converged_when_passes_exhausted() {
        let cols = vec![vec![1.0, 0.99, 0.0], vec![1.0, 1.0, 0.01]];
        let c: Vec<DesignColumn<'_>> = cols.iter().map(|c| DesignColumn::dense(c)).collect();
        let r = reference_lasso_columns(&c, &[1.0, 2.0, 3.0], 0.01, 1e-14, 2);
        assert!(matches!(r, Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn small_bench_agrees_and_reports() {
        let grid = LambdaGrid::uniform(4, 0.6).unwrap();
        let opts = BenchOptions {
            budget: Duration::from_millis(1),
            threads: 1,
        };
        let report = bench_sparse_cross(&[5], &[2, 3], &grid, 42, &opts).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert!(report.cells.iter().all(|c| c.agreement <= BENCH_AGREEMENT_TOL));
        assert!(report.to_csv().starts_with("n,p,t_soft,t_lasso,ratio,agreement\n5,2,"));
    }
}
