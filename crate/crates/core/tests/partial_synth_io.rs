use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsenet::bench::{bench_sparse_cross, BenchOptions};
use sparsenet::data::{DataMatrix, MatrixKind, SymmetricMatrix};
use sparsenet::io::{read_data, write_matrix};
use sparsenet::partial::{
    nodewise_lasso, nodewise_lse, partial_from_precision, partial_from_residuals, sparse_partial_network,
    NetworkOptions, NodewiseOptions,
};
use sparsenet::synth::{block_of, chain_precision, synth_data, Structure};
use sparsenet::threshold::{soft_threshold, LambdaGrid};

fn normal(n: usize, p: usize, seed: u64) -> DataMatrix {
    synth_data(n, p, Structure::IidNormal, seed).unwrap()
}

/// `n` draws from `N(0, cov)`, centered.
fn gaussian(n: usize, cov: &DMatrix<f64>, seed: u64) -> DataMatrix {
    let z = normal(n, cov.nrows(), seed);
    let l = cov.clone().cholesky().unwrap().l();
    DataMatrix::new(z.values() * l.transpose()).unwrap().center()
}

fn lasso_objective(x: &DMatrix<f64>, target: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (target - x * beta).norm_squared() + lambda * beta.lp_norm(1)
}

/// Plain ISTA with step `1/L`, run until iterates stop moving.
fn ista(x: &DMatrix<f64>, target: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let gram = x.tr_mul(x);
    let lipschitz = gram.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / lipschitz;
    let mut beta = DVector::zeros(x.ncols());
    for _ in 0..1_000_000 {
        let grad = &gram * &beta - x.tr_mul(target);
        let next = (&beta - grad * step).map(|v| soft_threshold(v, step * lambda));
        let change = (&next - &beta).amax();
        beta = next;
        if change < 1e-13 {
            break;
        }
    }
    beta
}

#[test]
fn residual_route_tracks_population_partial_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() + DMatrix::identity(5, 5);
    let truth = partial_from_precision(&SymmetricMatrix::from_upper(
        cov.clone().try_inverse().unwrap(),
        MatrixKind::Precision,
    ))
    .unwrap();
    let empirical = partial_from_residuals(&gaussian(10_000, &cov, 2)).unwrap();
    assert!((truth.as_matrix() - empirical.as_matrix()).amax() <= 3e-2);
}

#[test]
fn least_squares_residuals_are_orthogonal_to_regressors() {
    let data = normal(50, 5, 3).center();
    for j in 0..5 {
        let fit = nodewise_lse(&data, j, false).unwrap();
        for k in (0..5).filter(|&k| k != j) {
            assert!(fit.residual.dot(&data.column(k)).abs() <= 1e-8);
        }
        let recomputed = data.column(j) - data.values() * &fit.coefficients;
        assert!((recomputed - &fit.residual).amax() <= 1e-10);
    }
}

#[test]
fn independent_columns_have_small_partial_correlation() {
    let n = 4000;
    let rho = partial_from_residuals(&normal(n, 4, 4).center()).unwrap();
    let band = 3.0 / (n as f64).sqrt();
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                assert!(rho[(i, j)].abs() <= band, "({i},{j}) = {}", rho[(i, j)]);
            }
        }
    }
}

#[test]
fn two_nodes_reduce_to_pearson_via_two_by_two_inverse() {
    let data = gaussian(30, &DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]), 5);
    let s = data.sample_covariance();
    let (a, b, c) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let det = a * c - b * b;
    // [[c, −b], [−b, a]] / det
    let oracle = -(-b / det) / ((c / det) * (a / det)).sqrt();
    let rho = partial_from_residuals(&data).unwrap();
    assert!((rho[(0, 1)] - oracle).abs() <= 1e-12);
    assert!((oracle - b / (a * c).sqrt()).abs() <= 1e-12);
}

#[test]
fn nodewise_lasso_objective_matches_ista() {
    let data = normal(6, 12, 6).normalize().unwrap();
    let lambda = 0.3;
    let opts = NodewiseOptions::default();
    for j in [0, 5, 11] {
        let fit = nodewise_lasso(&data, j, lambda, &opts).unwrap();
        let idx: Vec<usize> = (0..12).filter(|&k| k != j).collect();
        let x = DMatrix::from_fn(6, 11, |i, k| data.values()[(i, idx[k])]);
        let target: DVector<f64> = data.column(j).into_owned();
        let reference = ista(&x, &target, lambda);
        let ours = DVector::from_iterator(11, idx.iter().map(|&k| fit.coefficients[k]));
        let (a, b) = (lasso_objective(&x, &target, &ours, lambda), lasso_objective(&x, &target, &reference, lambda));
        assert!((a - b).abs() <= 1e-7, "node {j}: {a} vs {b}");
        // KKT at the returned point.
        let r = &target - &x * &ours;
        for k in 0..11 {
            let g = x.column(k).dot(&r);
            if ours[k] == 0.0 {
                assert!(g.abs() <= lambda + 1e-8);
            } else {
                assert!((g - lambda * ours[k].signum()).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn nodewise_lasso_support_shrinks_along_grid() {
    let data = gaussian(200, &chain_precision(5, 0.4).try_inverse().unwrap(), 7).normalize().unwrap();
    let opts = NodewiseOptions::default();
    for j in 0..5 {
        let mut previous: Option<Vec<usize>> = None;
        for t in 1..=10 {
            let support = nodewise_lasso(&data, j, 0.05 * t as f64, &opts).unwrap().support();
            if let Some(prev) = &previous {
                assert!(support.iter().all(|k| prev.contains(k)), "node {j}, step {t}");
            }
            previous = Some(support);
        }
    }
}

#[test]
fn chain_support_is_recovered() {
    let p = 6;
    let truth = partial_from_precision(&SymmetricMatrix::from_upper(chain_precision(p, 0.4), MatrixKind::Precision))
        .unwrap();
    let data = synth_data(80, p, Structure::ChainPrecision { coupling: 0.4 }, 42)
        .unwrap()
        .normalize()
        .unwrap();
    let net = sparse_partial_network(&data, 0.15, &NetworkOptions::default()).unwrap();
    assert!(net.failed_nodes.is_empty());
    for i in 0..p {
        for j in (i + 1)..p {
            let on_chain = truth[(i, j)].abs() > 1e-12;
            assert_eq!(net.rho[(i, j)].abs() > 0.05, on_chain, "({i},{j}) weight {}", net.rho[(i, j)]);
        }
    }
}

#[test]
fn planted_blocks_have_uncorrelated_cross_blocks() {
    let n = 10_000;
    let data = synth_data(n, 6, Structure::PlantedBlocks { blocks: 2, within: 0.7, between: 0.0 }, 8).unwrap();
    let corr = data.normalize().unwrap().sample_correlation().unwrap();
    let band = 3.0 / (n as f64).sqrt();
    for i in 0..6 {
        for j in 0..6 {
            if block_of(i, 6, 2) != block_of(j, 6, 2) {
                assert!(corr[(i, j)].abs() <= band);
            } else if i != j {
                assert!((corr[(i, j)] - 0.7).abs() <= 0.05);
            }
        }
    }
}

#[test]
fn chain_partial_correlations_sit_on_the_chain() {
    let data = synth_data(10_000, 4, Structure::ChainPrecision { coupling: 0.4 }, 9).unwrap().center();
    let rho = partial_from_residuals(&data).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            assert_eq!(rho[(i, j)].abs() > 0.05, j == i + 1, "({i},{j}) = {}", rho[(i, j)]);
        }
    }
}

#[test]
fn tiny_benchmark_favours_closed_form() {
    let grid = LambdaGrid::uniform(10, 0.9).unwrap();
    let opts = BenchOptions {
        budget: Duration::from_millis(20),
        threads: 1,
    };
    let report = bench_sparse_cross(&[5], &[2], &grid, 42, &opts).unwrap();
    assert!(report.cells[0].ratio > 1.0, "ratio {}", report.cells[0].ratio);
    assert!(report.cells[0].agreement <= 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_correlations_are_bounded((n, p, seed) in (12usize..40, 2usize..8, any::<u64>()), lambda in 0.01f64..0.9) {
        let data = normal(n, p, seed).normalize().unwrap();
        let rho = partial_from_residuals(&data).unwrap();
        prop_assert!(rho.as_matrix().amax() <= 1.0 + 1e-9);
        let net = sparse_partial_network(&data, lambda, &NetworkOptions::default()).unwrap();
        prop_assert!(net.rho.as_matrix().amax() <= 1.0 + 1e-9);
        // No edge where either coefficient vanishes.
        for i in 0..p {
            for j in 0..p {
                if i == j { continue; }
                let bij = net.regressions[i].as_ref().unwrap().coefficients[j];
                let bji = net.regressions[j].as_ref().unwrap().coefficients[i];
                if bij == 0.0 || bji == 0.0 {
                    prop_assert_eq!(net.rho[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact((n, p, seed) in (2usize..10, 1usize..6, any::<u64>())) {
        let m = normal(n, p.max(2), seed).values().clone();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m, None).unwrap();
        let back = read_data(&buf[..]).unwrap();
        prop_assert_eq!(back.values(), &m);
    }
}
