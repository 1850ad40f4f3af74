//! Cyclic coordinate descent for the quadratic-form LASSO
//! `min ½ βᵀQβ + cᵀβ + λ‖β‖₁` with `Q` positive semidefinite.

use nalgebra::{DMatrix, DVector};

use crate::threshold::soft_threshold;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CdOutcome {
    pub passes: usize,
    pub kkt: f64,
    pub converged: bool,
}

/// Max violation of the subgradient conditions at `beta` for gradient `g`.
pub(crate) fn kkt_violation(g: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    g.iter()
        .zip(beta.iter())
        .map(|(&gk, &bk)| {
            if bk > 0.0 {
                (gk + lambda).abs()
            } else if bk < 0.0 {
                (gk - lambda).abs()
            } else {
                (gk.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Runs passes in ascending coordinate order from the warm start in `beta`
/// until the KKT violation drops to `tol`. Coordinates with `Q_kk = 0` are
/// held at zero.
pub(crate) fn quadratic_lasso(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    beta: &mut DVector<f64>,
    tol: f64,
    max_passes: usize,
) -> CdOutcome {
    let k = c.len();
    let mut grad = q * &*beta + c;
    let mut kkt = kkt_violation(&grad, beta, lambda);
    if kkt <= tol {
        return CdOutcome {
            passes: 0,
            kkt,
            converged: true,
        };
    }
    for pass in 1..=max_passes {
        for j in 0..k {
            let qjj = q[(j, j)];
            if qjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            let z = grad[j] - qjj * old;
            let new = -soft_threshold(z, lambda) / qjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                grad.axpy(delta, &q.column(j), 1.0);
            }
        }
        // Recompute rather than trust the running gradient.
        grad = q * &*beta + c;
        kkt = kkt_violation(&grad, beta, lambda);
        if kkt <= tol {
            return CdOutcome {
                passes: pass,
                kkt,
                converged: true,
            };
        }
    }
    CdOutcome {
        passes: max_passes,
        kkt,
        converged: false,
    }
}
