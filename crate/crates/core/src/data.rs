//! Data matrices, normalization and sample (cross-)correlation.
//!
//! A [`DataMatrix`] holds `n` subjects (rows) by `p` nodes (columns). Most
//! estimators in this crate expect columns that are centered and scaled to
//! unit Euclidean norm, so that `x_iᵀx_j` is the sample correlation. Note the
//! unit-*norm* convention: a normalized column satisfies `x_jᵀx_j = 1`, not a
//! sample variance of one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column sums of a centered matrix must vanish within `CENTER_TOL * n`.
pub const CENTER_TOL: f64 = 1e-10;
/// Squared column norms of a normalized matrix must equal one within this.
pub const UNIT_NORM_TOL: f64 = 1e-10;
/// A column whose norm after centering falls below this is constant.
pub const CONSTANT_COLUMN_TOL: f64 = 1e-12;
/// Correlation entries may exceed the unit interval by round-off only.
pub const CORRELATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    Centered,
    CenteredUnitNorm,
}

/// What [`DataMatrix::normalize_with`] does with zero-variance columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantColumns {
    #[default]
    Fail,
    /// Remove the column; [`DataMatrix::column_map`] records the survivors.
    Drop,
}

/// An `n × p` matrix of observations.
///
/// Rows are subjects (images), columns are nodes. Immutable once built; every
/// transformation returns a new matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    normalization: Normalization,
    column_map: Vec<usize>,
    names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Wraps raw measurements. Requires `n ≥ 2`, `p ≥ 1` and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        validate_shape_and_finite(&values)?;
        let p = values.ncols();
        Ok(Self {
            values,
            normalization: Normalization::Raw,
            column_map: (0..p).collect(),
            names: None,
        })
    }

    /// Builds a raw matrix from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::RaggedRow {
                    row,
                    expected: p,
                    got: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    /// Wraps values that the caller claims are already in the given
    /// normalization state. The claim is verified.
    pub fn with_normalization(values: DMatrix<f64>, normalization: Normalization) -> Result<Self> {
        let mut m = Self::new(values)?;
        m.check_normalization(normalization)?;
        m.normalization = normalization;
        Ok(m)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} node names", self.p()),
                got: format!("{} names", names.len()),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.values.column(j)
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Original column index of each current column. Identity unless columns
    /// were dropped during normalization.
    pub fn column_map(&self) -> &[usize] {
        &self.column_map
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Subtracts each column's mean.
    pub fn center(&self) -> DataMatrix {
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let normalization = match self.normalization {
            Normalization::CenteredUnitNorm => Normalization::CenteredUnitNorm,
            _ => Normalization::Centered,
        };
        DataMatrix {
            values,
            normalization,
            column_map: self.column_map.clone(),
            names: self.names.clone(),
        }
    }

    /// Centers every column and scales it to unit Euclidean norm, failing on
    /// constant columns.
    pub fn normalize(&self) -> Result<DataMatrix> {
        self.normalize_with(ConstantColumns::Fail)
    }

    pub fn normalize_with(&self, policy: ConstantColumns) -> Result<DataMatrix> {
        let centered = self.center();
        let mut keep = Vec::with_capacity(self.p());
        let mut norms = Vec::with_capacity(self.p());
        for (j, col) in centered.values.column_iter().enumerate() {
            let norm = col.norm();
            if norm < CONSTANT_COLUMN_TOL {
                match policy {
                    ConstantColumns::Fail => return Err(Error::ConstantColumn(self.column_map[j])),
                    ConstantColumns::Drop => continue,
                }
            }
            keep.push(j);
            norms.push(norm);
        }
        if keep.is_empty() {
            return Err(Error::TooFewColumns { min: 1, got: 0 });
        }
        let n = self.n();
        let values = DMatrix::from_fn(n, keep.len(), |i, k| centered.values[(i, keep[k])] / norms[k]);
        Ok(DataMatrix {
            values,
            normalization: Normalization::CenteredUnitNorm,
            column_map: keep.iter().map(|&j| self.column_map[j]).collect(),
            names: self
                .names
                .as_ref()
                .map(|names| keep.iter().map(|&j| names[j].clone()).collect()),
        })
    }

    /// Maximum-likelihood covariance `(1/n) JᵀJ` of the centered data.
    pub fn sample_covariance(&self) -> SymmetricMatrix {
        let centered = match self.normalization {
            Normalization::Raw => self.center(),
            _ => self.clone(),
        };
        let mut s = centered.values.transpose() * &centered.values;
        s /= self.n() as f64;
        SymmetricMatrix::from_upper(s, MatrixKind::Covariance)
    }

    /// Sample correlation `x_iᵀx_j` of a centered, unit-norm matrix.
    pub fn sample_correlation(&self) -> Result<SymmetricMatrix> {
        self.require_normalized()?;
        let mut c = self.values.transpose() * &self.values;
        c.fill_diagonal(1.0);
        Ok(SymmetricMatrix::from_upper(c, MatrixKind::Correlation))
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalization != Normalization::CenteredUnitNorm {
            return Err(Error::NotNormalized(format!(
                "normalization state is {:?}",
                self.normalization
            )));
        }
        Ok(())
    }

    fn check_normalization(&self, claimed: Normalization) -> Result<()> {
        if claimed == Normalization::Raw {
            return Ok(());
        }
        let n = self.n() as f64;
        for (j, col) in self.values.column_iter().enumerate() {
            let sum = col.sum();
            if sum.abs() > CENTER_TOL * n {
                return Err(Error::NotNormalized(format!("column {j} sums to {sum:e}")));
            }
            if claimed == Normalization::CenteredUnitNorm {
                let sq = col.norm_squared();
                if (sq - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::NotNormalized(format!(
                        "column {j} has squared norm {sq}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn validate_shape_and_finite(values: &DMatrix<f64>) -> Result<()> {
    if values.nrows() < 2 {
        return Err(Error::TooFewRows {
            min: 2,
            got: values.nrows(),
        });
    }
    if values.ncols() < 1 {
        return Err(Error::TooFewColumns {
            min: 1,
            got: values.ncols(),
        });
    }
    for j in 0..values.ncols() {
        for i in 0..values.nrows() {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Sample cross-correlation `x(v_i)ᵀ y(v_j)` between paired normalized
/// matrices. The result is a full, generally asymmetric, `p × p` matrix.
pub fn sample_cross_correlation(x: &DataMatrix, y: &DataMatrix) -> Result<SymmetricMatrix> {
    if x.n() != y.n() || x.p() != y.p() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}×{}", x.n(), x.p()),
            got: format!("{}×{}", y.n(), y.p()),
        });
    }
    x.require_normalized()?;
    y.require_normalized()?;
    let b = x.values.transpose() * &y.values;
    Ok(SymmetricMatrix::cross_correlation(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Covariance,
    Correlation,
    CrossCorrelation,
    Precision,
    SparseEstimate,
}

/// Dense `p × p` node-by-node matrix.
///
/// Symmetric for every kind except [`MatrixKind::CrossCorrelation`]; for the
/// symmetric kinds the upper triangle is authoritative and mirrored on
/// construction, so `m[(i, j)] == m[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    entries: DMatrix<f64>,
    kind: MatrixKind,
    lambda: Option<f64>,
}

impl SymmetricMatrix {
    /// Mirrors the upper triangle into the lower one.
    ///
    /// Panics if `entries` is not square. Cross-correlation input is stored
    /// as is.
    pub fn from_upper(mut entries: DMatrix<f64>, kind: MatrixKind) -> Self {
        assert!(entries.is_square(), "node matrix must be square");
        if kind != MatrixKind::CrossCorrelation {
            let p = entries.nrows();
            for j in 0..p {
                for i in (j + 1)..p {
                    entries[(i, j)] = entries[(j, i)];
                }
            }
        }
        Self {
            entries,
            kind,
            lambda: None,
        }
    }

    /// Validating constructor: rejects non-square, non-finite or (for
    /// symmetric kinds) asymmetric input beyond `sym_tol`, and checks the
    /// correlation invariants for [`MatrixKind::Correlation`].
    pub fn try_new(entries: DMatrix<f64>, kind: MatrixKind, sym_tol: f64) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}×{}", entries.nrows(), entries.ncols()),
            });
        }
        let p = entries.nrows();
        for j in 0..p {
            for i in 0..p {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        if kind != MatrixKind::CrossCorrelation {
            for j in 0..p {
                for i in (j + 1)..p {
                    let diff = (entries[(i, j)] - entries[(j, i)]).abs();
                    if diff > sym_tol {
                        return Err(Error::NotSymmetric { i, j, diff });
                    }
                }
            }
        }
        let m = Self::from_upper(entries, kind);
        if kind == MatrixKind::Correlation {
            m.check_correlation()?;
        }
        Ok(m)
    }

    pub fn cross_correlation(entries: DMatrix<f64>) -> Self {
        Self::from_upper(entries, MatrixKind::CrossCorrelation)
    }

    pub fn identity(p: usize, kind: MatrixKind) -> Self {
        Self::from_upper(DMatrix::identity(p, p), kind)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_symmetric_kind(&self) -> bool {
        self.kind != MatrixKind::CrossCorrelation
    }

    /// Largest `|m_ij|` over `i ≠ j`; zero for a 1×1 matrix.
    pub fn max_off_diagonal_abs(&self) -> f64 {
        let p = self.dim();
        let mut best = 0.0_f64;
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    best = best.max(self.entries[(i, j)].abs());
                }
            }
        }
        best
    }

    /// Principal submatrix on the given node indices.
    pub fn submatrix(&self, nodes: &[usize]) -> SymmetricMatrix {
        let k = nodes.len();
        SymmetricMatrix {
            entries: DMatrix::from_fn(k, k, |a, b| self.entries[(nodes[a], nodes[b])]),
            kind: self.kind,
            lambda: self.lambda,
        }
    }

    fn check_correlation(&self) -> Result<()> {
        let p = self.dim();
        for j in 0..p {
            if (self.entries[(j, j)] - 1.0).abs() > CORRELATION_TOL {
                return Err(Error::InvalidArgument(format!(
                    "correlation diagonal entry {j} is {}",
                    self.entries[(j, j)]
                )));
            }
            for i in 0..p {
                if self.entries[(i, j)].abs() > 1.0 + CORRELATION_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "correlation entry ({i}, {j}) = {} outside [-1, 1]",
                        self.entries[(i, j)]
                    )));
                }
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.entries[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RankDiagnostic {
    pub rank: usize,
    pub deficient: bool,
    /// Singular-value cutoff actually used.
    pub tol: f64,
}

/// Numerical rank: the number of singular values above `tol`.
///
/// `tol = None` uses `dim · ε · σ_max`.
pub fn rank_diagnostic(m: &SymmetricMatrix, tol: Option<f64>) -> RankDiagnostic {
    let p = m.dim();
    let sv: DVector<f64> = m.entries.clone().svd(false, false).singular_values;
    let sigma_max = sv.max();
    let tol = tol.unwrap_or(p as f64 * f64::EPSILON * sigma_max);
    let rank = sv.iter().filter(|&&s| s > tol).count();
    RankDiagnostic {
        rank,
        deficient: rank < p,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_three_point_column() {
        let d = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let z = d.normalize().unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(approx(z.values()[(0, 0)], -h, 1e-15));
        assert!(approx(z.values()[(1, 0)], 0.0, 1e-15));
        assert!(approx(z.values()[(2, 0)], h, 1e-15));
        assert_eq!(z.normalization(), Normalization::CenteredUnitNorm);
    }

    #[test]
    fn constant_column_fails_or_drops() {
        let d = DataMatrix::from_rows(&[vec![1.0, 5.0, 2.0], vec![2.0, 5.0, 0.0], vec![4.0, 5.0, 1.0]])
            .unwrap();
        assert!(matches!(d.normalize(), Err(Error::ConstantColumn(1))));
        let z = d.normalize_with(ConstantColumns::Drop).unwrap();
        assert_eq!(z.p(), 2);
        assert_eq!(z.column_map(), &[0, 2]);
        // Dropping twice keeps mapping to the original indices.
        let z2 = z.normalize_with(ConstantColumns::Drop).unwrap();
        assert_eq!(z2.column_map(), &[0, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            DataMatrix::from_rows(&[vec![1.0, 2.0]]),
            Err(Error::TooFewRows { .. })
        ));
        assert!(matches!(
            DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            DataMatrix::from_rows(&[vec![1.0], vec![f64::NAN]]),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn correlation_requires_normalized_data() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 0.5]]).unwrap();
        assert!(matches!(d.sample_correlation(), Err(Error::NotNormalized(_))));
        assert!(d.normalize().unwrap().sample_correlation().is_ok());
    }

    #[test]
    fn with_normalization_verifies_claim() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(DataMatrix::with_normalization(v.clone(), Normalization::Centered).is_err());
        let h = 1.0 / 2f64.sqrt();
        let z = DMatrix::from_row_slice(3, 1, &[-h, 0.0, h]);
        assert!(DataMatrix::with_normalization(z, Normalization::CenteredUnitNorm).is_ok());
    }

    #[test]
    fn identical_and_orthogonal_columns() {
        let d = DataMatrix::from_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![-1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
            vec![-1.0, -1.0, -1.0],
        ])
        .unwrap()
        .normalize()
        .unwrap();
        let c = d.sample_correlation().unwrap();
        assert!(approx(c[(0, 1)], 1.0, 1e-15));
        assert!(approx(c[(0, 2)], 0.0, 1e-15));
        assert_eq!(c[(2, 2)], 1.0);
    }

    #[test]
    fn cross_correlation_shape_mismatch() {
        let a = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 3.0]])
            .unwrap()
            .normalize()
            .unwrap();
        let b = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![0.0]])
            .unwrap()
            .normalize()
            .unwrap();
        assert!(matches!(
            sample_cross_correlation(&a, &b),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rank_of_identity_and_outer_product() {
        let id = SymmetricMatrix::identity(10, MatrixKind::Covariance);
        let r = rank_diagnostic(&id, None);
        assert_eq!((r.rank, r.deficient), (10, false));

        let v = DVector::from_fn(8, |i, _| i as f64 - 3.5);
        let outer = SymmetricMatrix::from_upper(&v * v.transpose(), MatrixKind::Covariance);
        assert_eq!(rank_diagnostic(&outer, None).rank, 1);
    }

    #[test]
    fn from_upper_is_bitwise_symmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.30000000001, 1.0]);
        let s = SymmetricMatrix::from_upper(m, MatrixKind::Covariance);
        assert_eq!(s[(1, 0)].to_bits(), s[(0, 1)].to_bits());
        assert_eq!(s[(1, 0)], 0.3);
    }

    #[test]
    fn try_new_checks_correlation_range() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        assert!(SymmetricMatrix::try_new(bad, MatrixKind::Correlation, 0.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            SymmetricMatrix::try_new(asym.clone(), MatrixKind::Covariance, 1e-12),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(SymmetricMatrix::try_new(asym, MatrixKind::CrossCorrelation, 0.0).is_ok());
    }
}
