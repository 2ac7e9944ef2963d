//! Dense symmetric and symmetric positive-definite matrices.
//!
//! Every power, inverse and square root in the crate goes through a
//! symmetric eigendecomposition. The geometric mean `S # D` used by metric
//! fitting is the unique SPD solution of `M S M = D`, computed as
//! `S^{-1/2} (S^{1/2} D S^{1/2})^{1/2} S^{-1/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor for positive-definiteness certification:
/// `λ_min > PD_RELATIVE_FLOOR * λ_max`.
pub const PD_RELATIVE_FLOOR: f64 = 1e-12;

/// A dense symmetric matrix. Symmetry is enforced exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from `a`, replacing it with `(a + aᵀ) / 2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidMatrix("matrix has dimension 0".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self {
            entries: symmetrize(a),
        })
    }

    /// Row-major construction.
    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::dim(dim * dim, values.len()));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::dim(n, v.len()));
        }
        let mut out = vec![0.0; n];
        // Column-major storage; symmetry lets us walk columns as rows.
        for (j, col) in self.entries.column_iter().enumerate() {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(col.iter()) {
                *o += c * vj;
            }
        }
        Ok(out)
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V · diag(f(λ)) · Vᵀ`, symmetrized.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        symmetrize(&scaled * self.vectors.transpose())
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    if a.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let n = a.dim();
    let eig = SymmetricEigen::new(a.entries.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// A symmetric matrix certified positive definite, with its eigenpairs cached.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    base: SymMatrix,
    min_eigenvalue_floor: f64,
    eigen: SymEigen,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base
    }
}

impl SpdMatrix {
    /// Certifies `base` as positive definite: every eigenvalue must exceed
    /// `PD_RELATIVE_FLOOR` times the largest one.
    pub fn new(base: SymMatrix) -> Result<Self> {
        let eigen = sym_eigen(&base)?;
        let (max, min) = (eigen.max_value(), eigen.min_value());
        let floor = PD_RELATIVE_FLOOR * max;
        if !(max > 0.0) || !(min > floor) {
            return Err(Error::NotPositiveDefinite { min, max });
        }
        Ok(Self {
            base,
            min_eigenvalue_floor: floor,
            eigen,
        })
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::new(a)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is positive definite")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag)?)
    }

    /// Wraps eigenpairs known to be positive without recomputing them.
    fn from_eigen(eigen: SymEigen) -> Result<Self> {
        let entries = eigen.reconstruct_with(|l| l);
        if entries.iter().any(|v| !v.is_finite()) || eigen.values.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidMatrix(
                "power produced a non-finite matrix".into(),
            ));
        }
        let floor = PD_RELATIVE_FLOOR * eigen.max_value();
        Ok(Self {
            base: SymMatrix { entries },
            min_eigenvalue_floor: floor,
            eigen,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.base.entries
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eigen
    }

    pub fn min_eigenvalue_floor(&self) -> f64 {
        self.min_eigenvalue_floor
    }

    /// Largest eigenvalue, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen.max_value()
    }

    pub fn inverse(&self) -> SpdMatrix {
        spd_pow(self, -1.0).expect("inverse of a certified SPD matrix")
    }
}

/// `a^exponent` through the eigendecomposition of `a`.
pub fn spd_pow(a: &SpdMatrix, exponent: f64) -> Result<SpdMatrix> {
    if !exponent.is_finite() {
        return Err(Error::InvalidMatrix("non-finite exponent".into()));
    }
    let eigen = &a.eigen;
    if !(eigen.min_value() > a.min_eigenvalue_floor) {
        return Err(Error::NotPositiveDefinite {
            min: eigen.min_value(),
            max: eigen.max_value(),
        });
    }
    let powered: Vec<f64> = eigen.values.iter().map(|l| l.powf(exponent)).collect();
    // A negative exponent reverses the eigenvalue order.
    let mut order: Vec<usize> = (0..powered.len()).collect();
    order.sort_by(|&i, &j| powered[j].total_cmp(&powered[i]));
    let n = powered.len();
    let values = DVector::from_iterator(n, order.iter().map(|&i| powered[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eigen.vectors.column(src));
    }
    SpdMatrix::from_eigen(SymEigen { values, vectors })
}

/// Unique SPD solution `M` of the Riccati equation `M S M = D`.
pub fn geometric_mean_riccati(s: &SpdMatrix, d: &SpdMatrix) -> Result<SpdMatrix> {
    if s.dim() != d.dim() {
        return Err(Error::dim(s.dim(), d.dim()));
    }
    let s_half = spd_pow(s, 0.5)?;
    let s_neg_half = spd_pow(s, -0.5)?;
    let inner = SymMatrix::new(s_half.as_matrix() * d.as_matrix() * s_half.as_matrix())?;
    let inner_eigen = sym_eigen(&inner)?;
    // The congruence of an SPD matrix is SPD; tiny negative round-off is clipped.
    let inner_half = inner_eigen.reconstruct_with(|l| l.max(0.0).sqrt());
    let m = s_neg_half.as_matrix() * inner_half * s_neg_half.as_matrix();
    SpdMatrix::from_matrix(m)
}

pub(crate) fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}
