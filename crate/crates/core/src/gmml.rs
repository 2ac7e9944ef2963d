//! Global metric fitting from similar and dissimilar pairs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spd::{geometric_mean_riccati, SpdMatrix, SymMatrix};

/// Default weight of the identity added to both scatter matrices.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// A multiset of document pairs. Duplicates count with multiplicity.
#[derive(Debug, Clone, Default)]
pub struct PairSet<'a> {
    pub pairs: Vec<(&'a [f64], &'a [f64])>,
}

impl<'a> PairSet<'a> {
    pub fn new() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn push(&mut self, a: &'a [f64], b: &'a [f64]) {
        self.pairs.push((a, b));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl<'a> FromIterator<(&'a [f64], &'a [f64])> for PairSet<'a> {
    fn from_iter<I: IntoIterator<Item = (&'a [f64], &'a [f64])>>(iter: I) -> Self {
        Self {
            pairs: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmlConfig {
    pub lambda: f64,
}

impl Default for GmmlConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// `λ·I + Σ (a − b)(a − b)ᵀ`, accumulated in pair order.
pub fn scatter_matrix(pairs: &PairSet<'_>, dim: usize, lambda: f64) -> Result<SymMatrix> {
    if dim == 0 {
        return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let mut acc = DMatrix::<f64>::identity(dim, dim) * lambda;
    let mut diff = DVector::<f64>::zeros(dim);
    for (a, b) in &pairs.pairs {
        if a.len() != dim {
            return Err(Error::dim(dim, a.len()));
        }
        if b.len() != dim {
            return Err(Error::dim(dim, b.len()));
        }
        for ((d, x), y) in diff.iter_mut().zip(a.iter()).zip(b.iter()) {
            *d = x - y;
        }
        acc.ger(1.0, &diff, &diff, 1.0);
    }
    SymMatrix::new(acc)
}

/// Closed-form metric `S # D` for the regularized scatter matrices.
pub fn gmml_fit(
    similar: &PairSet<'_>,
    dissimilar: &PairSet<'_>,
    dim: usize,
    config: &GmmlConfig,
) -> Result<SpdMatrix> {
    let s = SpdMatrix::new(scatter_matrix(similar, dim, config.lambda)?)?;
    let d = SpdMatrix::new(scatter_matrix(dissimilar, dim, config.lambda)?)?;
    geometric_mean_riccati(&s, &d)
}

/// `tr(M S) + tr(M⁻¹ D)`.
pub fn gmml_objective(m: &SpdMatrix, s: &SymMatrix, d: &SymMatrix) -> Result<f64> {
    check_dims(m, s, d)?;
    let m_inv = m.inverse();
    let a = trace_of_product(m.as_matrix(), s.as_matrix());
    let b = trace_of_product(m_inv.as_matrix(), d.as_matrix());
    Ok(a + b)
}

/// Gradient `S − M⁻¹ D M⁻¹` of the objective.
pub fn gmml_gradient(m: &SpdMatrix, s: &SymMatrix, d: &SymMatrix) -> Result<DMatrix<f64>> {
    check_dims(m, s, d)?;
    let m_inv = m.inverse();
    Ok(s.as_matrix() - m_inv.as_matrix() * d.as_matrix() * m_inv.as_matrix())
}

fn check_dims(m: &SpdMatrix, s: &SymMatrix, d: &SymMatrix) -> Result<()> {
    if s.dim() != m.dim() {
        return Err(Error::dim(m.dim(), s.dim()));
    }
    if d.dim() != m.dim() {
        return Err(Error::dim(m.dim(), d.dim()));
    }
    Ok(())
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(AB) = Σ_ij A_ij B_ji
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}
