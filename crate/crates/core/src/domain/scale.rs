use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Σ_t = A·diag(H_t)·Aᵀ with A unit lower triangular and H_t a positive
/// diagonal (stored per time point).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleDecomposition {
    a: DMatrix<f64>,
    h: Vec<Vec<f64>>,
}

impl ScaleDecomposition {
    pub fn new(a: DMatrix<f64>, h: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        for i in 0..n {
            if a[(i, i)] != 1.0 || (i + 1..n).any(|j| a[(i, j)] != 0.0) {
                return Err(Error::InvalidParameter(
                    "A must be unit lower triangular".into(),
                ));
            }
        }
        for (t, row) in h.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("H_{t} has length {}", row.len())));
            }
            if row.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "H_{t} has a non-positive entry"
                )));
            }
        }
        Ok(Self { a, h })
    }

    /// Constant-in-time decomposition.
    pub fn constant(a: DMatrix<f64>, h: Vec<f64>) -> Result<Self> {
        Self::new(a, vec![h])
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn h(&self, t: usize) -> &[f64] {
        &self.h[t.min(self.h.len() - 1)]
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn sigma(&self, t: usize) -> DMatrix<f64> {
        implied_sigma(&self.a, self.h(t))
    }
}

/// A·diag(h)·Aᵀ, exploiting the triangular structure of `a`.
pub fn implied_sigma(a: &DMatrix<f64>, h: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..=j).map(|l| a[(i, l)] * h[l] * a[(j, l)]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Inverse of a unit lower-triangular matrix by forward substitution; the
/// result is again unit lower triangular.
pub fn invert_unit_lower(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        for i in col + 1..n {
            let s: f64 = (col..i).map(|m| l[(i, m)] * inv[(m, col)]).sum();
            inv[(i, col)] = -s;
        }
    }
    inv
}
