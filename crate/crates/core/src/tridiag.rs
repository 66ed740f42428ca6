//! Thomas elimination for tridiagonal systems.

use crate::error::{Error, Result};

/// A tridiagonal matrix stored by diagonals.
///
/// `lower[i]` couples row `i` to `i − 1` (so `lower[0]` is unused), `upper[i]`
/// couples row `i` to `i + 1` (so `upper[n−1]` is unused).
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Weak row diagonal dominance `|d| ≥ |l| + |u|`, strict in at least one row.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        let mut strict = false;
        for i in 0..n {
            let off = if i > 0 { self.lower[i].abs() } else { 0.0 }
                + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
            let d = self.diag[i].abs();
            if d < off * (1.0 - 1e-14) {
                return false;
            }
            if d > off {
                strict = true;
            }
        }
        strict
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Solves `A x = rhs` in place without pivoting.
    ///
    /// For an M-matrix (positive diagonal, nonpositive off-diagonals,
    /// diagonally dominant) and a nonnegative right-hand side every
    /// intermediate quantity is nonnegative, so the result is nonnegative in
    /// floating point as well.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Domain(format!(
                "rhs has {} entries, matrix has {n} rows",
                rhs.len()
            )));
        }
        if n == 0 {
            return Ok(());
        }
        let mut c = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Scheme("zero pivot in tridiagonal solve".into()));
        }
        c[0] = self.upper[0] / denom;
        rhs[0] /= denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Scheme(format!(
                    "zero pivot in tridiagonal solve at row {i}"
                )));
            }
            if i + 1 < n {
                c[i] = self.upper[i] / denom;
            }
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= c[i] * rhs[i + 1];
        }
        Ok(())
    }
}
