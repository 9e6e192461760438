//! Dense LU solves with a reciprocal condition estimate.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};

/// Systems whose reciprocal 1-norm condition estimate falls below this are
/// reported as [`Error::SingularSystem`].
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// An LU factorization (partial pivoting) together with its condition estimate.
pub struct Factorized {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    rcond: f64,
}

impl Factorized {
    /// Factorizes `a`. Pass `symmetric = true` to skip factorizing the transpose.
    pub fn new(a: &DMatrix<f64>, symmetric: bool) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "square matrix expected, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let lu = a.clone().lu();
        let lu_t = if symmetric {
            None
        } else {
            Some(a.transpose().lu())
        };
        let mut f = Factorized { lu, lu_t, rcond: 0.0 };
        let norm_a = one_norm(a);
        if norm_a == 0.0 || !norm_a.is_finite() {
            return Err(Error::SingularSystem { rcond: 0.0 });
        }
        let inv_norm = f.inverse_one_norm_estimate().ok_or(Error::SingularSystem { rcond: 0.0 })?;
        f.rcond = 1.0 / (norm_a * inv_norm);
        if !(f.rcond >= RCOND_THRESHOLD) {
            return Err(Error::SingularSystem { rcond: f.rcond });
        }
        Ok(f)
    }

    #[cfg(test)]
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or(Error::SingularSystem { rcond: self.rcond })
    }

    fn solve_transpose(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.lu_t {
            Some(lu_t) => lu_t.solve(b),
            None => self.lu.solve(b),
        }
    }

    /// Hager's estimator for the 1-norm of the inverse.
    fn inverse_one_norm_estimate(&self) -> Option<f64> {
        let n = self.lu.l().nrows();
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.lu.solve(&x)?;
            if y.iter().any(|v| !v.is_finite()) {
                return None;
            }
            estimate = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transpose(&xi)?;
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            if zmax <= z.dot(&x) {
                break;
            }
            x = DVector::zeros(n);
            x[j] = 1.0;
        }
        // Alternating-sign probe guards against the estimator's known blind spots.
        let alt = DVector::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        });
        let y = self.lu.solve(&alt)?;
        let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        Some(estimate.max(alt_est))
    }
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b`, raising [`Error::SingularSystem`] for ill-conditioned `a`.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Factorized::new(a, false)?.solve(b)
}
