//! Dense least squares, projections and SPD solves.
//!
//! Projections onto `span(A)` are applied through a Householder QR of `A`;
//! the `n × n` matrices `P_A` and `M_A` are never formed.

use nalgebra::{linalg::QR, Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative pivot threshold for rank detection.
pub const RANK_TOL: f64 = 1e-10;

/// Relative asymmetry accepted by [`spd_solve`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A QR factorization of a tall design matrix with verified full column rank.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Matrix,
    qr: QR<f64, Dyn, Dyn>,
    r: Matrix,
    nrows: usize,
    ncols: usize,
}

impl LeastSquares {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (nrows, ncols) = a.shape();
        if nrows < ncols {
            return Err(Error::RankDeficient { column: nrows });
        }
        let max_norm = a
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max);
        let qr = QR::new(a.clone());
        let r = qr.r();
        let tol = RANK_TOL * max_norm;
        for j in 0..ncols {
            let pivot = r[(j, j)].abs();
            if !(pivot > tol) {
                return Err(Error::RankDeficient { column: j });
            }
        }
        Ok(Self {
            a: a.clone(),
            qr,
            r,
            nrows,
            ncols,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Ratio of the largest to the smallest `|R_jj|`.
    pub fn condition_estimate(&self) -> f64 {
        if self.ncols == 0 {
            return 1.0;
        }
        let diag = self.r.diagonal().map(f64::abs);
        diag.max() / diag.min()
    }

    /// `argmin_C ‖A C − B‖_F`, one column of `B` at a time.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rows(b)?;
        let mut qtb = b.clone();
        self.qr.q_tr_mul(&mut qtb);
        let top = qtb.rows(0, self.ncols).into_owned();
        self.r
            .solve_upper_triangular(&top)
            .ok_or(Error::RankDeficient { column: 0 })
    }

    pub fn solve_vector(&self, b: &Vector) -> Result<Vector> {
        let m = self.solve(&Matrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(m.column(0).into_owned())
    }

    /// `P_A Y = A·(R⁻¹Q₁ᵀY)`.
    pub fn project(&self, y: &Matrix) -> Result<Matrix> {
        let coef = self.solve(y)?;
        Ok(&self.a * coef)
    }

    /// `M_A Y = Y − P_A Y`.
    pub fn annihilate(&self, y: &Matrix) -> Result<Matrix> {
        Ok(y - self.project(y)?)
    }

    fn check_rows(&self, b: &Matrix) -> Result<()> {
        if b.nrows() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "factorization has {} rows, right-hand side has {}",
                self.nrows,
                b.nrows()
            )));
        }
        Ok(())
    }
}

/// Least-squares coefficients of `B` on `A`.
pub fn solve_least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    LeastSquares::new(a)?.solve(b)
}

/// `P_A Y` without forming `P_A`.
pub fn project(a: &Matrix, y: &Matrix) -> Result<Matrix> {
    LeastSquares::new(a)?.project(y)
}

/// `M_A Y = Y − P_A Y` without forming `M_A`.
pub fn annihilate(a: &Matrix, y: &Matrix) -> Result<Matrix> {
    LeastSquares::new(a)?.annihilate(y)
}

/// `S⁻¹B` for symmetric positive definite `S`, via Cholesky.
pub fn spd_solve(s: &Matrix, b: &Matrix) -> Result<Matrix> {
    let k = s.nrows();
    if s.ncols() != k || b.nrows() != k {
        return Err(Error::DimensionMismatch(format!(
            "spd_solve: S is {}x{}, B has {} rows",
            s.nrows(),
            s.ncols(),
            b.nrows()
        )));
    }
    let scale = s.amax();
    for i in 0..k {
        for j in (i + 1)..k {
            if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric);
            }
        }
    }
    let sym = (s + s.transpose()) * 0.5;
    let chol = Cholesky::new(sym).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// `AᵀA`.
pub fn gram(a: &Matrix) -> Matrix {
    a.tr_mul(a)
}

/// Builds `[A | B]`.
pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack: row counts differ");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn column_matrix(v: &Vector) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v.as_slice())
}
