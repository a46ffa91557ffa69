//! OLS, 2SLS, reduced-form and control-function fits.
//!
//! Every residual variance uses divisor `n`; the finite-sample identities
//! checked in [`crate::endogeneity`] hold exactly only with that divisor.

use serde::Serialize;

use crate::data::{DesignMatrices, Dataset};
use crate::error::Result;
use crate::linalg::{column_matrix, hstack, LeastSquares, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Tsls,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Coefficients on `X = [Y1 | Z1]`.
    pub theta_hat: Vector,
    /// Leading `d_y1` entries of `theta_hat`.
    pub beta_hat: Vector,
    /// `Y2 − X θ̂` (against the original `X`, also for 2SLS).
    pub residuals: Vector,
    /// `‖residuals‖² / n`.
    pub sigma2: f64,
    pub method: Method,
}

impl FitResult {
    pub(crate) fn new(x: &Matrix, y2: &Vector, theta_hat: Vector, d_y1: usize, method: Method) -> Self {
        let residuals = y2 - x * &theta_hat;
        let sigma2 = residuals.norm_squared() / y2.len() as f64;
        let beta_hat = theta_hat.rows(0, d_y1).into_owned();
        Self {
            theta_hat,
            beta_hat,
            residuals,
            sigma2,
            method,
        }
    }
}

/// First stage: `Y1` on `Z`.
#[derive(Debug, Clone)]
pub struct ReducedFormFit {
    /// `(d_z1 + d_z2) × d_y1` coefficients, rows ordered as `Z = [Z1 | Z2]`.
    pub pi_hat: Matrix,
    /// `V̂ = M_Z Y1`.
    pub v_hat: Matrix,
}

/// OLS of `Y2` on `[X | V̂]`.
#[derive(Debug, Clone)]
pub struct CfFit {
    pub theta_cf: Vector,
    pub rho_cf: Vector,
    pub v_hat: Matrix,
    pub u_hat: Vector,
    /// `‖û‖² / n`.
    pub sigma2_u: f64,
}

pub fn fit_ols(ds: &Dataset) -> Result<FitResult> {
    let x = ds.design().x;
    let theta = LeastSquares::new(&x)?.solve_vector(ds.y2())?;
    Ok(FitResult::new(&x, ds.y2(), theta, ds.d_y1(), Method::Ols))
}

/// `θ̂ = (XᵀP_Z X)⁻¹XᵀP_Z Y2`, computed as least squares of `Y2` on `P_Z X`.
pub fn fit_tsls(ds: &Dataset) -> Result<FitResult> {
    let DesignMatrices { x, z } = ds.design();
    let xhat = LeastSquares::new(&z)?.project(&x)?;
    let theta = LeastSquares::new(&xhat)?.solve_vector(ds.y2())?;
    Ok(FitResult::new(&x, ds.y2(), theta, ds.d_y1(), Method::Tsls))
}

pub fn fit_reduced_form(ds: &Dataset) -> Result<ReducedFormFit> {
    let z = ds.design().z;
    let zf = LeastSquares::new(&z)?;
    let pi_hat = zf.solve(ds.y1())?;
    let v_hat = ds.y1() - &z * &pi_hat;
    Ok(ReducedFormFit { pi_hat, v_hat })
}

/// Joint OLS of `Y2` on `[X | V̂]`. Fails with `RankDeficient` when `Y1` is
/// (numerically) inside `span(Z)`, since then `V̂ ≈ 0`.
pub fn fit_cf(ds: &Dataset) -> Result<CfFit> {
    let x = ds.design().x;
    let v_hat = fit_reduced_form(ds)?.v_hat;
    let w = hstack(&x, &v_hat);
    let coef = LeastSquares::new(&w)?.solve(&column_matrix(ds.y2()))?;
    let coef = coef.column(0).into_owned();
    let u_hat = ds.y2() - &w * &coef;
    let sigma2_u = u_hat.norm_squared() / ds.n() as f64;
    let k = x.ncols();
    Ok(CfFit {
        theta_cf: coef.rows(0, k).into_owned(),
        rho_cf: coef.rows(k, ds.d_y1()).into_owned(),
        v_hat,
        u_hat,
        sigma2_u,
    })
}
