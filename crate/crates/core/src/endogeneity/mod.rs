//! Hausman and control-function endogeneity statistics.
//!
//! All four statistics share the quadratic form
//! `q = gᵀ((Ŷ1ᵀM_{Z1}Ŷ1)⁻¹ − (Y1ᵀM_{Z1}Y1)⁻¹)⁻¹ g` with `g = β̂_ols − β̂_2sls`,
//! and differ only in the residual variances that scale the two variance
//! estimates. Under the null each is asymptotically `χ²(d_y1)`.

mod chi2;
mod identities;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use chi2::{chi2_cdf, chi2_pdf, chi2_quantile, ln_gamma};
pub use identities::{ordering_consistent, verify_identities, IdentityReport};

use crate::data::{DesignMatrices, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{CfFit, FitResult, Method};
use crate::linalg::{column_matrix, gram, hstack, spd_solve, LeastSquares, Matrix, Vector};

/// A residual variance at or below this fraction of `‖Y2‖²/n` counts as zero.
pub const DEGENERATE_VARIANCE_REL: f64 = 1e-20;

/// `β̂_ols` and `β̂_2sls` are treated as distinct when
/// `‖β̂_ols − β̂_2sls‖ > STRICTNESS_REL · (1 + ‖β̂_ols‖)`.
pub const STRICTNESS_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    TH1,
    TH2,
    TH3,
    TCf,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::TH1, Statistic::TH2, Statistic::TH3, Statistic::TCf];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::TH1 => "t_h1",
            Statistic::TH2 => "t_h2",
            Statistic::TH3 => "t_h3",
            Statistic::TCf => "t_cf",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown statistic `{s}`")))
    }
}

/// `gᵀ W⁻¹ g` with `W = σ²₁ (Ŷ1ᵀM_{Z1}Ŷ1)⁻¹ − σ²₂ (Y1ᵀM_{Z1}Y1)⁻¹`.
///
/// `gram_2sls` is `Ŷ1ᵀM_{Z1}Ŷ1` and `gram_ols` is `Y1ᵀM_{Z1}Y1`. Returns
/// `NotPositiveDefinite` when `W` is not, which can happen for arbitrary
/// `(σ²₁, σ²₂)` but not for the pairings behind `t_H1`, `t_H2`, `t_H3`.
pub fn hausman_statistic(
    beta_gap: &Vector,
    gram_2sls: &Matrix,
    gram_ols: &Matrix,
    sigma2_1: f64,
    sigma2_2: f64,
) -> Result<f64> {
    let k = beta_gap.len();
    if gram_2sls.shape() != (k, k) || gram_ols.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrices must be {k}x{k}"
        )));
    }
    if !(sigma2_1 > 0.0 && sigma2_2 > 0.0) {
        return Err(Error::DegenerateVariance("Hausman variance scale"));
    }
    let eye = Matrix::identity(k, k);
    let inv_2sls = spd_solve(gram_2sls, &eye)?;
    let inv_ols = spd_solve(gram_ols, &eye)?;
    let mut w = inv_2sls * sigma2_1 - inv_ols * sigma2_2;
    w = (&w + w.transpose()) * 0.5;
    let solved = spd_solve(&w, &column_matrix(beta_gap))?;
    Ok(beta_gap.dot(&solved.column(0)).max(0.0))
}

/// The same quadratic form as [`hausman_statistic`], from `A = Ŷ1ᵀM_{Z1}Ŷ1`
/// and `C = Y1ᵀM_Z Y1` (so `Y1ᵀM_{Z1}Y1 = A + C`), without inverting `A`.
///
/// Uses `W⁻¹ = (A + C) M⁻¹ A` with `M = (σ²₁ − σ²₂) A + σ²₁ C`. With weak
/// instruments `A` is close to singular while `C` stays well conditioned, and
/// this form keeps full accuracy where the direct one loses digits in `A⁻¹`.
/// `M` failing its Cholesky factorization gives `NotPositiveDefinite`.
pub fn hausman_statistic_split(
    beta_gap: &Vector,
    gram_2sls: &Matrix,
    gram_mz: &Matrix,
    sigma2_1: f64,
    sigma2_2: f64,
) -> Result<f64> {
    let k = beta_gap.len();
    if gram_2sls.shape() != (k, k) || gram_mz.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrices must be {k}x{k}"
        )));
    }
    if !(sigma2_1 > 0.0 && sigma2_2 > 0.0) {
        return Err(Error::DegenerateVariance("Hausman variance scale"));
    }
    let m = gram_2sls * (sigma2_1 - sigma2_2) + gram_mz * sigma2_1;
    let m = (&m + m.transpose()) * 0.5;
    let solved = spd_solve(&m, &column_matrix(&(gram_2sls * beta_gap)))?;
    let left = (gram_2sls + gram_mz) * beta_gap;
    Ok(left.dot(&solved.column(0)).max(0.0))
}

/// Control-function Wald statistic `ρ̂ᵀ(σ̂²_u (V̂ᵀM_X V̂)⁻¹)⁻¹ρ̂`, from the CF
/// regression alone.
pub fn cf_statistic(cf: &CfFit, ds: &Dataset) -> Result<f64> {
    check_variance(cf.sigma2_u, ds.y2(), "control-function residual")?;
    let x = ds.design().x;
    let mx_v = LeastSquares::new(&x)?.annihilate(&cf.v_hat)?;
    Ok(cf_wald(&cf.rho_cf, &gram(&mx_v), cf.sigma2_u))
}

fn cf_wald(rho: &Vector, gram_cf: &Matrix, sigma2_u: f64) -> f64 {
    (rho.dot(&(gram_cf * rho)) / sigma2_u).max(0.0)
}

/// `H_n = (n σ̂²_2sls)⁻¹ gᵀ(Y1ᵀM_{Z1}Y1)g`.
pub fn compute_h_n(beta_gap: &Vector, gram_ols: &Matrix, sigma2_2sls: f64, n: usize) -> f64 {
    beta_gap.dot(&(gram_ols * beta_gap)) / (n as f64 * sigma2_2sls)
}

fn check_variance(sigma2: f64, y2: &Vector, what: &'static str) -> Result<()> {
    let scale = y2.norm_squared() / y2.len() as f64;
    if !(sigma2 > DEGENERATE_VARIANCE_REL * scale) {
        return Err(Error::DegenerateVariance(what));
    }
    Ok(())
}

/// Every fit and Gram matrix the statistics need, from one factorization of
/// each of `X`, `Z` and `Z1`.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub n: usize,
    pub ols: FitResult,
    pub tsls: FitResult,
    pub cf: CfFit,
    /// `Y1ᵀM_{Z1}Y1`.
    pub gram_ols: Matrix,
    /// `Ŷ1ᵀM_{Z1}Ŷ1` with `Ŷ1 = P_Z Y1`.
    pub gram_2sls: Matrix,
    /// `Y1ᵀM_Z Y1 = V̂ᵀV̂`.
    pub gram_mz: Matrix,
    /// `V̂ᵀM_X V̂`.
    pub gram_cf: Matrix,
    /// `β̂_ols − β̂_2sls`.
    pub beta_gap: Vector,
}

impl Analysis {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let n = ds.n();
        let d_y1 = ds.d_y1();
        let DesignMatrices { x, z } = ds.design();
        let y2 = ds.y2();
        let y1 = ds.y1();

        let x_f = LeastSquares::new(&x)?;
        let z_f = LeastSquares::new(&z)?;
        let z1_f = LeastSquares::new(ds.z1())?;

        let ols = FitResult::new(&x, y2, x_f.solve_vector(y2)?, d_y1, Method::Ols);

        let xhat = z_f.project(&x)?;
        let tsls_theta = LeastSquares::new(&xhat)?.solve_vector(y2)?;
        let tsls = FitResult::new(&x, y2, tsls_theta, d_y1, Method::Tsls);

        let y1_hat = z_f.project(y1)?;
        let v_hat = y1 - &y1_hat;
        let w = hstack(&x, &v_hat);
        let coef = LeastSquares::new(&w)?.solve_vector(y2)?;
        let u_hat = y2 - &w * &coef;
        let k = x.ncols();
        let cf = CfFit {
            theta_cf: coef.rows(0, k).into_owned(),
            rho_cf: coef.rows(k, d_y1).into_owned(),
            sigma2_u: u_hat.norm_squared() / n as f64,
            u_hat,
            v_hat,
        };

        let gram_ols = gram(&z1_f.annihilate(y1)?);
        let gram_2sls = gram(&z1_f.annihilate(&y1_hat)?);
        let gram_mz = gram(&cf.v_hat);
        let gram_cf = gram(&x_f.annihilate(&cf.v_hat)?);
        let beta_gap = &ols.beta_hat - &tsls.beta_hat;

        check_variance(ols.sigma2, y2, "OLS residual")?;
        check_variance(tsls.sigma2, y2, "2SLS residual")?;
        check_variance(cf.sigma2_u, y2, "control-function residual")?;

        Ok(Self {
            n,
            ols,
            tsls,
            cf,
            gram_ols,
            gram_2sls,
            gram_mz,
            gram_cf,
            beta_gap,
        })
    }

    pub fn df(&self) -> usize {
        self.beta_gap.len()
    }

    /// `t_{H,n}(σ²₁, σ²₂)` on this dataset, via [`hausman_statistic_split`].
    pub fn hausman(&self, sigma2_1: f64, sigma2_2: f64) -> Result<f64> {
        hausman_statistic_split(&self.beta_gap, &self.gram_2sls, &self.gram_mz, sigma2_1, sigma2_2)
    }

    pub fn t_h1(&self) -> Result<f64> {
        self.hausman(self.ols.sigma2, self.ols.sigma2)
    }

    pub fn t_h2(&self) -> Result<f64> {
        self.hausman(self.tsls.sigma2, self.tsls.sigma2)
    }

    pub fn t_h3(&self) -> Result<f64> {
        self.hausman(self.tsls.sigma2, self.ols.sigma2)
    }

    pub fn t_cf(&self) -> f64 {
        cf_wald(&self.cf.rho_cf, &self.gram_cf, self.cf.sigma2_u)
    }

    pub fn h_n(&self) -> f64 {
        compute_h_n(&self.beta_gap, &self.gram_ols, self.tsls.sigma2, self.n)
    }

    /// `[t_H1, t_H2, t_H3, t_CF]`, indexed by [`Statistic::index`].
    pub fn statistics(&self) -> Result<[f64; 4]> {
        Ok([self.t_h1()?, self.t_h2()?, self.t_h3()?, self.t_cf()])
    }

    /// Whether `β̂_ols − β̂_2sls` is large enough for strict ordering claims.
    pub fn gap_is_nonzero(&self) -> bool {
        self.beta_gap.norm() > STRICTNESS_REL * (1.0 + self.ols.beta_hat.norm())
    }
}

/// Reject decisions at one significance level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub alpha: f64,
    /// `1 − α` quantile of `χ²(df)`.
    pub critical_value: f64,
    pub t_h1: bool,
    pub t_h2: bool,
    pub t_h3: bool,
    pub t_cf: bool,
}

impl Decision {
    pub fn rejects(&self, stat: Statistic) -> bool {
        match stat {
            Statistic::TH1 => self.t_h1,
            Statistic::TH2 => self.t_h2,
            Statistic::TH3 => self.t_h3,
            Statistic::TCf => self.t_cf,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PValues {
    pub t_h1: f64,
    pub t_h2: f64,
    pub t_h3: f64,
    pub t_cf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub n: usize,
    pub df: usize,
    pub t_h1: f64,
    pub t_h2: f64,
    pub t_h3: f64,
    pub t_cf: f64,
    pub h_n: f64,
    pub p_values: PValues,
    pub decisions: Vec<Decision>,
    pub beta_ols: Vec<f64>,
    pub beta_2sls: Vec<f64>,
    pub beta_gap: Vec<f64>,
    pub rho_cf: Vec<f64>,
    pub sigma2_ols: f64,
    pub sigma2_2sls: f64,
    pub sigma2_u: f64,
}

impl TestReport {
    pub fn statistic(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::TH1 => self.t_h1,
            Statistic::TH2 => self.t_h2,
            Statistic::TH3 => self.t_h3,
            Statistic::TCf => self.t_cf,
        }
    }

    pub fn p_value(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::TH1 => self.p_values.t_h1,
            Statistic::TH2 => self.p_values.t_h2,
            Statistic::TH3 => self.p_values.t_h3,
            Statistic::TCf => self.p_values.t_cf,
        }
    }
}

/// Fits OLS, 2SLS and the CF regression, then computes the four statistics,
/// `H_n`, `χ²(d_y1)` p-values and reject decisions for each `α`.
pub fn run_all_tests(ds: &Dataset, alphas: &[f64]) -> Result<TestReport> {
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "significance level {a} is outside (0, 1)"
            )));
        }
    }
    let an = Analysis::new(ds)?;
    let [t_h1, t_h2, t_h3, t_cf] = an.statistics()?;
    let df = an.df();
    let p = |t: f64| 1.0 - chi2_cdf(df, t);
    let decisions = alphas
        .iter()
        .map(|&alpha| {
            let crit = chi2_quantile(df, 1.0 - alpha);
            Decision {
                alpha,
                critical_value: crit,
                t_h1: t_h1 > crit,
                t_h2: t_h2 > crit,
                t_h3: t_h3 > crit,
                t_cf: t_cf > crit,
            }
        })
        .collect();
    Ok(TestReport {
        n: an.n,
        df,
        t_h1,
        t_h2,
        t_h3,
        t_cf,
        h_n: an.h_n(),
        p_values: PValues {
            t_h1: p(t_h1),
            t_h2: p(t_h2),
            t_h3: p(t_h3),
            t_cf: p(t_cf),
        },
        decisions,
        beta_ols: an.ols.beta_hat.iter().copied().collect(),
        beta_2sls: an.tsls.beta_hat.iter().copied().collect(),
        beta_gap: an.beta_gap.iter().copied().collect(),
        rho_cf: an.cf.rho_cf.iter().copied().collect(),
        sigma2_ols: an.ols.sigma2,
        sigma2_2sls: an.tsls.sigma2,
        sigma2_u: an.cf.sigma2_u,
    })
}
