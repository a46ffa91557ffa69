//! Numerical check of the exact finite-sample relations among the OLS, 2SLS
//! and control-function estimates and the four statistics.

use serde::Serialize;

use super::Analysis;
use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::{column_matrix, spd_solve, LeastSquares, Vector};

/// Relative slack for the weak ordering `t_CF ≥ t_H1 ≥ t_H2 ≥ t_H3`; the
/// statistics are computed along different routes and may tie to rounding.
pub const WEAK_ORDER_SLACK: f64 = 1e-9;

/// Relative discrepancies `|a − b| / (1 + |b|)` (max-norm for vectors).
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    /// `θ̂_cf` vs `θ̂_2sls`.
    pub lemma1_theta_gap: f64,
    /// `ρ̂_cf` vs `(Y1ᵀM_Z Y1)⁻¹(Y1ᵀM_{Z1}Y1)(β̂_ols − β̂_2sls)`.
    pub lemma1_rho_gap: f64,
    /// `t_CF` from the CF regression vs its Hausman form with `σ²₁ = σ²₂ = σ̂²_u`.
    pub lemma1_tcf_gap: f64,
    /// `σ̂²_u` vs `σ̂²_ols (1 − t_H1/n)`.
    pub lemma2_gap_ols: f64,
    /// `σ̂²_u` vs `σ̂²_2sls (1 − t_H2/n − H_n)`.
    pub lemma2_gap_2sls: f64,
    /// Spread of `σ̂²_ols t_H1`, `σ̂²_2sls t_H2`, `σ̂²_u t_CF`.
    pub pl41_gap: f64,
    /// `θ̂_ols − θ̂_2sls` vs `[I; −(Z1ᵀZ1)⁻¹Z1ᵀY1](β̂_ols − β̂_2sls)`.
    pub pl32_gap: f64,
    /// Strict ordering when `strict_required`, weak ordering otherwise.
    pub ordering_ok: bool,
    pub strict_required: bool,
    /// `[t_H1, t_H2, t_H3, t_CF]`.
    pub statistics: [f64; 4],
    pub h_n: f64,
    pub tol: f64,
}

impl IdentityReport {
    pub fn gaps(&self) -> [(&'static str, f64); 7] {
        [
            ("lemma1_theta_gap", self.lemma1_theta_gap),
            ("lemma1_rho_gap", self.lemma1_rho_gap),
            ("lemma1_tcf_gap", self.lemma1_tcf_gap),
            ("lemma2_gap_ols", self.lemma2_gap_ols),
            ("lemma2_gap_2sls", self.lemma2_gap_2sls),
            ("pl41_gap", self.pl41_gap),
            ("pl32_gap", self.pl32_gap),
        ]
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().iter().map(|g| g.1).fold(0.0, f64::max)
    }

    /// Every gap is finite and below `tol`, and the ordering holds.
    pub fn passes(&self) -> bool {
        self.ordering_ok && self.gaps().iter().all(|(_, g)| g.is_finite() && *g < self.tol)
    }
}

/// `stats = [t_H1, t_H2, t_H3, t_CF]`. Strict: `t_CF > t_H1 > t_H2 > t_H3 > 0`.
/// Weak: each inequality may fail by at most [`WEAK_ORDER_SLACK`]` · (1 + |rhs|)`.
pub fn ordering_consistent(stats: &[f64; 4], strict: bool) -> bool {
    let [h1, h2, h3, cf] = *stats;
    let chain = [(cf, h1), (h1, h2), (h2, h3)];
    if strict {
        chain.iter().all(|&(a, b)| a > b) && h3 > 0.0
    } else {
        chain
            .iter()
            .all(|&(a, b)| a >= b - WEAK_ORDER_SLACK * (1.0 + b.abs()))
            && h3 >= -WEAK_ORDER_SLACK
    }
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / (1.0 + scale)
}

fn rel_gap_scalar(a: f64, b: f64) -> f64 {
    rel_gap(&[a], &[b])
}

/// Recomputes each exact relation from independent pieces and reports the
/// discrepancies. `tol` is stored for [`IdentityReport::passes`].
pub fn verify_identities(ds: &Dataset, tol: f64) -> Result<IdentityReport> {
    let an = Analysis::new(ds)?;
    let n = an.n as f64;
    let stats = an.statistics()?;
    let [t_h1, t_h2, _t_h3, t_cf] = stats;
    let h_n = an.h_n();
    let s_ols = an.ols.sigma2;
    let s_2sls = an.tsls.sigma2;
    let s_u = an.cf.sigma2_u;
    let gap = &an.beta_gap;

    let lemma1_theta_gap = rel_gap(an.cf.theta_cf.as_slice(), an.tsls.theta_hat.as_slice());

    let rho_closed = spd_solve(&an.gram_mz, &column_matrix(&(&an.gram_ols * gap)))?;
    let lemma1_rho_gap = rel_gap(an.cf.rho_cf.as_slice(), rho_closed.as_slice());

    // Hausman form of t_CF; the OLS-side Gram is Y1ᵀM_{Z1}Y1 = gram_2sls + gram_mz.
    let t_cf_hausman = an.hausman(s_u, s_u)?;
    let lemma1_tcf_gap = rel_gap_scalar(t_cf, t_cf_hausman);

    let lemma2_gap_ols = rel_gap_scalar(s_u, s_ols * (1.0 - t_h1 / n));
    let lemma2_gap_2sls = rel_gap_scalar(s_u, s_2sls * (1.0 - t_h2 / n - h_n));

    let products = [s_ols * t_h1, s_2sls * t_h2, s_u * t_cf];
    let spread = products.iter().cloned().fold(f64::MIN, f64::max)
        - products.iter().cloned().fold(f64::MAX, f64::min);
    let pl41_gap = spread / (1.0 + products.iter().map(|v| v.abs()).fold(0.0, f64::max));

    let theta_diff = &an.ols.theta_hat - &an.tsls.theta_hat;
    let d_y1 = ds.d_y1();
    let mut mapped = Vector::zeros(d_y1 + ds.d_z1());
    mapped.rows_mut(0, d_y1).copy_from(gap);
    if ds.d_z1() > 0 {
        let coef = LeastSquares::new(ds.z1())?.solve(ds.y1())?;
        let lower = -(coef * gap);
        mapped.rows_mut(d_y1, ds.d_z1()).copy_from(&lower);
    }
    let pl32_gap = rel_gap(theta_diff.as_slice(), mapped.as_slice());

    let strict_required = an.gap_is_nonzero();
    Ok(IdentityReport {
        lemma1_theta_gap,
        lemma1_rho_gap,
        lemma1_tcf_gap,
        lemma2_gap_ols,
        lemma2_gap_2sls,
        pl41_gap,
        pl32_gap,
        ordering_ok: ordering_consistent(&stats, strict_required),
        strict_required,
        statistics: stats,
        h_n,
        tol,
    })
}
