#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use endocheck::data::{load_csv, ColumnRoles, Dataset};
use endocheck::linalg::{Matrix, Vector};
use endocheck::simulation::{generate_dataset, DgpConfig};

pub const F1_SEED: u64 = 20240101;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn f1_csv() -> PathBuf {
    fixture_dir().join("f1.csv")
}

pub fn f1_expected_path() -> PathBuf {
    fixture_dir().join("f1_expected.json")
}

pub fn f1_roles() -> ColumnRoles {
    ColumnRoles::new("y")
        .endogenous(["x"])
        .instruments(["z1", "z2"])
        .with_intercept()
}

pub fn load_f1() -> Dataset {
    load_csv(f1_csv(), &f1_roles()).expect("F1 fixture loads")
}

pub fn load_f1_expected() -> oracle::OracleValues {
    let text = std::fs::read_to_string(f1_expected_path()).expect("F1 expected values present");
    serde_json::from_str(&text).expect("F1 expected values parse")
}

/// F1 as produced by the DGP with default settings.
pub fn f1_generated() -> Dataset {
    generate_dataset(&DgpConfig::default(), 0, F1_SEED).unwrap()
}

pub fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

pub fn oracle_values(ds: &Dataset) -> oracle::OracleValues {
    let y1 = row_major(ds.y1());
    let z1 = row_major(ds.z1());
    let z2 = row_major(ds.z2());
    oracle::evaluate(&oracle::OracleInput {
        n: ds.n(),
        y2: ds.y2().as_slice(),
        y1: &y1,
        d_y1: ds.d_y1(),
        z1: &z1,
        d_z1: ds.d_z1(),
        z2: &z2,
        d_z2: ds.d_z2(),
    })
}

/// `|a − b| ≤ tol · max(|a|, |b|, tiny)`, elementwise.
pub fn assert_rel(label: &str, got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "{label}: length");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        let scale = g.abs().max(w.abs()).max(1e-300);
        assert!(
            (g - w).abs() <= tol * scale,
            "{label}[{i}]: got {g:e}, want {w:e}, rel err {:e}",
            (g - w).abs() / scale
        );
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / got.abs().max(want.abs()).max(1e-300)
}

/// Parameters for one dataset of the randomized identity suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub cfg: DgpConfig,
    pub seed: u64,
}

/// Deterministic grid over n ∈ [30, 500], d_y1 ∈ {1,2,3}, d_z1 ∈ {1,2},
/// d_z2 ∈ {d_y1, …, d_y1 + 3}, with varied instrument strength and
/// endogeneity. `index` picks one case; the parameters cycle with co-prime
/// periods so every combination is visited.
pub fn suite_case(index: u64) -> SuiteCase {
    let mix = |salt: u64| -> u64 {
        let mut z = index.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let unit = |salt: u64| (mix(salt) >> 11) as f64 / (1u64 << 53) as f64;
    let d_y1 = 1 + (index % 3) as usize;
    let d_z1 = 1 + (index / 3 % 2) as usize;
    let d_z2 = d_y1 + (index / 6 % 4) as usize;
    let n = 30 + (mix(1) % 471) as usize;
    let intercept = !index.is_multiple_of(5);
    let rho_scale = [0.0, 0.2, 0.5, 1.0][(index / 24 % 4) as usize];
    let rho = (0..d_y1).map(|j| rho_scale * (unit(10 + j as u64) * 2.0 - 1.0 + 0.5)).collect();
    let cfg = DgpConfig {
        n,
        d_y1,
        d_z1,
        d_z2,
        beta: (0..d_y1).map(|j| unit(20 + j as u64) * 4.0 - 2.0).collect(),
        gamma: (0..d_z1).map(|j| unit(30 + j as u64) * 4.0 - 2.0).collect(),
        pi2_strength: 0.2 + 1.8 * unit(2),
        rho,
        sigma_u: 0.3 + 2.0 * unit(3),
        sigma_v: 0.3 + 2.0 * unit(4),
        intercept,
    };
    SuiteCase {
        cfg,
        seed: mix(5),
    }
}

pub fn suite_dataset(index: u64) -> Dataset {
    let case = suite_case(index);
    generate_dataset(&case.cfg, index, case.seed).expect("suite configuration is valid")
}

/// Dense normal-equations least squares in `f64`: `(AᵀA)⁻¹AᵀB` by LU inverse.
pub fn normal_equations(a: &Matrix, b: &Matrix) -> Matrix {
    let ata = a.transpose() * a;
    ata.try_inverse().expect("invertible Gram") * (a.transpose() * b)
}

/// `(AᵀA)⁻¹AᵀB` evaluated exactly in rationals, rounded once at the end.
pub fn exact_normal_equations(a: &Matrix, b: &Matrix) -> Matrix {
    let qa = oracle::QMat::from_f64(a.nrows(), a.ncols(), &row_major(a));
    let qb = oracle::QMat::from_f64(b.nrows(), b.ncols(), &row_major(b));
    let at = qa.t();
    let c = at.mul(&qa).inverse().mul(&at.mul(&qb));
    Matrix::from_row_slice(a.ncols(), b.ncols(), &c.to_f64())
}

/// Dense `A(AᵀA)⁻¹Aᵀ` in `f64`.
pub fn dense_projector(a: &Matrix) -> Matrix {
    let ata_inv = (a.transpose() * a).try_inverse().expect("invertible Gram");
    a * ata_inv * a.transpose()
}

pub fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(χ²(1) ≤ x)` by quadrature. Substituting `x = t²` turns the density
/// `x^{-1/2} e^{-x/2} / √(2π)` into the smooth `2 φ(t)` on `[0, √x]`.
pub fn chi2_1_cdf_by_quadrature(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let c = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    adaptive_simpson(|t| c * (-0.5 * t * t).exp(), 0.0, x.sqrt(), 1e-15)
}

/// Inverse of [`chi2_1_cdf_by_quadrature`] by bisection.
pub fn chi2_1_quantile_by_quadrature(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 50.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi2_1_cdf_by_quadrature(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
