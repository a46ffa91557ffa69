//! Chi-square distribution via the regularized incomplete gamma function.

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let p = series(a, x) * log_prefactor.exp();
        (p, 1.0 - p)
    } else {
        let q = continued_fraction(a, x) * log_prefactor.exp();
        (1.0 - q, q)
    }
}

/// `Σ_k x^k / (a (a+1) ⋯ (a+k))`.
fn series(a: f64, x: f64) -> f64 {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz evaluation of the continued fraction for `Γ(a, x) e^x x^{-a}`.
fn continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `P(χ²(df) ≤ x)`; zero for `x ≤ 0`.
///
/// # Panics
/// If `df == 0`.
pub fn chi2_cdf(df: usize, x: f64) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    gamma_pq(df as f64 / 2.0, x / 2.0).0.clamp(0.0, 1.0)
}

pub fn chi2_pdf(df: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return match df {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    let k = df as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Inverse of [`chi2_cdf`]: bracketing and bisection, then safeguarded
/// Newton steps. `p ≤ 0` maps to 0 and `p ≥ 1` to `+∞`.
pub fn chi2_quantile(df: usize, p: f64) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * df as f64 + 2.0;
    while chi2_cdf(df, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-3 * (1.0 + lo) {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(df, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi2_cdf(df, x) - p;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = chi2_pdf(df, x);
        let mut next = x - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * (1.0 + x) || hi - lo <= 1e-15 * (1.0 + x) {
            break;
        }
    }
    x
}
