//! Exact rational evaluation of the textbook formulas, straight from their
//! definitions: dense `P_A = A(AᵀA)⁻¹Aᵀ`, `M_A = I − P_A`, normal equations and
//! explicit inverses. Every `f64` input is an exact rational, so the only
//! rounding is the final conversion back to `f64`.
//!
//! Nothing here touches the library's factorization code.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

type Q = BigRational;

#[derive(Clone, Debug)]
pub struct QMat {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            *m.at_mut(i, i) = Q::one();
        }
        m
    }

    pub fn from_f64(rows: usize, cols: usize, row_major: &[f64]) -> Self {
        assert_eq!(row_major.len(), rows * cols);
        Self {
            rows,
            cols,
            data: row_major
                .iter()
                .map(|v| Q::from_float(*v).expect("finite input"))
                .collect(),
        }
    }

    fn at(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }

    pub fn t(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * other.at(k, j);
                    *out.at_mut(i, j) += prod;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: &Q) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn hcat(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(i, j) = self.at(i, j).clone();
            }
            for j in 0..other.cols {
                *out.at_mut(i, self.cols + j) = other.at(i, j).clone();
            }
        }
        out
    }

    pub fn rows_range(&self, start: usize, len: usize) -> Self {
        let mut out = Self::zeros(len, self.cols);
        for i in 0..len {
            for j in 0..self.cols {
                *out.at_mut(i, j) = self.at(start + i, j).clone();
            }
        }
        out
    }

    /// Gauss–Jordan elimination; panics on a singular matrix.
    pub fn inverse(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let k = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(k);
        for col in 0..k {
            let pivot = (col..k)
                .find(|&r| !a.at(r, col).is_zero())
                .expect("singular matrix in oracle");
            if pivot != col {
                for j in 0..k {
                    a.data.swap(pivot * k + j, col * k + j);
                    inv.data.swap(pivot * k + j, col * k + j);
                }
            }
            let p = a.at(col, col).clone();
            for j in 0..k {
                *a.at_mut(col, j) /= &p;
                *inv.at_mut(col, j) /= &p;
            }
            for r in 0..k {
                if r == col || a.at(r, col).is_zero() {
                    continue;
                }
                let f = a.at(r, col).clone();
                for j in 0..k {
                    let da = &f * a.at(col, j);
                    *a.at_mut(r, j) -= da;
                    let di = &f * inv.at(col, j);
                    *inv.at_mut(r, j) -= di;
                }
            }
        }
        inv
    }

    /// `A(AᵀA)⁻¹Aᵀ`.
    pub fn projector(&self) -> Self {
        self.mul(&self.t().mul(self).inverse()).mul(&self.t())
    }

    pub fn annihilator(&self) -> Self {
        Self::identity(self.rows).sub(&self.projector())
    }

    pub fn scalar(&self) -> Q {
        assert_eq!((self.rows, self.cols), (1, 1));
        self.data[0].clone()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(q_to_f64).collect()
    }
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().expect("representable")
}

/// Expected estimates and statistics for one dataset.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleValues {
    pub n: usize,
    pub d_y1: usize,
    pub d_z1: usize,
    pub d_z2: usize,
    pub theta_ols: Vec<f64>,
    pub theta_2sls: Vec<f64>,
    pub theta_cf: Vec<f64>,
    pub rho_cf: Vec<f64>,
    /// Row-major `(d_z1 + d_z2) × d_y1`.
    pub pi_hat: Vec<f64>,
    pub sigma2_ols: f64,
    pub sigma2_2sls: f64,
    pub sigma2_u: f64,
    pub t_h1: f64,
    pub t_h2: f64,
    pub t_h3: f64,
    pub t_cf: f64,
    pub h_n: f64,
}

/// All inputs row-major.
pub struct OracleInput<'a> {
    pub n: usize,
    pub y2: &'a [f64],
    pub y1: &'a [f64],
    pub d_y1: usize,
    pub z1: &'a [f64],
    pub d_z1: usize,
    pub z2: &'a [f64],
    pub d_z2: usize,
}

pub fn evaluate(inp: &OracleInput) -> OracleValues {
    let n = inp.n;
    let y2 = QMat::from_f64(n, 1, inp.y2);
    let y1 = QMat::from_f64(n, inp.d_y1, inp.y1);
    let z1 = QMat::from_f64(n, inp.d_z1, inp.z1);
    let z2 = QMat::from_f64(n, inp.d_z2, inp.z2);
    let x = y1.hcat(&z1);
    let z = z1.hcat(&z2);
    let nq = Q::from_integer(BigInt::from(n));

    let p_z = z.projector();
    let m_z = QMat::identity(n).sub(&p_z);
    let m_z1 = z1.annihilator();
    let m_x = x.annihilator();

    // (XᵀX)⁻¹XᵀY2
    let theta_ols = x.t().mul(&x).inverse().mul(&x.t()).mul(&y2);
    // (XᵀP_Z X)⁻¹XᵀP_Z Y2
    let xpz = x.t().mul(&p_z);
    let theta_2sls = xpz.mul(&x).inverse().mul(&xpz).mul(&y2);
    // (ZᵀZ)⁻¹ZᵀY1
    let pi_hat = z.t().mul(&z).inverse().mul(&z.t()).mul(&y1);

    let v_hat = m_z.mul(&y1);
    let w = x.hcat(&v_hat);
    let coef = w.t().mul(&w).inverse().mul(&w.t()).mul(&y2);
    let k = x.cols;
    let theta_cf = coef.rows_range(0, k);
    let rho_cf = coef.rows_range(k, inp.d_y1);

    let sigma2 = |theta: &QMat, design: &QMat| -> Q {
        let r = y2.sub(&design.mul(theta));
        r.t().mul(&r).scalar() / &nq
    };
    let s_ols = sigma2(&theta_ols, &x);
    let s_2sls = sigma2(&theta_2sls, &x);
    let s_u = sigma2(&coef, &w);

    let y1_hat = p_z.mul(&y1);
    let a_inv = y1_hat.t().mul(&m_z1).mul(&y1_hat).inverse();
    let gram_ols = y1.t().mul(&m_z1).mul(&y1);
    let b_inv = gram_ols.inverse();
    let gap = theta_ols
        .rows_range(0, inp.d_y1)
        .sub(&theta_2sls.rows_range(0, inp.d_y1));
    let t_h = |s1: &Q, s2: &Q| -> Q {
        let w = a_inv.scale(s1).sub(&b_inv.scale(s2));
        gap.t().mul(&w.inverse()).mul(&gap).scalar()
    };
    let t_h1 = t_h(&s_ols, &s_ols);
    let t_h2 = t_h(&s_2sls, &s_2sls);
    let t_h3 = t_h(&s_2sls, &s_ols);

    // Wald statistic with Asv(ρ̂) = σ̂²_u (V̂ᵀM_X V̂)⁻¹.
    let asv = v_hat.t().mul(&m_x).mul(&v_hat).inverse().scale(&s_u);
    let t_cf = rho_cf.t().mul(&asv.inverse()).mul(&rho_cf).scalar();

    let h_n = gap.t().mul(&gram_ols).mul(&gap).scalar() / (nq * &s_2sls);

    OracleValues {
        n,
        d_y1: inp.d_y1,
        d_z1: inp.d_z1,
        d_z2: inp.d_z2,
        theta_ols: theta_ols.to_f64(),
        theta_2sls: theta_2sls.to_f64(),
        theta_cf: theta_cf.to_f64(),
        rho_cf: rho_cf.to_f64(),
        pi_hat: pi_hat.to_f64(),
        sigma2_ols: q_to_f64(&s_ols),
        sigma2_2sls: q_to_f64(&s_2sls),
        sigma2_u: q_to_f64(&s_u),
        t_h1: q_to_f64(&t_h1),
        t_h2: q_to_f64(&t_h2),
        t_h3: q_to_f64(&t_h3),
        t_cf: q_to_f64(&t_cf),
        h_n: q_to_f64(&h_n),
    }
}
