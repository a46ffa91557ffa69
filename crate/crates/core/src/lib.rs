//! Endogeneity testing for linear instrumental-variable models.
//!
//! The crate estimates the structural equation `y2 = y1'β + z1'γ + ε` by OLS,
//! two-stage least squares and the control-function regression that augments
//! the structural equation with the reduced-form residual `V̂ = M_Z Y1`. From
//! those fits it computes three Hausman statistics (`t_H1`, `t_H2`, `t_H3`,
//! which differ only in the residual-variance estimates they plug in) and the
//! control-function Wald statistic `t_CF`, together with chi-square inference.
//!
//! On every sample the four statistics satisfy `t_CF ≥ t_H1 ≥ t_H2 ≥ t_H3`,
//! strictly so whenever `β̂_ols ≠ β̂_2sls`. [`endogeneity::verify_identities`]
//! checks the exact algebraic relations behind that ordering on any dataset,
//! and [`simulation`] runs seeded Monte Carlo size and power studies.
//!
//! ```no_run
//! use endocheck::data::{load_csv, ColumnRoles};
//! use endocheck::endogeneity::run_all_tests;
//!
//! let roles = ColumnRoles::new("y")
//!     .endogenous(["x"])
//!     .instruments(["z1", "z2"])
//!     .with_intercept();
//! let ds = load_csv("f1.csv", &roles)?;
//! let report = run_all_tests(&ds, &[0.05])?;
//! println!("t_CF = {}", report.t_cf);
//! # Ok::<(), endocheck::Error>(())
//! ```

pub mod data;
pub mod endogeneity;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod simulation;

pub use error::{Error, Result};
