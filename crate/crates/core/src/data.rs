//! Observed samples, CSV ingestion and admissibility checks.

use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hstack, LeastSquares, Matrix, Vector};

/// An observed sample `{y2_i, y1_i, z1_i, z2_i}`, `i = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y2: Vector,
    y1: Matrix,
    z1: Matrix,
    z2: Matrix,
}

impl Dataset {
    /// Checks shapes, finiteness, the order condition `d_z2 ≥ d_y1` and that
    /// `n > 2·d_y1 + d_z1` (enough rows for the control-function regression).
    pub fn new(y2: Vector, y1: Matrix, z1: Matrix, z2: Matrix) -> Result<Self> {
        let n = y2.len();
        for (name, m) in [("y1", &y1), ("z1", &z1), ("z2", &z2)] {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} rows, y2 has {n}",
                    m.nrows()
                )));
            }
        }
        if y2.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("y2"));
        }
        for (name, m) in [("y1", &y1), ("z1", &z1), ("z2", &z2)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        let (d_y1, d_z1, d_z2) = (y1.ncols(), z1.ncols(), z2.ncols());
        if d_y1 == 0 {
            return Err(Error::InvalidDataset(
                "at least one endogenous regressor is required".into(),
            ));
        }
        if d_z2 < d_y1 {
            return Err(Error::InvalidDataset(format!(
                "order condition fails: {d_z2} instruments for {d_y1} endogenous regressors"
            )));
        }
        if n <= 2 * d_y1 + d_z1 {
            return Err(Error::InvalidDataset(format!(
                "n = {n} rows but the control-function regression has {} columns",
                2 * d_y1 + d_z1
            )));
        }
        Ok(Self { y2, y1, z1, z2 })
    }

    pub fn n(&self) -> usize {
        self.y2.len()
    }

    pub fn d_y1(&self) -> usize {
        self.y1.ncols()
    }

    pub fn d_z1(&self) -> usize {
        self.z1.ncols()
    }

    pub fn d_z2(&self) -> usize {
        self.z2.ncols()
    }

    pub fn y2(&self) -> &Vector {
        &self.y2
    }

    pub fn y1(&self) -> &Matrix {
        &self.y1
    }

    pub fn z1(&self) -> &Matrix {
        &self.z1
    }

    pub fn z2(&self) -> &Matrix {
        &self.z2
    }

    pub fn design(&self) -> DesignMatrices {
        DesignMatrices {
            x: hstack(&self.y1, &self.z1),
            z: hstack(&self.z1, &self.z2),
        }
    }

    /// Replaces `Z2` by `Z2·T`. Callers keep `T` invertible so `span(Z)` is unchanged.
    pub fn with_instruments(&self, z2: Matrix) -> Result<Self> {
        Self::new(self.y2.clone(), self.y1.clone(), self.z1.clone(), z2)
    }

    pub fn with_outcome(&self, y2: Vector) -> Result<Self> {
        Self::new(y2, self.y1.clone(), self.z1.clone(), self.z2.clone())
    }
}

/// `X = [Y1 | Z1]` and `Z = [Z1 | Z2]`, in exactly that column order.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub x: Matrix,
    pub z: Matrix,
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnRoles {
    pub outcome: String,
    pub endogenous: Vec<String>,
    pub included_exogenous: Vec<String>,
    pub instruments: Vec<String>,
    /// Prepend a column of ones to `Z1`.
    pub add_intercept: bool,
}

impl ColumnRoles {
    pub fn new(outcome: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            ..Self::default()
        }
    }

    pub fn endogenous<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.endogenous.extend(cols.into_iter().map(Into::into));
        self
    }

    pub fn exogenous<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.included_exogenous
            .extend(cols.into_iter().map(Into::into));
        self
    }

    pub fn instruments<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.instruments.extend(cols.into_iter().map(Into::into));
        self
    }

    pub fn with_intercept(mut self) -> Self {
        self.add_intercept = true;
        self
    }

    fn check(&self) -> Result<()> {
        if self.outcome.is_empty() {
            return Err(Error::RoleConflict("no outcome column".into()));
        }
        let mut seen = HashSet::new();
        let all = std::iter::once(&self.outcome)
            .chain(&self.endogenous)
            .chain(&self.included_exogenous)
            .chain(&self.instruments);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::RoleConflict(format!(
                    "column `{name}` is assigned more than one role"
                )));
            }
        }
        Ok(())
    }
}

/// Reads a headed, comma-separated UTF-8 file and groups columns by role,
/// keeping file order within each role.
pub fn load_csv(path: impl AsRef<Path>, roles: &ColumnRoles) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, roles)
}

pub fn read_csv<R: std::io::Read>(reader: R, roles: &ColumnRoles) -> Result<Dataset> {
    roles.check()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile);
    }
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let resolve = |names: &[String]| -> Result<Vec<usize>> {
        // Keep file order within a role.
        let mut idx = names
            .iter()
            .map(|n| index_of(n))
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        Ok(idx)
    };
    let outcome = index_of(&roles.outcome)?;
    let endog = resolve(&roles.endogenous)?;
    let exog = resolve(&roles.included_exogenous)?;
    let inst = resolve(&roles.instruments)?;

    let mut y2 = Vec::new();
    let mut y1 = Vec::new();
    let mut z1 = Vec::new();
    let mut z2 = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumericCell {
                    row: row + 1,
                    column: headers[col].to_string(),
                }),
            }
        };
        y2.push(cell(outcome)?);
        for &c in &endog {
            y1.push(cell(c)?);
        }
        if roles.add_intercept {
            z1.push(1.0);
        }
        for &c in &exog {
            z1.push(cell(c)?);
        }
        for &c in &inst {
            z2.push(cell(c)?);
        }
    }
    let n = y2.len();
    if n == 0 {
        return Err(Error::EmptyFile);
    }
    let d_z1 = exog.len() + usize::from(roles.add_intercept);
    Dataset::new(
        Vector::from_vec(y2),
        Matrix::from_row_slice(n, endog.len(), &y1),
        Matrix::from_row_slice(n, d_z1, &z1),
        Matrix::from_row_slice(n, inst.len(), &z2),
    )
}

/// Writes `ds` as CSV under the given column names. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, names: &CsvNames, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![names.outcome.clone()];
    header.extend(names.endogenous.iter().cloned());
    header.extend(names.exogenous.iter().cloned());
    header.extend(names.instruments.iter().cloned());
    wtr.write_record(&header)?;
    let skip = usize::from(names.skip_intercept);
    for i in 0..ds.n() {
        let mut row = vec![ds.y2[i].to_string()];
        row.extend(ds.y1.row(i).iter().map(f64::to_string));
        row.extend(ds.z1.row(i).iter().skip(skip).map(f64::to_string));
        row.extend(ds.z2.row(i).iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Column names used by [`write_csv`].
#[derive(Debug, Clone)]
pub struct CsvNames {
    pub outcome: String,
    pub endogenous: Vec<String>,
    pub exogenous: Vec<String>,
    pub instruments: Vec<String>,
    /// Drop the leading ones column of `Z1` (it is re-added on load).
    pub skip_intercept: bool,
}

impl CsvNames {
    /// `y`, `x` (or `x1, x2, ..`), `w1, w2, ..`, `z1, z2, ..`.
    pub fn default_for(ds: &Dataset, skip_intercept: bool) -> Self {
        let numbered = |prefix: &str, k: usize| -> Vec<String> {
            (1..=k).map(|i| format!("{prefix}{i}")).collect()
        };
        let endogenous = if ds.d_y1() == 1 {
            vec!["x".to_string()]
        } else {
            numbered("x", ds.d_y1())
        };
        Self {
            outcome: "y".into(),
            endogenous,
            exogenous: numbered("w", ds.d_z1() - usize::from(skip_intercept)),
            instruments: numbered("z", ds.d_z2()),
            skip_intercept,
        }
    }

    pub fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            outcome: self.outcome.clone(),
            endogenous: self.endogenous.clone(),
            included_exogenous: self.exogenous.clone(),
            instruments: self.instruments.clone(),
            add_intercept: self.skip_intercept,
        }
    }
}

/// Outcome of checking that `XᵀX`, `XᵀP_Z X` and `[X | V̂]ᵀ[X | V̂]` are non-singular.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub xtx_ok: bool,
    pub xpzx_ok: bool,
    pub xv_ok: bool,
    /// `max|R_jj| / min|R_jj|` for `X`, `P_Z X` and `[X | V̂]`; infinite when
    /// the factorization failed.
    pub condition_estimates: [f64; 3],
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.xtx_ok && self.xpzx_ok && self.xv_ok
    }
}

/// Rank checks for the three designs the estimators factor. Never fails;
/// problems are reported in the returned value.
pub fn validate(ds: &Dataset) -> ValidationReport {
    let DesignMatrices { x, z } = ds.design();
    let mut messages = Vec::new();
    let mut cond = [f64::INFINITY; 3];

    let xtx_ok = match LeastSquares::new(&x) {
        Ok(f) => {
            cond[0] = f.condition_estimate();
            true
        }
        Err(e) => {
            messages.push(format!("X = [Y1 | Z1] is not of full column rank: {e}"));
            false
        }
    };

    let z_fact = match LeastSquares::new(&z) {
        Ok(f) => Some(f),
        Err(e) => {
            messages.push(format!(
                "Z = [Z1 | Z2] is not of full column rank ({e}); a column is duplicated or collinear"
            ));
            None
        }
    };

    let mut xpzx_ok = false;
    let mut xv_ok = false;
    if let Some(zf) = z_fact {
        match zf.project(&x).and_then(|xhat| LeastSquares::new(&xhat)) {
            Ok(f) => {
                cond[1] = f.condition_estimate();
                xpzx_ok = true;
            }
            Err(e) => messages.push(format!(
                "X'P_Z X is singular, so 2SLS is not identified: {e}"
            )),
        }
        match zf
            .annihilate(ds.y1())
            .and_then(|vhat| LeastSquares::new(&hstack(&x, &vhat)))
        {
            Ok(f) => {
                cond[2] = f.condition_estimate();
                xv_ok = true;
            }
            Err(e) => messages.push(format!(
                "control-function design [X | V̂] with V̂ = M_Z Y1 is rank-deficient \
                 (Y1 has no variation outside span(Z)): {e}"
            )),
        }
    } else {
        messages.push("X'P_Z X and [X | V̂] cannot be formed without a full-rank Z".into());
    }

    ValidationReport {
        xtx_ok,
        xpzx_ok,
        xv_ok,
        condition_estimates: cond,
        messages,
    }
}
