//! Seeded data-generating process and Monte Carlo size/power studies.
//!
//! The DGP is
//!
//! ```text
//! y1 = z2ᵀπ2 + v              (π1 = 0, every entry of π2 equal to c)
//! ε  = vᵀρ + u
//! y2 = y1ᵀβ + z1ᵀγ + ε
//! ```
//!
//! with `z`, `v`, `u` independent Gaussians. `ρ = 0` is the exogenous null.
//!
//! Replication `r` of a run with seed `s` draws from its own ChaCha8 stream,
//! keyed by a splitmix64 mix of `(s, r)`. Results therefore do not depend on
//! how replications are scheduled across threads. Normals come from the
//! Marsaglia polar method; each row draws, in order, the non-constant `z1`
//! entries, `z2`, `v`, then `u`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::endogeneity::{chi2_quantile, ordering_consistent, Analysis, Statistic};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    pub d_y1: usize,
    pub d_z1: usize,
    pub d_z2: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Common value `c` of every entry of `π2`.
    pub pi2_strength: f64,
    pub rho: Vec<f64>,
    pub sigma_u: f64,
    pub sigma_v: f64,
    /// First column of `z1` is the constant 1.
    pub intercept: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 16,
            d_y1: 1,
            d_z1: 1,
            d_z2: 2,
            beta: vec![1.0],
            gamma: vec![1.0],
            pi2_strength: 1.0,
            rho: vec![0.5],
            sigma_u: 1.0,
            sigma_v: 1.0,
            intercept: true,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.d_y1 == 0 {
            return bad("d_y1 must be at least 1".into());
        }
        if self.d_z2 < self.d_y1 {
            return bad(format!("d_z2 = {} < d_y1 = {}", self.d_z2, self.d_y1));
        }
        if self.n <= 2 * self.d_y1 + self.d_z1 {
            return bad(format!(
                "n = {} must exceed 2·d_y1 + d_z1 = {}",
                self.n,
                2 * self.d_y1 + self.d_z1
            ));
        }
        if self.intercept && self.d_z1 == 0 {
            return bad("intercept requires d_z1 ≥ 1".into());
        }
        for (name, v, len) in [
            ("beta", &self.beta, self.d_y1),
            ("gamma", &self.gamma, self.d_z1),
            ("rho", &self.rho, self.d_y1),
        ] {
            if v.len() != len {
                return bad(format!("{name} has length {}, expected {len}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} has a non-finite entry"));
            }
        }
        if !self.pi2_strength.is_finite() {
            return bad("pi2_strength must be finite".into());
        }
        for (name, s) in [("sigma_u", self.sigma_u), ("sigma_v", self.sigma_v)] {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub replications: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub tests: Vec<Statistic>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 20240101,
            alphas: vec![0.01, 0.05, 0.10],
            tests: Statistic::ALL.to_vec(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::ConfigInvalid("replications must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::ConfigInvalid("no significance levels".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::ConfigInvalid(format!("significance level {a} is outside (0, 1)")));
        }
        if self.tests.is_empty() {
            return Err(Error::ConfigInvalid("no tests selected".into()));
        }
        Ok(())
    }
}

/// Rejection tally for one test at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCell {
    pub test: Statistic,
    pub alpha: f64,
    pub rejections: u64,
    /// `rejections / (R − degenerate_count)`.
    pub rate: f64,
    /// `sqrt(rate (1 − rate) / (R − degenerate_count))`.
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub rho: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub cells: Vec<RejectionCell>,
    /// Replications skipped because estimation failed.
    pub degenerate_count: u64,
    /// Replications where `t_CF ≥ t_H1 ≥ t_H2 ≥ t_H3` failed.
    pub ordering_violations: u64,
}

impl SimResult {
    pub fn cell(&self, test: Statistic, alpha: f64) -> Option<&RejectionCell> {
        self.cells.iter().find(|c| c.test == test && c.alpha == alpha)
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for replication `index` of a run seeded with `seed`.
fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let base = splitmix64(seed ^ splitmix64(index.wrapping_add(SPLITMIX_GAMMA)));
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(base.wrapping_add((i as u64 + 1).wrapping_mul(SPLITMIX_GAMMA)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard normals by the Marsaglia polar method.
struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, spare: None }
    }

    /// Uniform on `(-1, 1)` with 53 random bits.
    fn symmetric_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        2.0 * (bits as f64 * (1.0 / (1u64 << 53) as f64)) - 1.0
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let a = self.symmetric_uniform();
            let b = self.symmetric_uniform();
            let s = a * a + b * b;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(b * f);
                return a * f;
            }
        }
    }
}

/// One sample from the DGP. Identical arguments give bit-identical data.
pub fn generate_dataset(cfg: &DgpConfig, replication_index: u64, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n;
    let mut normals = NormalSource::new(substream(seed, replication_index));
    let mut y2 = Vector::zeros(n);
    let mut y1 = Matrix::zeros(n, cfg.d_y1);
    let mut z1 = Matrix::zeros(n, cfg.d_z1);
    let mut z2 = Matrix::zeros(n, cfg.d_z2);
    let mut v = vec![0.0; cfg.d_y1];
    for i in 0..n {
        for j in 0..cfg.d_z1 {
            z1[(i, j)] = if cfg.intercept && j == 0 {
                1.0
            } else {
                normals.next()
            };
        }
        for j in 0..cfg.d_z2 {
            z2[(i, j)] = normals.next();
        }
        for vj in v.iter_mut() {
            *vj = cfg.sigma_v * normals.next();
        }
        let u = cfg.sigma_u * normals.next();

        let z2_sum: f64 = z2.row(i).iter().sum();
        let mut structural = 0.0;
        for j in 0..cfg.d_y1 {
            let y = cfg.pi2_strength * z2_sum + v[j];
            y1[(i, j)] = y;
            structural += cfg.beta[j] * y + cfg.rho[j] * v[j];
        }
        for j in 0..cfg.d_z1 {
            structural += cfg.gamma[j] * z1[(i, j)];
        }
        y2[i] = structural + u;
    }
    Dataset::new(y2, y1, z1, z2)
}

#[derive(Debug, Clone, Default)]
struct Tally {
    rejections: Vec<u64>,
    degenerate: u64,
    violations: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        if self.rejections.is_empty() {
            return other;
        }
        for (a, b) in self.rejections.iter_mut().zip(&other.rejections) {
            *a += b;
        }
        self.degenerate += other.degenerate;
        self.violations += other.violations;
        self
    }
}

/// Runs `sim.replications` draws from `dgp` and tallies rejections of each
/// selected test at each level against the `χ²(d_y1)` critical value.
/// Replications whose estimation fails are counted in `degenerate_count`.
pub fn run_monte_carlo(dgp: &DgpConfig, sim: &SimConfig) -> Result<SimResult> {
    dgp.validate()?;
    sim.validate()?;
    let crit: Vec<f64> = sim
        .alphas
        .iter()
        .map(|a| chi2_quantile(dgp.d_y1, 1.0 - a))
        .collect();
    let cells = sim.tests.len() * sim.alphas.len();

    let replicate = |r: u64| -> Tally {
        let mut t = Tally {
            rejections: vec![0; cells],
            ..Tally::default()
        };
        let stats = generate_dataset(dgp, r, sim.seed)
            .and_then(|ds| Analysis::new(&ds))
            .and_then(|an| an.statistics());
        match stats {
            Ok(stats) => {
                if !ordering_consistent(&stats, false) {
                    t.violations += 1;
                }
                for (ti, test) in sim.tests.iter().enumerate() {
                    let value = stats[test.index()];
                    for (ai, c) in crit.iter().enumerate() {
                        if value > *c {
                            t.rejections[ti * sim.alphas.len() + ai] += 1;
                        }
                    }
                }
            }
            Err(_) => t.degenerate += 1,
        }
        t
    };

    let tally = (0..sim.replications as u64)
        .into_par_iter()
        .map(replicate)
        .reduce(Tally::default, Tally::merge);

    let effective = sim.replications as u64 - tally.degenerate;
    let mut out = Vec::with_capacity(cells);
    for (ti, test) in sim.tests.iter().enumerate() {
        for (ai, alpha) in sim.alphas.iter().enumerate() {
            let rejections = tally.rejections.get(ti * sim.alphas.len() + ai).copied().unwrap_or(0);
            let (rate, mc_stderr) = if effective == 0 {
                (0.0, 0.0)
            } else {
                let p = rejections as f64 / effective as f64;
                (p, (p * (1.0 - p) / effective as f64).sqrt())
            };
            out.push(RejectionCell {
                test: *test,
                alpha: *alpha,
                rejections,
                rate,
                mc_stderr,
            });
        }
    }
    Ok(SimResult {
        rho: dgp.rho.clone(),
        n: dgp.n,
        replications: sim.replications,
        seed: sim.seed,
        cells: out,
        degenerate_count: tally.degenerate,
        ordering_violations: tally.violations,
    })
}

/// [`run_monte_carlo`] at each `ρ` in `rho_grid`, in grid order. Every grid
/// point reuses the same seed, so the draws of `z`, `v`, `u` are shared.
pub fn power_curve(dgp_base: &DgpConfig, rho_grid: &[Vec<f64>], sim: &SimConfig) -> Result<Vec<SimResult>> {
    if rho_grid.is_empty() {
        return Err(Error::ConfigInvalid("empty rho grid".into()));
    }
    rho_grid
        .iter()
        .map(|rho| {
            let dgp = DgpConfig {
                rho: rho.clone(),
                ..dgp_base.clone()
            };
            run_monte_carlo(&dgp, sim)
        })
        .collect()
}

/// JSON document accepted by `endocheck simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub dgp: DgpConfig,
    #[serde(default)]
    pub sim: SimConfig,
    /// When present, one run per entry with `dgp.rho` replaced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<Vec<f64>>>,
}

impl SimulationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SimulationSpec =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(Error::ConfigInvalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        spec.dgp.validate()?;
        spec.sim.validate()?;
        Ok(spec)
    }

    pub fn run(&self) -> Result<SimulationOutput> {
        let results = match &self.rho_grid {
            Some(grid) => power_curve(&self.dgp, grid, &self.sim)?,
            None => vec![run_monte_carlo(&self.dgp, &self.sim)?],
        };
        Ok(SimulationOutput {
            schema_version: SCHEMA_VERSION,
            dgp: self.dgp.clone(),
            sim: self.sim.clone(),
            results,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub schema_version: u32,
    pub dgp: DgpConfig,
    pub sim: SimConfig,
    pub results: Vec<SimResult>,
}

impl SimulationOutput {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Flat CSV: `test,alpha,rho,rate,stderr,R,n,seed`. Multi-dimensional
    /// `ρ` is written as `;`-separated entries.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["test", "alpha", "rho", "rate", "stderr", "R", "n", "seed"])?;
        for res in &self.results {
            let rho = res
                .rho
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";");
            for c in &res.cells {
                wtr.write_record([
                    c.test.name().to_string(),
                    c.alpha.to_string(),
                    rho.clone(),
                    c.rate.to_string(),
                    c.mc_stderr.to_string(),
                    res.replications.to_string(),
                    res.n.to_string(),
                    res.seed.to_string(),
                ])?;
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io {
            path: "<csv buffer>".into(),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
