//! `endocheck` command-line interface.
//!
//! Exit codes:
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success                                                        |
//! | 1    | output could not be written                                    |
//! | 2    | invalid input: usage, unreadable/malformed CSV, failed rank checks |
//! | 3    | degenerate residual variance (statistics undefined)           |
//! | 4    | `verify`: an identity gap reached `--tol` or the ordering failed |
//! | 5    | `simulate`: configuration invalid                              |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use endocheck::data::{load_csv, validate, ColumnRoles, Dataset};
use endocheck::endogeneity::{run_all_tests, verify_identities, IdentityReport, Statistic, TestReport};
use endocheck::simulation::{generate_dataset, DgpConfig, SimulationOutput, SimulationSpec, SCHEMA_VERSION};
use endocheck::Error;

const EXIT_IO: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "endocheck", version, about = "Endogeneity tests for linear IV models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run t_H1, t_H2, t_H3 and t_CF on a CSV dataset.
    Test(TestArgs),
    /// Check the exact finite-sample identities on a dataset.
    Verify(VerifyArgs),
    /// Monte Carlo size/power study from a JSON config.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum, Default, PartialEq, Eq)]
enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Args)]
struct RoleArgs {
    /// Outcome column (y2).
    #[arg(long)]
    outcome: Option<String>,
    /// Endogenous regressor columns (Y1), comma-separated.
    #[arg(long, value_delimiter = ',')]
    endog: Vec<String>,
    /// Included exogenous columns (Z1), comma-separated, or `none`.
    #[arg(long, value_delimiter = ',')]
    exog: Vec<String>,
    /// Excluded instrument columns (Z2), comma-separated.
    #[arg(long, value_delimiter = ',')]
    iv: Vec<String>,
    /// Prepend a constant column to Z1.
    #[arg(long)]
    add_intercept: bool,
}

impl RoleArgs {
    fn roles(&self) -> Result<ColumnRoles, Error> {
        let outcome = self
            .outcome
            .clone()
            .ok_or_else(|| Error::RoleConflict("--outcome is required".into()))?;
        let exog: Vec<String> = self
            .exog
            .iter()
            .filter(|s| s.as_str() != "none" && !s.is_empty())
            .cloned()
            .collect();
        let mut roles = ColumnRoles::new(outcome)
            .endogenous(self.endog.iter().cloned())
            .exogenous(exog)
            .instruments(self.iv.iter().cloned());
        roles.add_intercept = self.add_intercept;
        Ok(roles)
    }
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with a header row.
    input: PathBuf,
    #[command(flatten)]
    roles: RoleArgs,
    /// Significance levels, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10])]
    alpha: Vec<f64>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Input CSV; omit when using --random.
    input: Option<PathBuf>,
    #[command(flatten)]
    roles: RoleArgs,
    /// Relative tolerance every identity gap must stay below.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Verify on a simulated dataset instead, e.g. `--random n=200 seed=7`.
    /// Keys: n, seed, d_y1, d_z1, d_z2, c, rho.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    random: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON document with `schema_version`, `dgp`, `sim` and optional `rho_grid`.
    #[arg(long)]
    config: PathBuf,
    /// Directory for `sim_result.json` and `sim_result.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::DegenerateVariance(_) => EXIT_DEGENERATE,
        Error::ConfigInvalid(_) => EXIT_CONFIG,
        _ => EXIT_INPUT,
    };
    Failure::new(code, e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("endocheck: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_checked(path: &Path, roles: &RoleArgs) -> Result<Dataset, Failure> {
    let roles = roles.roles().map_err(classify)?;
    let ds = load_csv(path, &roles).map_err(classify)?;
    let report = validate(&ds);
    if !report.is_admissible() {
        let mut msg = format!("{}: dataset is not admissible", path.display());
        for m in &report.messages {
            let _ = write!(msg, "; {m}");
        }
        return Err(Failure::new(EXIT_INPUT, msg));
    }
    Ok(ds)
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn to_json<T: Serialize>(body: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
    .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cmd_test(args: TestArgs) -> Result<String, Failure> {
    let ds = load_checked(&args.input, &args.roles)?;
    let report = run_all_tests(&ds, &args.alpha).map_err(classify)?;
    match args.format {
        Format::Json => to_json(&report),
        Format::Csv => Ok(report_csv(&report)),
        Format::Table => Ok(report_table(&report)),
    }
}

fn report_table(r: &TestReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n = {}, df = {}, H_n = {:.6}", r.n, r.df, r.h_n);
    let _ = writeln!(
        s,
        "sigma2: ols = {:.6}, 2sls = {:.6}, cf = {:.6}",
        r.sigma2_ols, r.sigma2_2sls, r.sigma2_u
    );
    let _ = write!(s, "{:<6} {:>14} {:>12}", "test", "statistic", "p-value");
    for d in &r.decisions {
        let _ = write!(s, " {:>9}", format!("a={}", d.alpha));
    }
    s.push('\n');
    for stat in Statistic::ALL {
        let _ = write!(s, "{:<6} {:>14.6} {:>12.6}", stat.name(), r.statistic(stat), r.p_value(stat));
        for d in &r.decisions {
            let _ = write!(s, " {:>9}", if d.rejects(stat) { "reject" } else { "-" });
        }
        s.push('\n');
    }
    s
}

fn report_csv(r: &TestReport) -> String {
    let mut s = String::from("test,statistic,df,p_value");
    for d in &r.decisions {
        let _ = write!(s, ",reject_{}", d.alpha);
    }
    s.push('\n');
    for stat in Statistic::ALL {
        let _ = write!(s, "{},{},{},{}", stat.name(), r.statistic(stat), r.df, r.p_value(stat));
        for d in &r.decisions {
            let _ = write!(s, ",{}", d.rejects(stat));
        }
        s.push('\n');
    }
    s
}

fn random_dataset(spec: &[String]) -> Result<Dataset, Failure> {
    let mut cfg = DgpConfig::default();
    let mut seed = 0u64;
    let bad = |kv: &str| Failure::new(EXIT_INPUT, format!("bad --random entry `{kv}`"));
    for kv in spec {
        let (key, value) = kv.split_once('=').ok_or_else(|| bad(kv))?;
        let float = || value.parse::<f64>().map_err(|_| bad(kv));
        let count = || value.parse::<usize>().map_err(|_| bad(kv));
        match key {
            "n" => cfg.n = count()?,
            "seed" => seed = value.parse().map_err(|_| bad(kv))?,
            "c" => cfg.pi2_strength = float()?,
            "d_y1" => cfg.d_y1 = count()?,
            "d_z1" => cfg.d_z1 = count()?,
            "d_z2" => cfg.d_z2 = count()?,
            "rho" => cfg.rho = vec![float()?],
            _ => return Err(bad(kv)),
        }
    }
    cfg.beta.resize(cfg.d_y1, 1.0);
    cfg.gamma.resize(cfg.d_z1, 1.0);
    let rho = cfg.rho.first().copied().unwrap_or(0.5);
    cfg.rho = vec![rho; cfg.d_y1];
    cfg.d_z2 = cfg.d_z2.max(cfg.d_y1);
    generate_dataset(&cfg, 0, seed).map_err(|e| Failure::new(EXIT_INPUT, e.to_string()))
}

fn cmd_verify(args: VerifyArgs) -> Result<String, Failure> {
    let ds = match (&args.input, args.random.is_empty()) {
        (Some(path), true) => load_checked(path, &args.roles)?,
        (None, false) => random_dataset(&args.random)?,
        _ => {
            return Err(Failure::new(
                EXIT_INPUT,
                "give exactly one of an input CSV or --random",
            ))
        }
    };
    let report = verify_identities(&ds, args.tol).map_err(classify)?;
    let out = match args.format {
        Format::Json => to_json(&report)?,
        Format::Csv => identity_csv(&report),
        Format::Table => identity_table(&report),
    };
    if report.passes() {
        Ok(out)
    } else {
        print!("{out}");
        Err(Failure::new(
            EXIT_VERIFY_FAILED,
            format!(
                "identity check failed: max gap {:e} (tol {:e}), ordering_ok = {}",
                report.max_gap(),
                report.tol,
                report.ordering_ok
            ),
        ))
    }
}

fn identity_table(r: &IdentityReport) -> String {
    let mut s = String::new();
    for (name, gap) in r.gaps() {
        let _ = writeln!(s, "{name:<18} {gap:>12.3e} {}", if gap < r.tol { "ok" } else { "FAIL" });
    }
    let _ = writeln!(
        s,
        "{:<18} {:>12} {}",
        "ordering",
        if r.strict_required { "strict" } else { "weak" },
        if r.ordering_ok { "ok" } else { "FAIL" }
    );
    let [h1, h2, h3, cf] = r.statistics;
    let _ = writeln!(s, "t_cf = {cf:.6}, t_h1 = {h1:.6}, t_h2 = {h2:.6}, t_h3 = {h3:.6}");
    s
}

fn identity_csv(r: &IdentityReport) -> String {
    let mut s = String::from("check,value,ok\n");
    for (name, gap) in r.gaps() {
        let _ = writeln!(s, "{name},{gap},{}", gap < r.tol);
    }
    let _ = writeln!(s, "ordering,{},{}", u8::from(r.strict_required), r.ordering_ok);
    s
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", args.config.display())))?;
    let mut spec = SimulationSpec::from_json(&text).map_err(classify)?;
    if let Some(seed) = args.seed {
        spec.sim.seed = seed;
    }
    let output = spec.run().map_err(classify)?;
    let json = output.to_json().map_err(classify)?;
    let csv = output.to_csv().map_err(classify)?;
    if let Some(dir) = &args.out {
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            std::fs::write(&path, body)
                .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
        };
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
        write("sim_result.json", &json)?;
        write("sim_result.csv", &csv)?;
    }
    Ok(match args.format {
        Format::Json => json,
        Format::Csv => csv,
        Format::Table => sim_table(&output),
    })
}

fn sim_table(out: &SimulationOutput) -> String {
    let mut s = String::new();
    for res in &out.results {
        let _ = writeln!(
            s,
            "rho = {:?}, n = {}, R = {}, seed = {}, degenerate = {}, ordering violations = {}",
            res.rho, res.n, res.replications, res.seed, res.degenerate_count, res.ordering_violations
        );
        let _ = writeln!(s, "{:<6} {:>7} {:>8} {:>9} {:>10}", "test", "alpha", "rejects", "rate", "stderr");
        for c in &res.cells {
            let _ = writeln!(
                s,
                "{:<6} {:>7} {:>8} {:>9.4} {:>10.4}",
                c.test.name(),
                c.alpha,
                c.rejections,
                c.rate,
                c.mc_stderr
            );
        }
    }
    s
}
