//! `mfrl`: command-line driver for the particle HJB lab.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 schema/parse error,
//! 3 solver precondition violation, 4 numerical divergence.

mod plans;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mfrl_core::convolution::gap_scaling_probe;
use mfrl_core::hjb::value_file::write_value_file;
use mfrl_core::hjb::{fd_solve_with, mc_solve_linear, FdConfig};
use mfrl_core::rate::{run_rate_experiment, sample_complexity_experiment, ExperimentPlan};
use mfrl_core::sobolev::{rho, MetricOrder};
use mfrl_core::torus::{EmpiricalMeasure, Measure, TorusContext};
use mfrl_core::Error;

use plans::{parse_plan, ComplexityPlan, ProbePlan, SolvePlan, SolverPlan};

#[derive(Parser)]
#[command(name = "mfrl", version, about = "Particle approximation of HJB equations on Wasserstein space")]
struct Cli {
    /// Overrides the plan's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Format of the result printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the particle HJB (FD grid or one Monte Carlo point).
    Solve {
        #[arg(long)]
        plan: PathBuf,
        /// Value file (FD) or summary JSON (MC); FD also writes `<out>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence-rate experiment; writes `<out>.csv` and `<out>.json`.
    Rate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inf-convolution gap-scaling probe (Lemma 3.3); writes the gap CSV.
    Probe {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample-complexity sweep (Lemma 2.8).
    Complexity {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print ρ_{-k}(μ, ν) between two measure files with 12 significant digits.
    Metric {
        mu: PathBuf,
        nu: PathBuf,
        /// Sobolev order k (default k_* = d/2 + 3).
        #[arg(long)]
        order: Option<u32>,
        /// Fourier truncation |l|_∞ ≤ trunc (default 64 for d=1, 16 otherwise).
        #[arg(long)]
        trunc: Option<usize>,
    },
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn schema(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Divergence(_) => 4,
            Error::InputDomain(_)
            | Error::UnsupportedDimension { .. }
            | Error::UnsupportedProblem(_)
            | Error::Resource(_)
            | Error::Config(_) => 3,
            Error::Json(_) | Error::Format(_) => 2,
            Error::Io(_) | Error::Internal(_) | Error::Fit(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MFRL_LOG", "warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Solve { plan, out } => cmd_solve(cli, plan, out),
        Command::Rate { plan, out } => cmd_rate(cli, plan, out),
        Command::Probe { plan, out } => cmd_probe(cli, plan, out.as_deref()),
        Command::Complexity { plan, out } => cmd_complexity(cli, plan, out.as_deref()),
        Command::Metric { mu, nu, order, trunc } => cmd_metric(mu, nu, *order, *trunc),
    }
}

fn read_plan<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::schema(format!("cannot read plan {}: {e}", path.display())))?;
    parse_plan(&text).map_err(|m| Failure::schema(format!("{}: {m}", path.display())))
}

fn write(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content)
        .map_err(|e| Failure { code: 1, message: format!("cannot write {}: {e}", path.display()) })
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Failure { code: 1, message: e.to_string() })
}

/// `key,value` lines for flat JSON summaries.
fn summary_csv(summary: &serde_json::Value) -> String {
    let mut out = String::from("key,value\n");
    if let Some(obj) = summary.as_object() {
        for (k, v) in obj {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k},{v}\n"));
        }
    }
    out
}

fn cmd_solve(cli: &Cli, plan_path: &Path, out: &Path) -> CliResult<String> {
    let plan: SolvePlan = read_plan(plan_path)?;
    let problem = plan.problem.resolve().map_err(|e| Failure::schema(e.to_string()))?;
    let seed = cli.seed.unwrap_or(plan.seed);
    let summary = match &plan.solver {
        SolverPlan::Fd { mesh, n_t, max_slices } => {
            let cfg = match n_t {
                Some(n_t) => FdConfig { mesh: *mesh, n_t: *n_t, save_every: 1 },
                None => FdConfig::auto(&problem, plan.n, *mesh, max_slices.unwrap_or(64))?,
            };
            let v = fd_solve_with(&problem, plan.n, cfg)?;
            write_value_file(out, &v)?;
            let values = v.values();
            let summary = json!({
                "command": "solve",
                "solver": "fd",
                "N": plan.n,
                "mesh": v.mesh(),
                "n_t": cfg.n_t,
                "stored_intervals": v.n_t(),
                "horizon": problem.horizon,
                "value_file": out.display().to_string(),
                "min": values.iter().cloned().fold(f64::INFINITY, f64::min),
                "max": values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
            let mut json_path = out.as_os_str().to_owned();
            json_path.push(".json");
            write(Path::new(&json_path), &to_json(&summary)?)?;
            summary
        }
        SolverPlan::Mc { t, atoms, n_paths, n_steps } => {
            let atoms = EmpiricalMeasure::on_circle(atoms)?;
            let est = mc_solve_linear(&problem, plan.n, *t, &atoms, *n_paths, *n_steps, seed)?;
            let summary = json!({
                "command": "solve",
                "solver": "mc",
                "N": plan.n,
                "t": t,
                "mean": est.mean,
                "std_error": est.std_error,
                "n_paths": est.n_paths,
                "n_steps": n_steps,
                "seed": est.seed,
            });
            write(out, &to_json(&summary)?)?;
            summary
        }
    };
    match cli.format {
        Format::Json => to_json(&summary),
        Format::Csv => Ok(summary_csv(&summary)),
    }
}

fn cmd_rate(cli: &Cli, plan_path: &Path, out: &Path) -> CliResult<String> {
    let mut plan: ExperimentPlan = read_plan(plan_path)?;
    if let Some(seed) = cli.seed {
        plan.seed = seed;
    }
    plan.validate_shape().map_err(|e| Failure::schema(e.to_string()))?;
    let report = run_rate_experiment(&plan)?;
    let csv = report.to_csv();
    let json = report.to_json()? + "\n";
    write(&out.with_extension("csv"), &csv)?;
    write(&out.with_extension("json"), &json)?;
    Ok(match cli.format {
        Format::Csv => csv,
        Format::Json => json,
    })
}

fn cmd_probe(cli: &Cli, plan_path: &Path, out: Option<&Path>) -> CliResult<String> {
    let plan: ProbePlan = read_plan(plan_path)?;
    let problem = plan.problem.resolve().map_err(|e| Failure::schema(e.to_string()))?;
    if plan.eps_list.len() < 3 {
        return Err(Failure::schema(format!("eps_list needs at least 3 values, got {}", plan.eps_list.len())));
    }
    let cfg = plan.config()?;
    let fd = FdConfig::auto(&problem, plan.n, plan.mesh, plan.max_slices)?;
    let v = fd_solve_with(&problem, plan.n, fd)?;
    let table = gap_scaling_probe(&v, &plan.targets, &plan.eps_list, &cfg)?;
    let csv = table.to_csv();
    if let Some(out) = out {
        write(out, &csv)?;
    }
    match cli.format {
        Format::Csv => Ok(csv),
        Format::Json => to_json(&table),
    }
}

fn cmd_complexity(cli: &Cli, plan_path: &Path, out: Option<&Path>) -> CliResult<String> {
    let plan: ComplexityPlan = read_plan(plan_path)?;
    let mu = plan.density.resolve().map_err(|e| Failure::schema(e.to_string()))?;
    let ctx = match plan.trunc {
        Some(l) => TorusContext::new(1, l),
        None => TorusContext::with_default_trunc(1),
    }
    .map_err(|e| Failure::schema(e.to_string()))?;
    let table = sample_complexity_experiment(&mu, &plan.n_list, plan.n_trials, cli.seed.unwrap_or(plan.seed), &ctx)?;
    let csv = table.to_csv();
    if let Some(out) = out {
        write(out, &csv)?;
    }
    match cli.format {
        Format::Csv => Ok(csv),
        Format::Json => to_json(&table),
    }
}

fn read_measure(path: &Path) -> CliResult<Measure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::schema(format!("cannot read measure {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::schema(format!("{}: {e}", path.display())))
}

fn cmd_metric(mu: &Path, nu: &Path, order: Option<u32>, trunc: Option<usize>) -> CliResult<String> {
    let (mu, nu) = (read_measure(mu)?, read_measure(nu)?);
    if mu.d() != nu.d() {
        return Err(Failure::schema(format!("dimension mismatch: d={} vs d={}", mu.d(), nu.d())));
    }
    let d = mu.d();
    let ctx = match trunc {
        Some(l) => TorusContext::new(d, l),
        None => TorusContext::with_default_trunc(d),
    }
    .map_err(|e| Failure::schema(e.to_string()))?;
    let order = match order {
        Some(k) => MetricOrder::new(k).map_err(|e| Failure::schema(e.to_string()))?,
        None => MetricOrder::star(&ctx),
    };
    let value = rho(&mu, &nu, order, &ctx)?;
    Ok(format!("{}\n", format_significant(value, 12)))
}

/// `%.{digits}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise; trailing zeros are kept.
fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci.split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..digits as i32).contains(&exp) {
        format!("{:.*}", (digits as i32 - 1 - exp) as usize, x)
    } else {
        sci
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(0.123456789012345, 12), "0.123456789012");
        assert_eq!(format_significant(1.5, 12), "1.50000000000");
        assert_eq!(format_significant(1.234e-7, 3), "1.23e-7");
        assert_eq!(format_significant(0.00099996, 3), "0.00100");
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Divergence("x".into())).code, 4);
        assert_eq!(Failure::from(Error::Resource("x".into())).code, 3);
        assert_eq!(Failure::from(Error::Format("x".into())).code, 2);
    }
}
