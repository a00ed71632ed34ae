//! Empirical rate harness for Theorem 1.2: `sup |v^N(t,x) - v(t,μ^x)|` over a
//! finite sample of `(t, x)`, swept over `N`.

use rand::Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::fit_rate;
use super::report::{RateReport, RateRow};
use crate::error::{Error, Result};
use crate::hjb::fokker_planck::{mean_field_values, reference_for, ReferenceConfig};
use crate::hjb::mc::mc_solve_horizons;
use crate::hjb::{HamiltonianFamily, ProblemSpec};
use crate::rng;
use crate::sobolev::{alpha_rate, truncation_tail_bound, MetricOrder};
use crate::torus::{EmpiricalMeasure, Measure, TWO_PI};

/// Multiplier on Monte Carlo standard errors in every noise budget.
pub const NOISE_SIGMAS: f64 = 3.0;

fn default_configurations() -> usize {
    64
}

fn default_time_points() -> usize {
    8
}

fn default_paths() -> usize {
    1024
}

fn default_steps() -> usize {
    96
}

/// Monte Carlo budget of the particle solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBudget {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    /// Euler–Maruyama steps over `[0, T]`; a multiple of `time_points`.
    #[serde(default = "default_steps")]
    pub n_steps: usize,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget { n_paths: default_paths(), n_steps: default_steps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub n_list: Vec<usize>,
    /// Random configurations `x ~ Unif(T)^N` per `N`.
    #[serde(default = "default_configurations")]
    pub configurations: usize,
    /// Times `t_j = jT/time_points`, `j = 0..time_points`.
    #[serde(default = "default_time_points")]
    pub time_points: usize,
    #[serde(default)]
    pub solver: SolverBudget,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn new(problem: ProblemSpec, n_list: Vec<usize>, seed: u64) -> Self {
        ExperimentPlan {
            problem,
            n_list,
            configurations: default_configurations(),
            time_points: default_time_points(),
            solver: SolverBudget::default(),
            reference: ReferenceConfig::default(),
            seed,
        }
    }

    /// Structural checks (schema-level: list shape, counts).
    pub fn validate_shape(&self) -> Result<()> {
        if self.n_list.len() < 3 {
            return Err(Error::config(format!("N_list needs at least 3 entries, got {}", self.n_list.len())));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("N_list must be positive and strictly increasing"));
        }
        if self.configurations == 0 || self.time_points == 0 {
            return Err(Error::config("configurations and time_points must be positive"));
        }
        if self.solver.n_paths < 2 || self.solver.n_steps == 0 || self.solver.n_steps % self.time_points != 0 {
            return Err(Error::config(format!(
                "solver budget needs n_paths >= 2 and n_steps a positive multiple of time_points ({})",
                self.time_points
            )));
        }
        Ok(())
    }

    /// Solver preconditions: a linear-in-p family with a mean-field reference.
    pub fn validate_problem(&self) -> Result<()> {
        self.problem.validate()?;
        if self.problem.hamiltonian.family == HamiltonianFamily::QuadraticInP {
            return Err(Error::UnsupportedProblem(
                "rate experiments need a linear-in-p Hamiltonian (Monte Carlo solver and reference)".into(),
            ));
        }
        if self.problem.ctx.d() != 1 {
            return Err(Error::UnsupportedDimension { d: self.problem.ctx.d(), hint: "rate experiments are d=1" });
        }
        Ok(())
    }

    /// Reference with the surrogate size filled in (`M_ref = 32 max N`).
    pub fn resolved_reference(&self) -> ReferenceConfig {
        match self.reference {
            ReferenceConfig::SurrogateLargeN { m_ref: None, n_paths, n_steps, seed } => {
                ReferenceConfig::SurrogateLargeN {
                    m_ref: Some(32 * self.n_list.last().copied().unwrap_or(1)),
                    n_paths,
                    n_steps,
                    seed,
                }
            }
            other => other,
        }
    }
}

/// Per-configuration outcome: the largest error over the time points.
struct Sample {
    error: f64,
    mc_std: f64,
    ref_std: f64,
    bias: f64,
}

/// Runs the sweep and fits `sup_error ≈ C α(N)^β`.
pub fn run_rate_experiment(plan: &ExperimentPlan) -> Result<RateReport> {
    plan.validate_shape()?;
    plan.validate_problem()?;
    let reference = plan.resolved_reference();
    let horizon = plan.problem.horizon;
    let times: Vec<f64> = (0..plan.time_points).map(|j| horizon * j as f64 / plan.time_points as f64).collect();
    // taus as multiples of the MC step so that every horizon lands on the grid
    let per = plan.solver.n_steps / plan.time_points;
    let dt = horizon / plan.solver.n_steps as f64;
    let taus: Vec<f64> = (0..plan.time_points).map(|j| ((plan.time_points - j) * per) as f64 * dt).collect();

    let mut rows = Vec::with_capacity(plan.n_list.len());
    for &n in &plan.n_list {
        let n_seed = rng::child_seed(plan.seed, n as u64);
        let run = |c: usize| -> Result<Sample> {
            let mut r = rng::stream(n_seed, c as u64);
            let xs: Vec<f64> = (0..n).map(|_| r.random::<f64>() * TWO_PI).collect();
            let atoms = EmpiricalMeasure::on_circle(&xs)?;
            let mc_seed = rng::child_seed(n_seed, 1 + c as u64);
            let est =
                mc_solve_horizons(&plan.problem, &atoms, &taus, plan.solver.n_paths, plan.solver.n_steps, mc_seed)?;
            let mu = Measure::Empirical(atoms);
            let refs: Vec<(f64, f64, f64)> = match &reference {
                ReferenceConfig::ExactFp { fp } => {
                    mean_field_values(&plan.problem, &mu, &taus, fp)?.into_iter().map(|v| (v, 0.0, 0.0)).collect()
                }
                surrogate => times
                    .iter()
                    .map(|&t| {
                        reference_for(&plan.problem, t, &mu, surrogate).map(|r| (r.value, r.std_error, r.bias_budget))
                    })
                    .collect::<Result<_>>()?,
            };
            let mut best = Sample { error: -1.0, mc_std: 0.0, ref_std: 0.0, bias: 0.0 };
            for (e, (v, s, b)) in est.iter().zip(refs) {
                let err = (e.mean - v).abs();
                if err > best.error {
                    best = Sample { error: err, mc_std: e.std_error, ref_std: s, bias: b };
                }
            }
            Ok(best)
        };
        #[cfg(feature = "parallel")]
        let samples: Vec<Sample> = (0..plan.configurations).into_par_iter().map(run).collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let samples: Vec<Sample> = (0..plan.configurations).map(run).collect::<Result<_>>()?;

        let mut sup = &samples[0];
        for s in &samples[1..] {
            if s.error > sup.error {
                sup = s;
            }
        }
        let mc_std = samples.iter().map(|s| s.mc_std).fold(0.0, f64::max);
        let ref_std = samples.iter().map(|s| s.ref_std).fold(0.0, f64::max);
        let bias = samples.iter().map(|s| s.bias).fold(0.0, f64::max);
        let alpha = alpha_rate(n, 1)?;
        log::info!("rate N={n}: sup_error={:.4e} mc_std={mc_std:.2e}", sup.error);
        rows.push(RateRow {
            n,
            alpha,
            alpha_cbrt: alpha.cbrt(),
            sup_error: sup.error,
            mc_std,
            noise_budget: NOISE_SIGMAS * (mc_std + ref_std) + bias,
            notes: String::new(),
        });
    }

    for k in 1..rows.len() {
        let allowance = rows[k - 1].noise_budget + rows[k].noise_budget;
        if rows[k].sup_error > rows[k - 1].sup_error + allowance {
            rows[k].notes = format!("nonmonotone: exceeds N={} beyond noise budget", rows[k - 1].n);
        }
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha, r.sup_error.max(f64::MIN_POSITIVE))).collect();
    let fit = fit_rate(&points)?;
    // envelope constant: every point lies under C_fit α^β
    let c_fit = fit.c * fit.residuals.iter().cloned().fold(0.0, f64::max).exp();
    let bound_holds = rows.iter().all(|r| r.sup_error <= c_fit * r.alpha_cbrt + r.noise_budget);
    for r in rows.iter_mut() {
        if r.sup_error > c_fit * r.alpha_cbrt + r.noise_budget {
            let sep = if r.notes.is_empty() { "" } else { "; " };
            r.notes.push_str(&format!("{sep}above C_fit*alpha^(1/3) + noise"));
        }
    }
    let tail = truncation_tail_bound(&plan.problem.ctx, MetricOrder::star(&plan.problem.ctx));
    Ok(RateReport {
        plan: ExperimentPlan { reference, ..plan.clone() },
        rows,
        fit,
        c_fit,
        bound_holds,
        truncation_tail: tail,
        software: format!("mfrl-core {}", env!("CARGO_PKG_VERSION")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::benchmarks;

    fn small_plan(problem: ProblemSpec) -> ExperimentPlan {
        ExperimentPlan {
            configurations: 6,
            time_points: 4,
            solver: SolverBudget { n_paths: 256, n_steps: 40 },
            ..ExperimentPlan::new(problem, vec![2, 4, 8], 7)
        }
    }

    #[test]
    fn plan_validation() {
        let p = small_plan(benchmarks::linear(0.0));
        assert!(p.validate_shape().is_ok());
        let short = ExperimentPlan { n_list: vec![2, 4], ..p.clone() };
        assert!(matches!(short.validate_shape(), Err(Error::Config(_))));
        let unsorted = ExperimentPlan { n_list: vec![2, 8, 4], ..p.clone() };
        assert!(unsorted.validate_shape().is_err());
        let steps = ExperimentPlan { solver: SolverBudget { n_paths: 10, n_steps: 42 }, ..p.clone() };
        assert!(steps.validate_shape().is_err());
        let quad = ExperimentPlan { problem: benchmarks::quadratic(0.0), ..p.clone() };
        assert!(matches!(run_rate_experiment(&quad), Err(Error::UnsupportedProblem(_))));
        let json = serde_json::to_string(&p).unwrap();
        let back: ExperimentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<ExperimentPlan>(&json.replacen('{', "{\"bogus\":1,", 1)).is_err());
        let sur = ExperimentPlan {
            reference: ReferenceConfig::SurrogateLargeN { m_ref: None, n_paths: 8, n_steps: 8, seed: 0 },
            ..p
        };
        assert!(matches!(sur.resolved_reference(), ReferenceConfig::SurrogateLargeN { m_ref: Some(256), .. }));
    }

    /// Null benchmark: v^N(t,x) = v(t,μ^x) exactly, so the sup error is pure MC noise.
    #[test]
    fn null_benchmark_within_budget() {
        let plan = small_plan(benchmarks::null(0.0));
        let report = run_rate_experiment(&plan).unwrap();
        for r in &report.rows {
            assert!(r.sup_error <= r.noise_budget + 1e-12, "{r:?}");
        }
        assert!(report.rows.iter().all(|r| r.notes.is_empty()));
    }

    #[test]
    fn deterministic_and_sorted() {
        let plan = small_plan(benchmarks::mean_interaction(0.0));
        let a = run_rate_experiment(&plan).unwrap();
        let b = run_rate_experiment(&plan).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.rows.windows(2).all(|w| w[0].n < w[1].n));
        assert_eq!(a.fit.residuals.len(), 3);
    }
}
