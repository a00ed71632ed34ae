//! Feynman–Kac Monte Carlo for linear-in-p Hamiltonians.
//!
//! For `H = b·p + f` the particle value function is
//! `v^N(t,x) = E[∫_t^T (1/N) Σ f(X^i_s, μ^X_s) ds + G(μ^X_T)]` with
//! `dX^i = b(X^i, μ^X) ds + √2 dW^i + √(2a) dB`, which reproduces the generator
//! `Σ b·D_i + Σ Δ_i + a Σ_{ij} tr D²_{ij}` of Eq. (nHJB).
//!
//! The problems are time-homogeneous, so `v^N(t,·) = w(T-t,·)` and one path
//! set yields every horizon. Path `p` draws from `rng::stream(seed, p)`, and
//! path results are reduced in index order, so estimates do not depend on
//! the thread count.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::problem::{HamiltonianFamily, ProblemSpec};
use super::ValueFn;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::torus::{canonicalize, EmpiricalMeasure};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default Euler–Maruyama steps over `[0, T]`.
pub const DEFAULT_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation divided by `√n_paths`.
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Welford reduction in slice order (exact for constant samples).
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &x) in samples.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        let n = samples.len();
        let std_error = if n > 1 { (m2.max(0.0) / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        McEstimate { mean, std_error, n_paths: n, seed }
    }
}

fn check_linear(problem: &ProblemSpec) -> Result<()> {
    problem.validate()?;
    if problem.hamiltonian.family == HamiltonianFamily::QuadraticInP {
        return Err(Error::UnsupportedProblem(
            "Monte Carlo needs a linear-in-p Hamiltonian (family zero or linear_in_p)".into(),
        ));
    }
    Ok(())
}

/// Estimate `v^N(t, x)` with `n_steps` Euler–Maruyama steps on `[t, T]`.
pub fn mc_solve_linear(
    problem: &ProblemSpec,
    n: usize,
    t: f64,
    atoms: &EmpiricalMeasure,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if atoms.len() != n {
        return Err(Error::domain(format!("N = {n} but the configuration has {} atoms", atoms.len())));
    }
    if !(t.is_finite() && (0.0..=problem.horizon).contains(&t)) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", problem.horizon)));
    }
    let tau = problem.horizon - t;
    Ok(mc_solve_horizons(problem, atoms, &[tau], n_paths, n_steps, seed)?[0])
}

/// Estimates of `w(τ, x) = v^N(T-τ, x)` for several horizons from one path
/// set. The step is `max(τ)/n_steps`; every `τ` must be a multiple of it.
pub fn mc_solve_horizons(
    problem: &ProblemSpec,
    atoms: &EmpiricalMeasure,
    taus: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_linear(problem)?;
    if atoms.d() != 1 {
        return Err(Error::UnsupportedDimension { d: atoms.d(), hint: "particle solvers are d=1" });
    }
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::config("n_paths and n_steps must be positive"));
    }
    let plan = StepPlan::new(taus, n_steps)?;
    let x0 = atoms.coords();
    let run = |p: usize| {
        let mut r = rng::stream(seed, p as u64);
        simulate(problem, x0, &plan, &mut r)
    };
    #[cfg(feature = "parallel")]
    let paths: Vec<Vec<f64>> = (0..n_paths).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let paths: Vec<Vec<f64>> = (0..n_paths).map(run).collect();

    Ok((0..taus.len())
        .map(|k| {
            let col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            McEstimate::from_samples(&col, seed)
        })
        .collect())
}

/// Time grid shared by all horizons.
struct StepPlan {
    dt: f64,
    /// Step index of each requested horizon, in request order.
    record: Vec<usize>,
    total: usize,
}

impl StepPlan {
    fn new(taus: &[f64], n_steps: usize) -> Result<Self> {
        if taus.is_empty() {
            return Err(Error::config("no horizons requested"));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::domain("horizons must be finite and nonnegative"));
        }
        let tmax = taus.iter().cloned().fold(0.0, f64::max);
        if tmax == 0.0 {
            return Ok(StepPlan { dt: 0.0, record: vec![0; taus.len()], total: 0 });
        }
        let dt = tmax / n_steps as f64;
        let record = taus
            .iter()
            .map(|&tau| {
                let k = (tau / dt).round();
                if (k * dt - tau).abs() > 1e-9 * (1.0 + tau) {
                    Err(Error::config(format!("horizon {tau} is not a multiple of the step {dt}")))
                } else {
                    Ok(k as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StepPlan { dt, record, total: n_steps })
    }
}

/// One path of the particle system; returns the functional at each horizon.
fn simulate(problem: &ProblemSpec, x0: &[f64], plan: &StepPlan, rng: &mut Stream) -> Vec<f64> {
    let n = x0.len();
    let a = problem.a;
    let mut x = x0.to_vec();
    let mut drift = vec![0.0; n];
    let mut out = vec![0.0; plan.record.len()];
    let record_at = |k: usize, value: f64, out: &mut Vec<f64>| {
        for (slot, &r) in out.iter_mut().zip(&plan.record) {
            if r == k {
                *slot = value;
            }
        }
    };

    if problem.hamiltonian.family == HamiltonianFamily::Zero {
        // pure Brownian motion: jump exactly between recorded horizons
        let mut stops: Vec<usize> = plan.record.clone();
        stops.sort_unstable();
        stops.dedup();
        let mut at = 0;
        for stop in stops {
            let h = (stop - at) as f64 * plan.dt;
            if h > 0.0 {
                let common: f64 = StandardNormal.sample(rng);
                for xi in x.iter_mut() {
                    let own: f64 = StandardNormal.sample(rng);
                    *xi += (2.0 * h).sqrt() * own + (2.0 * a * h).sqrt() * common;
                }
            }
            at = stop;
            record_at(stop, problem.terminal_value(&x), &mut out);
        }
        return out;
    }

    let dt = plan.dt;
    let (sd, sc) = ((2.0 * dt).sqrt(), (2.0 * a * dt).sqrt());
    let mut running = 0.0;
    let mut cost = problem.particle_fields(&x, &mut drift);
    record_at(0, problem.terminal_value(&x), &mut out);
    for k in 1..=plan.total {
        let common: f64 = StandardNormal.sample(rng);
        for (xi, bi) in x.iter_mut().zip(&drift) {
            let own: f64 = StandardNormal.sample(rng);
            *xi += bi * dt + sd * own + sc * common;
        }
        let next = problem.particle_fields(&x, &mut drift);
        running += 0.5 * dt * (cost + next);
        cost = next;
        record_at(k, running + problem.terminal_value(&x), &mut out);
    }
    out
}

/// Monte Carlo accessor for a linear-in-p problem: `value` runs a full
/// estimate, `sample` simulates one path.
#[derive(Debug, Clone)]
pub struct McValueFn {
    pub problem: ProblemSpec,
    pub n: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl McValueFn {
    pub fn new(problem: ProblemSpec, n: usize, n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        check_linear(&problem)?;
        Ok(McValueFn { problem, n, n_paths, n_steps, seed })
    }

    fn atoms(&self, t: f64, x: &[f64]) -> Result<EmpiricalMeasure> {
        if x.len() != self.n {
            return Err(Error::domain(format!("configuration has {} coordinates, N = {}", x.len(), self.n)));
        }
        if !(t.is_finite() && (0.0..=self.problem.horizon).contains(&t)) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.problem.horizon)));
        }
        EmpiricalMeasure::on_circle(&canonicalize(x)?)
    }
}

impl ValueFn for McValueFn {
    fn n_particles(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> f64 {
        self.problem.horizon
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        let atoms = self.atoms(t, x)?;
        Ok(mc_solve_linear(&self.problem, self.n, t, &atoms, self.n_paths, self.n_steps, self.seed)?.mean)
    }

    fn sample(&self, t: f64, x: &[f64], rng: &mut Stream) -> Result<f64> {
        let atoms = self.atoms(t, x)?;
        let plan = StepPlan::new(&[self.problem.horizon - t], self.n_steps)?;
        Ok(simulate(&self.problem, atoms.coords(), &plan, rng)[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::fd::{fd_solve, required_steps};
    use crate::hjb::problem::{benchmarks, HamiltonianSpec, TerminalSpec, TrigPoly};

    fn circle(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::on_circle(xs).unwrap()
    }

    #[test]
    fn constant_terminal_is_exact() {
        let p = ProblemSpec::new(
            HamiltonianSpec::linear(TrigPoly::sin1(0.5), TrigPoly::zero()),
            TerminalSpec { g: TrigPoly::constant(0.1), h: TrigPoly::zero() },
            0.5,
            1.0,
        )
        .unwrap();
        let e = mc_solve_linear(&p, 3, 0.2, &circle(&[0.1, 2.0, 4.0]), 500, 50, 1).unwrap();
        assert_eq!(e.mean, 0.1);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n_paths, 500);
    }

    #[test]
    fn null_benchmark_matches_closed_form() {
        for a in [0.0, 0.5] {
            let p = benchmarks::null(a);
            let xs = [0.3, 2.0, 5.0];
            let taus = [0.25, 0.5, 1.0];
            let est = mc_solve_horizons(&p, &circle(&xs), &taus, 20_000, 4, 11).unwrap();
            for (tau, e) in taus.iter().zip(&est) {
                let exact = (-(1.0 + a) * tau).exp() * xs.iter().map(|x| x.cos()).sum::<f64>() / 3.0;
                assert!((e.mean - exact).abs() <= 3.0 * e.std_error, "a={a} τ={tau}: {} vs {exact}", e.mean);
            }
        }
    }

    #[test]
    fn deterministic_and_unsupported_checks() {
        let p = benchmarks::linear(0.3);
        let x = circle(&[1.0, 2.0]);
        let a = mc_solve_linear(&p, 2, 0.0, &x, 300, 20, 5).unwrap();
        let b = mc_solve_linear(&p, 2, 0.0, &x, 300, 20, 5).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mc_solve_linear(&benchmarks::quadratic(0.0), 2, 0.0, &x, 10, 10, 0),
            Err(Error::UnsupportedProblem(_))
        ));
        assert!(mc_solve_linear(&p, 3, 0.0, &x, 10, 10, 0).is_err());
        assert!(mc_solve_horizons(&p, &x, &[0.3, 1.0], 10, 7, 0).is_err());
    }

    #[test]
    fn std_error_halves_when_paths_quadruple() {
        let p = benchmarks::linear(0.0);
        let x = circle(&[0.5, 3.0]);
        let e1 = mc_solve_linear(&p, 2, 0.0, &x, 2000, 50, 3).unwrap();
        let e2 = mc_solve_linear(&p, 2, 0.0, &x, 8000, 50, 3).unwrap();
        let ratio = e1.std_error / e2.std_error;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
        let e3 = mc_solve_linear(&p, 2, 0.0, &x, 4000, 50, 3).unwrap();
        let r2 = e1.std_error / e3.std_error;
        assert!((r2 / 2f64.sqrt() - 1.0).abs() < 0.2, "{r2}");
    }

    #[test]
    fn agrees_with_finite_differences() {
        let p = benchmarks::linear(0.5);
        let n_t = required_steps(&p, 2, 48).unwrap();
        let fd = fd_solve(&p, 2, 48, n_t).unwrap();
        for (k, xs) in [[0.4, 2.2], [3.0, 3.5], [5.5, 1.0]].iter().enumerate() {
            let e = mc_solve_linear(&p, 2, 0.0, &circle(xs), 8000, 100, k as u64).unwrap();
            let v = fd.value(0.0, xs).unwrap();
            assert!((v - e.mean).abs() <= 3.0 * e.std_error + 5e-3, "{v} vs {}±{}", e.mean, e.std_error);
        }
    }

    #[test]
    fn accessor_sample_is_consistent_with_value() {
        let acc = McValueFn::new(benchmarks::null(0.0), 2, 4000, 10, 9).unwrap();
        let x = [1.0, 2.0];
        let exact = (-0.5f64).exp() * (1f64.cos() + 2f64.cos()) / 2.0;
        let mut r = rng::stream(1, 0);
        let draws: Vec<f64> = (0..4000).map(|_| acc.sample(0.5, &x, &mut r).unwrap()).collect();
        let e = McEstimate::from_samples(&draws, 1);
        assert!((e.mean - exact).abs() <= 4.0 * e.std_error);
        assert!((acc.value(0.5, &x).unwrap() - exact).abs() < 0.05);
    }
}
