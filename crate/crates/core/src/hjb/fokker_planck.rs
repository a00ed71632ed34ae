//! Mean-field reference `v(t, μ)` for linear-in-p problems (d=1).
//!
//! With `a = 0`, `v(t,μ) = ∫_0^τ ⟨f(·,μ_s),μ_s⟩ ds + G(μ_τ)`, `τ = T-t`, where
//! `∂_s μ = ∂_xx μ - ∂_x(b(·,μ)μ)` and `μ_0 = μ`.
//!
//! Common noise `a > 0` is handled exactly. The kernels act by convolution,
//! so `Y = X - √(2a)B` follows the `a = 0` flow and `μ^X_s` is that flow shifted
//! by `√(2a)B_s`. The running cost `∫∫J(x-y)μμ` is shift invariant, and
//! `E[G(shift_z μ_τ)]` with `z ~ N(0, 2aτ)` has a closed form in the moments
//! ([`TerminalSpec::eval_shift_averaged`]).
//!
//! Two discretizations of the flow are provided:
//!
//! * [`FpScheme::Spectral`] (default): Galerkin on the moments
//!   `m_l = ∫e^{-ilx}dμ`, `|l| ≤ L`, obeying
//!   `m_l' = -l² m_l - il Σ_k κ_k m_k m_{l-k}`, integrated by integrating-factor
//!   RK4. It accepts empirical measures without deposit error, and mass
//!   (`m_0 = 1`) is conserved exactly.
//! * [`FpScheme::FiniteVolume`]: a conservative mesh scheme with
//!   backward-Euler diffusion and explicit drift. The drift flux is central
//!   where the cell Péclet number `|b|h < 2` and upwind otherwise.
//!   Empirical inputs are deposited cloud-in-cell.
//!
//! [`TerminalSpec::eval_shift_averaged`]: super::problem::TerminalSpec::eval_shift_averaged

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mc::{mc_solve_linear, DEFAULT_STEPS};
use super::problem::{HamiltonianFamily, Moments, ProblemSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::sobolev::alpha_rate;
use crate::torus::{sample_iid, EmpiricalMeasure, GridDensity, Measure, TWO_PI};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpScheme {
    Spectral,
    FiniteVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpConfig {
    pub scheme: FpScheme,
    /// Retained moments `L` for the spectral scheme.
    pub modes: usize,
    /// Cells for the finite-volume scheme.
    pub mesh: usize,
    /// Largest time step.
    pub dt: f64,
}

impl Default for FpConfig {
    fn default() -> Self {
        FpConfig { scheme: FpScheme::Spectral, modes: 64, mesh: 512, dt: 2e-3 }
    }
}

/// How the mean-field value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Deterministic Fokker–Planck flow (any `a ≥ 0`).
    ExactFp {
        #[serde(default)]
        fp: FpConfig,
    },
    /// Particle surrogate `v^{M_ref}` from `M_ref` atoms sampled from μ.
    SurrogateLargeN {
        m_ref: Option<usize>,
        #[serde(default = "default_ref_paths")]
        n_paths: usize,
        #[serde(default = "default_steps")]
        n_steps: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_ref_paths() -> usize {
    256
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig::ExactFp { fp: FpConfig::default() }
    }
}

/// A reference value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    /// Monte Carlo standard error (0 for the deterministic flow).
    pub std_error: f64,
    /// Surrogate bias budget `α(M_ref)^{1/3}` (0 for the deterministic flow).
    pub bias_budget: f64,
}

fn check_problem(problem: &ProblemSpec) -> Result<()> {
    problem.validate()?;
    if problem.hamiltonian.family == HamiltonianFamily::QuadraticInP {
        return Err(Error::UnsupportedProblem("the mean-field reference needs a linear-in-p Hamiltonian".into()));
    }
    Ok(())
}

/// `v(T - τ, μ)` for each `τ` in `taus` from one flow.
pub fn mean_field_values(problem: &ProblemSpec, mu: &Measure, taus: &[f64], cfg: &FpConfig) -> Result<Vec<f64>> {
    check_problem(problem)?;
    if mu.d() != 1 {
        return Err(Error::UnsupportedDimension { d: mu.d(), hint: "the Fokker–Planck reference is d=1" });
    }
    if taus.iter().any(|t| !(t.is_finite() && (0.0..=problem.horizon + 1e-12).contains(t))) {
        return Err(Error::domain(format!("horizons must lie in [0, {}]", problem.horizon)));
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(Error::config("Fokker–Planck dt must be positive"));
    }
    let mut flow: Box<dyn Flow> = match cfg.scheme {
        FpScheme::Spectral => Box::new(SpectralFlow::new(problem, mu, cfg.modes)?),
        FpScheme::FiniteVolume => Box::new(VolumeFlow::new(problem, mu, cfg.mesh)?),
    };
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&i, &j| taus[i].total_cmp(&taus[j]));
    let mut out = vec![0.0; taus.len()];
    let mut now = 0.0;
    for i in order {
        let span = taus[i] - now;
        if span > 0.0 {
            let n = (span / cfg.dt).ceil() as usize;
            for _ in 0..n {
                flow.step(span / n as f64)?;
            }
            now = taus[i];
        }
        let m = flow.moments(problem.terminal.degree());
        let value = flow.running() + problem.terminal.eval_shift_averaged(&m, 2.0 * problem.a * taus[i]);
        if !value.is_finite() {
            return Err(Error::Divergence("Fokker–Planck flow produced a non-finite value".into()));
        }
        out[i] = value;
    }
    Ok(out)
}

/// `v(t, μ)` for a grid density.
pub fn mean_field_reference(
    problem: &ProblemSpec,
    t: f64,
    mu: &GridDensity,
    cfg: &ReferenceConfig,
) -> Result<Reference> {
    reference_for(problem, t, &Measure::Grid(mu.clone()), cfg)
}

/// `v(t, μ)` for either representation.
pub fn reference_for(problem: &ProblemSpec, t: f64, mu: &Measure, cfg: &ReferenceConfig) -> Result<Reference> {
    if !(t.is_finite() && (0.0..=problem.horizon).contains(&t)) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", problem.horizon)));
    }
    match cfg {
        ReferenceConfig::ExactFp { fp } => {
            let value = mean_field_values(problem, mu, &[problem.horizon - t], fp)?[0];
            Ok(Reference { value, std_error: 0.0, bias_budget: 0.0 })
        }
        ReferenceConfig::SurrogateLargeN { m_ref, n_paths, n_steps, seed } => {
            check_problem(problem)?;
            let m = m_ref.ok_or_else(|| Error::config("surrogate reference needs m_ref"))?;
            let atoms = match mu {
                Measure::Grid(g) => sample_iid(g, m, rng::child_seed(*seed, 1))?,
                Measure::Empirical(e) => {
                    let mut r = rng::stream(rng::child_seed(*seed, 1), 0);
                    let xs: Vec<f64> = (0..m).map(|_| e.atom(r.random_range(0..e.len()))[0]).collect();
                    EmpiricalMeasure::on_circle(&xs)?
                }
            };
            let est = mc_solve_linear(problem, m, t, &atoms, *n_paths, *n_steps, rng::child_seed(*seed, 2))?;
            Ok(Reference { value: est.mean, std_error: est.std_error, bias_budget: alpha_rate(m, 1)?.cbrt() })
        }
    }
}

trait Flow {
    fn step(&mut self, dt: f64) -> Result<()>;
    fn moments(&self, degree: usize) -> Moments;
    fn running(&self) -> f64;
}

/// Moments of a d=1 measure up to `degree` (exact for atoms, rectangle rule for grids).
fn measure_moments(mu: &Measure, degree: usize) -> Vec<Complex64> {
    match mu {
        Measure::Empirical(e) => {
            let w = 1.0 / e.len() as f64;
            let mut m = vec![Complex64::new(0.0, 0.0); degree + 1];
            for &x in e.coords() {
                let step = Complex64::from_polar(1.0, -x);
                let mut p = Complex64::new(w, 0.0);
                for mk in m.iter_mut() {
                    *mk += p;
                    p *= step;
                }
            }
            m[0] = Complex64::new(1.0, 0.0);
            m
        }
        Measure::Grid(g) => {
            let h = g.spacing();
            let mut m = vec![Complex64::new(0.0, 0.0); degree + 1];
            for (j, &v) in g.values().iter().enumerate() {
                for (k, mk) in m.iter_mut().enumerate() {
                    *mk += Complex64::from_polar(v * h, -((k * j) as f64) * h);
                }
            }
            m[0] = Complex64::new(1.0, 0.0);
            m
        }
    }
}

struct SpectralFlow<'a> {
    problem: &'a ProblemSpec,
    /// `m_l` for `0 ≤ l ≤ L`.
    m: Vec<Complex64>,
    running: f64,
}

impl<'a> SpectralFlow<'a> {
    fn new(problem: &'a ProblemSpec, mu: &Measure, modes: usize) -> Result<Self> {
        let deg = problem.hamiltonian.degree().max(problem.terminal.degree());
        if modes < deg.max(1) {
            return Err(Error::config(format!("spectral modes {modes} below kernel degree {deg}")));
        }
        Ok(SpectralFlow { problem, m: measure_moments(mu, modes), running: 0.0 })
    }

    fn get(m: &[Complex64], l: i64) -> Complex64 {
        match m.get(l.unsigned_abs() as usize) {
            Some(v) if l < 0 => v.conj(),
            Some(v) => *v,
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Nonlinear part `-il Σ_k κ_k m_k m_{l-k}` and the running cost `Σ j_k|m_k|²`.
    fn rhs(&self, m: &[Complex64]) -> (Vec<Complex64>, f64) {
        let k_poly = &self.problem.hamiltonian.drift;
        let deg = k_poly.degree() as i64;
        let coefs: Vec<(i64, Complex64)> = (-deg..=deg)
            .map(|k| {
                let c = k_poly.coef(k.unsigned_abs() as usize);
                (k, if k < 0 { c.conj() } else { c })
            })
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .collect();
        let out = (0..m.len() as i64)
            .map(|l| {
                let s: Complex64 = coefs.iter().map(|&(k, c)| c * Self::get(m, k) * Self::get(m, l - k)).sum();
                Complex64::new(0.0, -(l as f64)) * s
            })
            .collect();
        let cost = self.problem.hamiltonian.cost.pair(&Moments::from_vec(m.to_vec()));
        (out, cost)
    }
}

impl Flow for SpectralFlow<'_> {
    fn step(&mut self, h: f64) -> Result<()> {
        let len = self.m.len();
        let e_full: Vec<f64> = (0..len).map(|l| (-((l * l) as f64) * h).exp()).collect();
        let e_half: Vec<f64> = (0..len).map(|l| (-((l * l) as f64) * 0.5 * h).exp()).collect();
        let u = self.m.clone();
        let comb = |base: &[Complex64], inc: &[Complex64], w: f64, decay: &[f64]| -> Vec<Complex64> {
            (0..len).map(|l| decay[l] * (base[l] + inc[l] * w)).collect()
        };
        let (k1, c1) = self.rhs(&u);
        let (k2, c2) = self.rhs(&comb(&u, &k1, 0.5 * h, &e_half));
        let u3: Vec<Complex64> = (0..len).map(|l| e_half[l] * u[l] + k2[l] * (0.5 * h)).collect();
        let (k3, c3) = self.rhs(&u3);
        let u4: Vec<Complex64> = (0..len).map(|l| e_full[l] * u[l] + e_half[l] * k3[l] * h).collect();
        let (k4, c4) = self.rhs(&u4);
        for l in 0..len {
            self.m[l] = e_full[l] * u[l] + (e_full[l] * k1[l] + e_half[l] * (k2[l] + k3[l]) * 2.0 + k4[l]) * (h / 6.0);
        }
        self.m[0] = Complex64::new(1.0, 0.0);
        self.running += h / 6.0 * (c1 + 2.0 * (c2 + c3) + c4);
        if self.m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Divergence("spectral Fokker–Planck flow diverged".into()));
        }
        Ok(())
    }

    fn moments(&self, degree: usize) -> Moments {
        Moments::from_vec(self.m[..=degree.min(self.m.len() - 1)].to_vec())
    }

    fn running(&self) -> f64 {
        self.running
    }
}

struct VolumeFlow<'a> {
    problem: &'a ProblemSpec,
    rho: Vec<f64>,
    h: f64,
    running: f64,
    cost_now: f64,
}

impl<'a> VolumeFlow<'a> {
    fn new(problem: &'a ProblemSpec, mu: &Measure, mesh: usize) -> Result<Self> {
        let grid = match mu {
            Measure::Grid(g) if g.m() == mesh => g.clone(),
            Measure::Grid(g) => {
                return Err(Error::config(format!("density has m={} but the finite-volume mesh is {mesh}", g.m())))
            }
            Measure::Empirical(e) => GridDensity::from_empirical(e, mesh)?,
        };
        let mut flow =
            VolumeFlow { problem, rho: grid.values().to_vec(), h: grid.spacing(), running: 0.0, cost_now: 0.0 };
        flow.cost_now = flow.cost();
        Ok(flow)
    }

    fn grid_moments(&self, degree: usize) -> Moments {
        let h = self.h;
        let mut m = vec![Complex64::new(0.0, 0.0); degree + 1];
        for (j, &v) in self.rho.iter().enumerate() {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += Complex64::from_polar(v * h, -((k * j) as f64) * h);
            }
        }
        m[0] = Complex64::new(self.rho.iter().sum::<f64>() * h, 0.0);
        Moments::from_vec(m)
    }

    fn cost(&self) -> f64 {
        self.problem.hamiltonian.cost.pair(&self.grid_moments(self.problem.hamiltonian.cost.degree()))
    }
}

/// Solve `(1 + 2r) x_j - r (x_{j-1} + x_{j+1}) = d_j` on a periodic mesh
/// (Sherman–Morrison around the Thomas algorithm).
fn solve_periodic(r: f64, d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let (a, b, c) = (-r, 1.0 + 2.0 * r, -r);
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let thomas = |rhs: &[f64]| -> Vec<f64> {
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c / diag[0];
        dp[0] = rhs[0] / diag[0];
        for i in 1..n {
            let den = diag[i] - a * cp[i - 1];
            cp[i] = c / den;
            dp[i] = (rhs[i] - a * dp[i - 1]) / den;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    let y = thomas(d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let z = thomas(&u);
    let fact = (y[0] + a * y[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - fact * zi).collect()
}

impl Flow for VolumeFlow<'_> {
    fn step(&mut self, dt: f64) -> Result<()> {
        let n = self.rho.len();
        let h = self.h;
        let kernel = &self.problem.hamiltonian.drift;
        let m = self.grid_moments(kernel.degree());
        let faces: Vec<f64> = (0..n).map(|j| kernel.convolve((j as f64 + 0.5) * h, &m)).collect();
        let bmax = faces.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        // explicit drift: sub-step so that |b| dt / h ≤ 1/2
        let sub = ((bmax * dt / h) / 0.5).ceil().max(1.0) as usize;
        let dt_s = dt / sub as f64;
        for _ in 0..sub {
            let flux: Vec<f64> = (0..n)
                .map(|j| {
                    let b = faces[j];
                    let (left, right) = (self.rho[j], self.rho[(j + 1) % n]);
                    if b.abs() * h < 2.0 {
                        b * 0.5 * (left + right)
                    } else if b > 0.0 {
                        b * left
                    } else {
                        b * right
                    }
                })
                .collect();
            let rhs: Vec<f64> = (0..n).map(|j| self.rho[j] - dt_s / h * (flux[j] - flux[(j + n - 1) % n])).collect();
            self.rho = solve_periodic(dt_s / (h * h), &rhs);
        }
        let next = self.cost();
        self.running += 0.5 * dt * (self.cost_now + next);
        self.cost_now = next;
        if self.rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("finite-volume Fokker–Planck flow diverged".into()));
        }
        Ok(())
    }

    fn moments(&self, degree: usize) -> Moments {
        self.grid_moments(degree)
    }

    fn running(&self) -> f64 {
        self.running
    }
}

/// Mass `∫ρ` after evolving a grid density for `tau` (finite-volume scheme).
pub fn finite_volume_mass(problem: &ProblemSpec, mu: &GridDensity, tau: f64, dt: f64) -> Result<f64> {
    check_problem(problem)?;
    let mut flow = VolumeFlow::new(problem, &Measure::Grid(mu.clone()), mu.m())?;
    let n = (tau / dt).ceil().max(1.0) as usize;
    for _ in 0..n {
        flow.step(tau / n as f64)?;
    }
    Ok(flow.rho.iter().sum::<f64>() * TWO_PI / mu.m() as f64)
}
