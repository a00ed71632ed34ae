//! Explicit finite-difference solver for Eq. (nHJB) with d=1.
//!
//! In backward time `τ = T - t` the equation reads
//! `∂_τ w = (1/N) Σ_i H(x^i, N D_i w, μ^x) + Σ_i Δ_i w + a Σ_{i,j} D²_{ij} w`.
//! The scheme is explicit Euler on the periodic mesh `(2π/m)·Z_m^N`:
//!
//! * `Δ_i`: 3-point stencil along axis `i`;
//! * `a Σ_{ij} D²_{ij}`: 3-point stencil along the global shift `(1,…,1)`,
//!   using `Σ_{ij} D²_{ij} v(x) = ∂²_w v(x + w·1)|_{w=0}`;
//! * drift `b·D_i`: central difference when the cell Péclet number
//!   `|b|Δx ≤ 2`, upwind otherwise (both monotone);
//! * `λN|D_i w|²/2`: monotone upwind form `min(p⁻,0)² + max(p⁺,0)²`.
//!
//! Per-particle contributions are summed in the order of sorted coordinates,
//! so the discrete solution is bitwise symmetric under particle permutation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::problem::{HamiltonianFamily, ProblemSpec};
use super::ValueFn;
use crate::error::{Error, Result};
use crate::torus::{canonicalize, TWO_PI};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest admissible number of spatial nodes `mesh^N`.
pub const MAX_STATES: usize = 10_000_000;
/// Safety factor `c` in the explicit time-step bound.
pub const CFL: f64 = 0.9;
/// Memory ceiling for stored time slices.
const MAX_STORED_BYTES: usize = 1 << 31;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    /// Nodes per particle axis.
    pub mesh: usize,
    /// Euler steps over `[0, T]`.
    pub n_t: usize,
    /// Store every `save_every`-th time slice (must divide `n_t`).
    #[serde(default = "one")]
    pub save_every: usize,
}

fn one() -> usize {
    1
}

impl FdConfig {
    /// The stable configuration with at most `max_slices` stored intervals.
    pub fn auto(problem: &ProblemSpec, n: usize, mesh: usize, max_slices: usize) -> Result<Self> {
        let req = required_steps(problem, n, mesh)?;
        let slices = max_slices.max(1);
        let save_every = req.div_ceil(slices);
        Ok(FdConfig { mesh, n_t: save_every * slices.min(req.div_ceil(save_every)), save_every })
    }
}

/// Largest stable Euler step for `(problem, N, mesh)`.
///
/// Monotonicity requires the centre coefficient
/// `2(N+a)/Δx² + N·sup|b|/Δx + 2λ N P/Δx` times `Δτ` to stay below 1, where
/// `P` bounds `N|D_i v|`; we keep a margin `c = 0.9`.
pub fn stable_dt(problem: &ProblemSpec, n: usize, mesh: usize) -> Result<f64> {
    let report = problem.validate()?;
    let h = TWO_PI / mesh as f64;
    let nf = n as f64;
    let mut coef = 2.0 * (nf + problem.a) / (h * h) + nf * report.drift_sup / h;
    if problem.hamiltonian.family == HamiltonianFamily::QuadraticInP {
        coef += 2.0 * problem.hamiltonian.lambda * nf * problem.gradient_bound()? / h;
    }
    Ok(CFL / coef)
}

/// Minimum `n_t` satisfying [`stable_dt`].
pub fn required_steps(problem: &ProblemSpec, n: usize, mesh: usize) -> Result<usize> {
    Ok((problem.horizon / stable_dt(problem, n, mesh)?).ceil().max(1.0) as usize)
}

fn check_size(n: usize, mesh: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::domain("particle count N must be positive"));
    }
    if mesh < 4 {
        return Err(Error::domain(format!("mesh must be at least 4, got {mesh}")));
    }
    let states = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(mesh).filter(|s| *s <= MAX_STATES));
    states.ok_or_else(|| {
        Error::Resource(format!("mesh^N = {mesh}^{n} exceeds the state-count bound mesh^N <= {MAX_STATES}"))
    })
}

/// Solve with every time slice stored.
pub fn fd_solve(problem: &ProblemSpec, n: usize, mesh: usize, n_t: usize) -> Result<GridValueFunction> {
    fd_solve_with(problem, n, FdConfig { mesh, n_t, save_every: 1 })
}

/// Solve Eq. (nHJB) backward from `G(μ^x)`.
pub fn fd_solve_with(problem: &ProblemSpec, n: usize, cfg: FdConfig) -> Result<GridValueFunction> {
    problem.validate()?;
    let FdConfig { mesh, n_t, save_every } = cfg;
    let states = check_size(n, mesh)?;
    let required = required_steps(problem, n, mesh)?;
    if n_t < required {
        return Err(Error::config(format!(
            "n_t = {n_t} violates the explicit stability bound for N={n}, mesh={mesh}, a={}: need n_t >= {required}",
            problem.a
        )));
    }
    if save_every == 0 || n_t % save_every != 0 {
        return Err(Error::config(format!("save_every = {save_every} must divide n_t = {n_t}")));
    }
    let n_stored = n_t / save_every;
    let bytes = (n_stored + 1).saturating_mul(states).saturating_mul(8);
    if bytes > MAX_STORED_BYTES {
        return Err(Error::Resource(format!("storing {} slices of {states} nodes needs {bytes} bytes", n_stored + 1)));
    }

    let stencil = Stencil::new(problem, n, mesh, problem.horizon / n_t as f64);
    let mut cur = vec![0.0; states];
    for_each_chunk(&mut cur, |base, out| {
        let mut node = NodeScratch::new(n, mesh, base);
        for v in out.iter_mut() {
            node.load_sorted(&stencil.h);
            *v = problem.terminal_value(&node.sorted_x);
            node.advance();
        }
        Ok(())
    })?;

    // slices[k] holds τ = k·save_every·Δτ; reversed at the end into t order.
    let mut slices = Vec::with_capacity(n_stored + 1);
    slices.push(cur.clone());
    let mut next = vec![0.0; states];
    for step in 1..=n_t {
        for_each_chunk(&mut next, |base, out| stencil.apply(&cur, base, out))?;
        std::mem::swap(&mut cur, &mut next);
        if step % save_every == 0 {
            slices.push(cur.clone());
        }
    }
    slices.reverse();
    Ok(GridValueFunction { n, mesh, n_t: n_stored, horizon: problem.horizon, values: slices.concat() })
}

fn for_each_chunk<F>(buf: &mut [f64], f: F) -> Result<()>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        buf.par_chunks_mut(CHUNK).enumerate().try_for_each(|(c, out)| f(c * CHUNK, out))
    }
    #[cfg(not(feature = "parallel"))]
    {
        buf.chunks_mut(CHUNK).enumerate().try_for_each(|(c, out)| f(c * CHUNK, out))
    }
}

/// Odometer over the mesh digits of consecutive flat indices.
struct NodeScratch {
    mesh: usize,
    digits: Vec<usize>,
    order: Vec<usize>,
    sorted_x: Vec<f64>,
}

impl NodeScratch {
    fn new(n: usize, mesh: usize, flat: usize) -> Self {
        let mut digits = vec![0; n];
        let mut r = flat;
        for d in digits.iter_mut().rev() {
            *d = r % mesh;
            r /= mesh;
        }
        NodeScratch { mesh, digits, order: (0..n).collect(), sorted_x: vec![0.0; n] }
    }

    /// Sort particle indices by coordinate (ties keep index order) and fill
    /// the sorted coordinates.
    fn load_sorted(&mut self, h: &f64) {
        let digits = &self.digits;
        for (i, o) in self.order.iter_mut().enumerate() {
            *o = i;
        }
        self.order.sort_by_key(|&i| digits[i]);
        for (x, &i) in self.sorted_x.iter_mut().zip(&self.order) {
            *x = digits[i] as f64 * h;
        }
    }

    fn advance(&mut self) {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.mesh {
                return;
            }
            *d = 0;
        }
    }
}

/// Precomputed per-solve data for the explicit update.
struct Stencil<'a> {
    problem: &'a ProblemSpec,
    n: usize,
    mesh: usize,
    h: f64,
    dt: f64,
    strides: Vec<usize>,
    /// `e^{-ikx_j}` for node `j` and `0 ≤ k ≤ degree`, row-major by node.
    phases: Vec<Complex64>,
    degree: usize,
    active: bool,
}

impl<'a> Stencil<'a> {
    fn new(problem: &'a ProblemSpec, n: usize, mesh: usize, dt: f64) -> Self {
        let h = TWO_PI / mesh as f64;
        let degree = problem.hamiltonian.degree();
        let phases = (0..mesh)
            .flat_map(|j| (0..=degree).map(move |k| Complex64::from_polar(1.0, -((k * j) as f64) * h)))
            .collect();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * mesh;
        }
        Stencil {
            problem,
            n,
            mesh,
            h,
            dt,
            strides,
            phases,
            degree,
            active: problem.hamiltonian.family != HamiltonianFamily::Zero,
        }
    }

    fn phase(&self, j: usize, k: usize) -> Complex64 {
        self.phases[j * (self.degree + 1) + k]
    }

    fn apply(&self, old: &[f64], base: usize, out: &mut [f64]) -> Result<()> {
        let (n, m, h) = (self.n, self.mesh, self.h);
        let ham = &self.problem.hamiltonian;
        let quad = ham.family == HamiltonianFamily::QuadraticInP;
        let (inv_h2, inv_2h, inv_h) = (1.0 / (h * h), 0.5 / h, 1.0 / h);
        let nf = n as f64;
        let mut node = NodeScratch::new(n, m, base);
        let mut moments = vec![Complex64::new(0.0, 0.0); self.degree + 1];
        for (offset, slot) in out.iter_mut().enumerate() {
            let idx = base + offset;
            let v = old[idx];
            let mut rhs = 0.0;
            let mut centre = 0.0;
            node.load_sorted(&h);

            if self.active {
                let w = 1.0 / nf;
                for mk in moments.iter_mut() {
                    *mk = Complex64::new(0.0, 0.0);
                }
                for &i in &node.order {
                    for (k, mk) in moments.iter_mut().enumerate() {
                        *mk += self.phase(node.digits[i], k) * w;
                    }
                }
                moments[0] = Complex64::new(1.0, 0.0);
            }
            let mut running = 0.0;

            for &i in &node.order {
                let j = node.digits[i];
                let s = self.strides[i];
                let up = if j + 1 == m { idx + s - m * s } else { idx + s };
                let dn = if j == 0 { idx + (m - 1) * s } else { idx - s };
                let (vu, vd) = (old[up], old[dn]);
                rhs += (vu - 2.0 * v + vd) * inv_h2;
                if !self.active {
                    continue;
                }
                // b(x^i, μ^x) and f(x^i, μ^x) from the moments
                let (mut b, mut f) = (ham.drift.c0, ham.cost.c0);
                for (k, mk) in moments.iter().enumerate().skip(1) {
                    let e = self.phase(j, k).conj() * mk;
                    b += 2.0 * (ham.drift.coef(k) * e).re;
                    f += 2.0 * (ham.cost.coef(k) * e).re;
                }
                running += f;
                if b.abs() * h <= 2.0 {
                    rhs += b * (vu - vd) * inv_2h;
                } else if b > 0.0 {
                    rhs += b * (vu - v) * inv_h;
                    centre += b * inv_h;
                } else {
                    rhs += b * (v - vd) * inv_h;
                    centre -= b * inv_h;
                }
                if quad {
                    let (pm, pp) = ((v - vd) * inv_h, (vu - v) * inv_h);
                    let (lo, hi) = (pm.min(0.0), pp.max(0.0));
                    rhs += 0.5 * ham.lambda * nf * (lo * lo + hi * hi);
                    centre += ham.lambda * nf * (hi - lo) * inv_h;
                }
            }
            rhs += running / nf;
            if self.problem.a > 0.0 {
                let (mut up, mut dn) = (0usize, 0usize);
                for i in 0..n {
                    let j = node.digits[i];
                    up += ((j + 1) % m) * self.strides[i];
                    dn += ((j + m - 1) % m) * self.strides[i];
                }
                rhs += self.problem.a * (old[up] - 2.0 * v + old[dn]) * inv_h2;
            }
            centre += 2.0 * (nf + self.problem.a) * inv_h2;
            if quad && self.dt * centre > 1.0 {
                return Err(Error::Divergence(format!(
                    "monotonicity lost at node {idx}: the gradient exceeded the a-priori bound; increase n_t"
                )));
            }
            let new = v + self.dt * rhs;
            if !new.is_finite() {
                return Err(Error::Divergence(format!("non-finite value at node {idx}")));
            }
            *slot = new;
            node.advance();
        }
        Ok(())
    }
}

/// FD solution on `{t_0..t_{n_t}} × mesh^N`, `t_j = jT/n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValueFunction {
    pub(crate) n: usize,
    pub(crate) mesh: usize,
    pub(crate) n_t: usize,
    pub(crate) horizon: f64,
    pub(crate) values: Vec<f64>,
}

impl GridValueFunction {
    pub fn from_parts(n: usize, mesh: usize, n_t: usize, horizon: f64, values: Vec<f64>) -> Result<Self> {
        let states = check_size(n, mesh)?;
        if values.len() != (n_t + 1) * states {
            return Err(Error::Format(format!(
                "expected {} values for N={n}, mesh={mesh}, n_t={n_t}, got {}",
                (n_t + 1) * states,
                values.len()
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("horizon and values must be finite".into()));
        }
        Ok(GridValueFunction { n, mesh, n_t, horizon, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mesh(&self) -> usize {
        self.mesh
    }

    /// Number of stored time intervals.
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn states(&self) -> usize {
        self.values.len() / (self.n_t + 1)
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.mesh as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.horizon * j as f64 / self.n_t as f64
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let s = self.states();
        &self.values[j * s..(j + 1) * s]
    }

    /// Mesh digits of a flat node index (particle 0 slowest).
    pub fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for x in d.iter_mut().rev() {
            *x = idx % self.mesh;
            idx /= self.mesh;
        }
        d
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &j| acc * self.mesh + j % self.mesh)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.digits(idx).into_iter().map(|j| j as f64 * h).collect()
    }

    /// Multilinear interpolation of slice `j` at `x`.
    fn interp_slice(&self, j: usize, x: &[f64]) -> f64 {
        let slice = self.slice(j);
        let h = self.spacing();
        let m = self.mesh;
        let cells: Vec<(usize, f64)> = x
            .iter()
            .map(|&c| {
                let mut u = c / h;
                if (u - u.round()).abs() < 1e-9 {
                    u = u.round();
                }
                let k = u.floor();
                ((k as usize) % m, u - k)
            })
            .collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << self.n) {
            let mut w = 1.0;
            let mut idx = 0;
            for (i, &(k, th)) in cells.iter().enumerate() {
                let hi = (corner >> (self.n - 1 - i)) & 1 == 1;
                w *= if hi { th } else { 1.0 - th };
                idx = idx * m + if hi { (k + 1) % m } else { k };
            }
            if w != 0.0 {
                acc += w * slice[idx];
            }
        }
        acc
    }
}

impl ValueFn for GridValueFunction {
    fn n_particles(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Multilinear in space, linear in time.
    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::domain(format!("configuration has {} coordinates, N = {}", x.len(), self.n)));
        }
        if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let x = canonicalize(x)?;
        let mut s = t / self.horizon * self.n_t as f64;
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        let j = (s.floor() as usize).min(self.n_t.saturating_sub(1));
        let th = s - j as f64;
        if self.n_t == 0 {
            return Ok(self.interp_slice(0, &x));
        }
        let lo = self.interp_slice(j, &x);
        if th == 0.0 {
            return Ok(lo);
        }
        Ok((1.0 - th) * lo + th * self.interp_slice(j + 1, &x))
    }
}
