//! Problem families for Eq. (nHJB) on the circle.
//!
//! Every kernel is a real trigonometric polynomial, so all measure-dependent
//! quantities reduce to the moments `m_k = ∫ e^{-ikx} μ(dx)`:
//!
//! * drift `b(x,μ) = ∫K(x-y)μ(dy) = Σ_k κ_k e^{ikx} m_k`,
//! * running cost `f(x,μ) = ∫J(x-y)μ(dy)`, with `⟨f(·,μ),μ⟩ = Σ_k j_k |m_k|²`,
//! * terminal cost `G(μ) = ∫g dμ + (∫h dμ)²`.
//!
//! The Hamiltonian is `H(x,p,μ) = λ|p|²/2 + b(x,μ)·p + f(x,μ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sobolev::sobolev_norm;
use crate::torus::{FourierVector, TorusContext, TWO_PI};

/// `c0 + Σ_{k≥1} cos[k-1]·cos(kx) + sin[k-1]·sin(kx)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly::default()
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly { c0: c, ..Default::default() }
    }

    pub fn cos1(a: f64) -> Self {
        TrigPoly { cos: vec![a], ..Default::default() }
    }

    pub fn sin1(b: f64) -> Self {
        TrigPoly { sin: vec![b], ..Default::default() }
    }

    pub fn degree(&self) -> usize {
        let last = |v: &[f64]| v.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
        last(&self.cos).max(last(&self.sin))
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.degree() == 0
    }

    fn cos_k(&self, k: usize) -> f64 {
        self.cos.get(k - 1).copied().unwrap_or(0.0)
    }

    fn sin_k(&self, k: usize) -> f64 {
        self.sin.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Complex coefficient `κ_k` of `e^{iku}`, `k ≥ 0`; `κ_{-k} = conj(κ_k)`.
    pub fn coef(&self, k: usize) -> Complex64 {
        if k == 0 {
            Complex64::new(self.c0, 0.0)
        } else {
            Complex64::new(self.cos_k(k), -self.sin_k(k)) * 0.5
        }
    }

    fn coef_signed(&self, k: i64) -> Complex64 {
        let c = self.coef(k.unsigned_abs() as usize);
        if k < 0 {
            c.conj()
        } else {
            c
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (1..=self.degree()).fold(self.c0, |acc, k| {
            let (s, c) = (k as f64 * x).sin_cos();
            acc + self.cos_k(k) * c + self.sin_k(k) * s
        })
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (1..=self.degree()).fold(0.0, |acc, k| {
            let (s, c) = (k as f64 * x).sin_cos();
            acc + k as f64 * (self.sin_k(k) * c - self.cos_k(k) * s)
        })
    }

    /// `|c0| + Σ (|a_k| + |b_k|)`, an upper bound on the sup-norm.
    pub fn sup_bound(&self) -> f64 {
        self.c0.abs() + (1..=self.degree()).map(|k| self.cos_k(k).abs() + self.sin_k(k).abs()).sum::<f64>()
    }

    /// `Σ k (|a_k| + |b_k|)`, an upper bound on the Lipschitz constant.
    pub fn lip_bound(&self) -> f64 {
        (1..=self.degree()).map(|k| k as f64 * (self.cos_k(k).abs() + self.sin_k(k).abs())).sum()
    }

    /// Coefficients `F_l(f) = ∫ f e_l^*` of the function on `ctx` (d=1).
    pub fn fourier(&self, ctx: &TorusContext) -> Result<FourierVector> {
        if ctx.d() != 1 {
            return Err(Error::UnsupportedDimension { d: ctx.d(), hint: "trig-polynomial kernels are d=1" });
        }
        if self.degree() > ctx.trunc() {
            return Err(Error::domain(format!("degree {} exceeds truncation {}", self.degree(), ctx.trunc())));
        }
        // f = Σ κ_l e^{ilx} = Σ √(2π) κ_l e_l
        let s = TWO_PI.sqrt();
        let modes: Vec<(Vec<i64>, Complex64)> =
            (-(self.degree() as i64)..=self.degree() as i64).map(|l| (vec![l], self.coef_signed(l) * s)).collect();
        FourierVector::from_modes(*ctx, &modes)
    }

    /// `∫ K(x-y) μ(dy)` from the moments of μ.
    pub fn convolve(&self, x: f64, m: &Moments) -> f64 {
        let mut acc = self.c0 * m.get(0).re;
        for k in 1..=self.degree() {
            let e = Complex64::from_polar(1.0, k as f64 * x);
            acc += 2.0 * (self.coef(k) * e * m.get(k)).re;
        }
        acc
    }

    /// `∫∫ K(x-y) μ(dx) μ(dy) = Σ_k κ_k |m_k|²`.
    pub fn pair(&self, m: &Moments) -> f64 {
        let mut acc = self.c0 * m.get(0).norm_sqr();
        for k in 1..=self.degree() {
            acc += self.cos_k(k) * m.get(k).norm_sqr();
        }
        acc
    }

    /// `∫ g dμ`.
    pub fn integrate(&self, m: &Moments) -> f64 {
        let mut acc = self.c0 * m.get(0).re;
        for k in 1..=self.degree() {
            acc += 2.0 * (self.coef(k) * m.get(k).conj()).re;
        }
        acc
    }

    /// `E_z[∫ g(x+z) μ(dx)]` for `z ~ N(0, σ²)`.
    pub fn integrate_smoothed(&self, m: &Moments, var: f64) -> f64 {
        let mut acc = self.c0 * m.get(0).re;
        for k in 1..=self.degree() {
            let damp = (-0.5 * (k * k) as f64 * var).exp();
            acc += 2.0 * damp * (self.coef(k) * m.get(k).conj()).re;
        }
        acc
    }
}

/// Moments `m_k = ∫ e^{-ikx} μ(dx)` for `0 ≤ k ≤ degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments(Vec<Complex64>);

impl Moments {
    pub fn from_atoms(xs: &[f64], degree: usize) -> Self {
        let w = 1.0 / xs.len() as f64;
        let mut m = vec![Complex64::new(0.0, 0.0); degree + 1];
        for &x in xs {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += Complex64::from_polar(w, -(k as f64) * x);
            }
        }
        m[0] = Complex64::new(1.0, 0.0);
        Moments(m)
    }

    pub fn from_vec(m: Vec<Complex64>) -> Self {
        Moments(m)
    }

    /// `m_k` for any signed `k` (zero beyond the stored range).
    pub fn get_signed(&self, k: i64) -> Complex64 {
        match self.0.get(k.unsigned_abs() as usize) {
            Some(v) if k < 0 => v.conj(),
            Some(v) => *v,
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.0.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianFamily {
    Zero,
    LinearInP,
    QuadraticInP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub family: HamiltonianFamily,
    /// Drift kernel `K`.
    #[serde(default)]
    pub drift: TrigPoly,
    /// Running-cost kernel `J`.
    #[serde(default)]
    pub cost: TrigPoly,
    /// Quadratic coefficient `λ` (QuadraticInP only).
    #[serde(default)]
    pub lambda: f64,
}

impl HamiltonianSpec {
    pub fn zero() -> Self {
        HamiltonianSpec {
            family: HamiltonianFamily::Zero,
            drift: TrigPoly::zero(),
            cost: TrigPoly::zero(),
            lambda: 0.0,
        }
    }

    pub fn linear(drift: TrigPoly, cost: TrigPoly) -> Self {
        HamiltonianSpec { family: HamiltonianFamily::LinearInP, drift, cost, lambda: 0.0 }
    }

    pub fn is_linear(&self) -> bool {
        self.family != HamiltonianFamily::QuadraticInP
    }

    pub fn degree(&self) -> usize {
        self.drift.degree().max(self.cost.degree())
    }
}

/// `G(μ) = ∫g dμ + (∫h dμ)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSpec {
    #[serde(default)]
    pub g: TrigPoly,
    #[serde(default)]
    pub h: TrigPoly,
}

impl TerminalSpec {
    pub fn degree(&self) -> usize {
        self.g.degree().max(self.h.degree())
    }

    pub fn eval(&self, m: &Moments) -> f64 {
        let q = self.h.integrate(m);
        self.g.integrate(m) + q * q
    }

    pub fn eval_atoms(&self, xs: &[f64]) -> f64 {
        self.eval(&Moments::from_atoms(xs, self.degree()))
    }

    /// `E_z[G((·+z)_# μ)]` for a Gaussian shift `z ~ N(0, σ²)`.
    pub fn eval_shift_averaged(&self, m: &Moments, var: f64) -> f64 {
        let lin = self.g.integrate_smoothed(m, var);
        let dh = self.h.degree() as i64;
        let mut quad = Complex64::new(0.0, 0.0);
        for k in -dh..=dh {
            for j in -dh..=dh {
                let damp = (-0.5 * ((k + j) * (k + j)) as f64 * var).exp();
                quad += self.h.coef_signed(k)
                    * self.h.coef_signed(j)
                    * m.get_signed(k).conj()
                    * m.get_signed(j).conj()
                    * damp;
            }
        }
        lin + quad.re
    }

    pub fn is_constant(&self) -> bool {
        self.g.degree() == 0 && self.h.degree() == 0
    }
}

/// One instance of Eq. (nHJB)/(HJB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub hamiltonian: HamiltonianSpec,
    pub terminal: TerminalSpec,
    /// Common-noise intensity `a ≥ 0`.
    pub a: f64,
    /// Horizon `T > 0`.
    pub horizon: f64,
    pub ctx: TorusContext,
}

/// Constants implied by the coefficients (Assumption 1.1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    /// `sup |b|`.
    pub drift_sup: f64,
    /// Lipschitz constant of `K`.
    pub drift_lip: f64,
    /// `sup |f|`.
    pub cost_sup: f64,
    /// Lipschitz constant of `J`.
    pub cost_lip: f64,
    /// Growth/Lipschitz constant of `H`: `max(λ/2 + sup|K|, Lip K + Lip J)`.
    pub c_h: f64,
    /// `|G(μ)-G(ν)| ≤ g_lip_rho · ρ_*(μ,ν)`.
    pub g_lip_rho: f64,
    /// `N · |D_{x^i} G(μ^x)| ≤ g_lip_x`.
    pub g_lip_x: f64,
}

impl ProblemSpec {
    pub fn new(hamiltonian: HamiltonianSpec, terminal: TerminalSpec, a: f64, horizon: f64) -> Result<Self> {
        let p = ProblemSpec { hamiltonian, terminal, a, horizon, ctx: TorusContext::with_default_trunc(1)? };
        p.validate()?;
        Ok(p)
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        let p = ProblemSpec { a, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let p = ProblemSpec { horizon, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    /// Check the invariants of the family and return the implied constants.
    pub fn validate(&self) -> Result<ProblemReport> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::domain(format!("common-noise level a={} must be finite and >= 0", self.a)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::domain(format!("horizon T={} must be finite and > 0", self.horizon)));
        }
        if self.ctx.d() != 1 {
            return Err(Error::UnsupportedDimension { d: self.ctx.d(), hint: "problem families are defined for d=1" });
        }
        let polys = [
            ("drift", &self.hamiltonian.drift),
            ("cost", &self.hamiltonian.cost),
            ("g", &self.terminal.g),
            ("h", &self.terminal.h),
        ];
        for (name, p) in polys {
            if !p.c0.is_finite() || p.cos.iter().chain(&p.sin).any(|c| !c.is_finite()) {
                return Err(Error::domain(format!("kernel {name} has non-finite coefficients")));
            }
            if p.degree() > self.ctx.trunc() {
                return Err(Error::domain(format!(
                    "kernel {name} has degree {} > trunc {}",
                    p.degree(),
                    self.ctx.trunc()
                )));
            }
        }
        let h = &self.hamiltonian;
        match h.family {
            HamiltonianFamily::Zero => {
                if !h.drift.is_zero() || !h.cost.is_zero() || h.lambda != 0.0 {
                    return Err(Error::domain("family 'zero' must have zero drift, cost and lambda"));
                }
            }
            HamiltonianFamily::LinearInP => {
                if h.lambda != 0.0 {
                    return Err(Error::domain("family 'linear_in_p' must have lambda = 0"));
                }
            }
            HamiltonianFamily::QuadraticInP => {
                if !(h.lambda.is_finite() && h.lambda > 0.0) {
                    return Err(Error::domain("family 'quadratic_in_p' needs a finite lambda > 0"));
                }
            }
        }
        let (g, hh) = (&self.terminal.g, &self.terminal.h);
        let k = self.ctx.k_star() as i32;
        let g_lip_rho =
            sobolev_norm(&g.fourier(&self.ctx)?, k) + 2.0 * hh.sup_bound() * sobolev_norm(&hh.fourier(&self.ctx)?, k);
        Ok(ProblemReport {
            drift_sup: h.drift.sup_bound(),
            drift_lip: h.drift.lip_bound(),
            cost_sup: h.cost.sup_bound(),
            cost_lip: h.cost.lip_bound(),
            c_h: (h.lambda / 2.0 + h.drift.sup_bound()).max(h.drift.lip_bound() + h.cost.lip_bound()),
            g_lip_rho,
            g_lip_x: g.lip_bound() + 2.0 * hh.sup_bound() * hh.lip_bound(),
        })
    }

    /// Terminal condition `G(μ^x)`.
    pub fn terminal_value(&self, xs: &[f64]) -> f64 {
        self.terminal.eval_atoms(xs)
    }

    /// Drift `b(x^i, μ^x)` for every particle and the mean running cost
    /// `(1/N) Σ f(x^i, μ^x)`, written into `drift`.
    pub fn particle_fields(&self, xs: &[f64], drift: &mut [f64]) -> f64 {
        let h = &self.hamiltonian;
        let m = Moments::from_atoms(xs, h.degree());
        for (b, &x) in drift.iter_mut().zip(xs) {
            *b = h.drift.convolve(x, &m);
        }
        h.cost.pair(&m)
    }

    /// An a-priori bound on `N |D_{x^i} v^N|` used to size explicit time steps
    /// for the quadratic family.
    pub fn gradient_bound(&self) -> Result<f64> {
        let r = self.validate()?;
        Ok((r.g_lip_x + 2.0 * self.horizon * r.cost_lip) * (2.0 * self.horizon * r.drift_lip).exp())
    }
}

/// Shipped benchmarks (d=1, T=1 unless stated).
pub mod benchmarks {
    use super::*;

    /// `H ≡ 0`, `G(μ) = ∫cos dμ`: `v^N(t,x) = e^{-(1+a)(T-t)} (1/N) Σ cos x^i`.
    pub fn null(a: f64) -> ProblemSpec {
        ProblemSpec::new(HamiltonianSpec::zero(), TerminalSpec { g: TrigPoly::cos1(1.0), h: TrigPoly::zero() }, a, 1.0)
            .expect("valid benchmark")
    }

    /// Linear in p with interaction: `K = 0.5 sin`, `J = 0.3 cos`, `G = ∫cos dμ`.
    pub fn linear(a: f64) -> ProblemSpec {
        ProblemSpec::new(
            HamiltonianSpec::linear(TrigPoly::sin1(0.5), TrigPoly::cos1(0.3)),
            TerminalSpec { g: TrigPoly::cos1(1.0), h: TrigPoly::zero() },
            a,
            1.0,
        )
        .expect("valid benchmark")
    }

    /// Mean-interaction benchmark: `K = 0.8 sin`, `J = 0.5 cos`,
    /// `G(μ) = ∫cos dμ + (∫sin dμ)²`.
    pub fn mean_interaction(a: f64) -> ProblemSpec {
        ProblemSpec::new(
            HamiltonianSpec::linear(TrigPoly::sin1(0.8), TrigPoly::cos1(0.5)),
            TerminalSpec { g: TrigPoly::cos1(1.0), h: TrigPoly::sin1(1.0) },
            a,
            1.0,
        )
        .expect("valid benchmark")
    }

    /// Nonlinear control problem: the linear benchmark plus `λ|p|²/2`, `λ = 0.5`.
    pub fn quadratic(a: f64) -> ProblemSpec {
        ProblemSpec::new(
            HamiltonianSpec {
                family: HamiltonianFamily::QuadraticInP,
                drift: TrigPoly::sin1(0.5),
                cost: TrigPoly::cos1(0.3),
                lambda: 0.5,
            },
            TerminalSpec { g: TrigPoly::cos1(1.0), h: TrigPoly::zero() },
            a,
            1.0,
        )
        .expect("valid benchmark")
    }

    pub fn by_name(name: &str, a: f64) -> Result<ProblemSpec> {
        match name {
            "null" => Ok(null(a)),
            "linear" => Ok(linear(a)),
            "mean_interaction" => Ok(mean_interaction(a)),
            "quadratic" => Ok(quadratic(a)),
            other => Err(Error::domain(format!(
                "unknown benchmark '{other}' (expected null, linear, mean_interaction, quadratic)"
            ))),
        }
    }
}
