//! Negative Sobolev (Fourier–Wasserstein) distances on the torus.
//!
//! `ρ_{-k}(μ,ν)² = Σ_l (1+|l|²)^{-k} |F_l(μ) - F_l(ν)|²`, truncated to
//! `|l|_∞ ≤ L`. With `k = k_*` this is `ρ_*`. Besides the distance the module
//! evaluates the measure derivatives of `ν ↦ ρ_*²(μ,ν)`:
//!
//! * [`rho_sq_grad`]: the Lions derivative `D_ν ρ²(x)`;
//! * [`rho_sq_mixed`]: its spatial gradient `D²_{xν} ρ²(x)`;
//! * [`rho_sq_hess`]: the second Lions derivative `D²_ν ρ²(x,y)`.
//!
//! Lions derivatives are returned as fields over the torus. The partial
//! derivative in atom `x^i` of an `N`-atom empirical measure is `1/N` times
//! the field at that atom; callers apply that factor.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::{FourierMeasure, FourierVector, TorusContext, TWO_PI};

/// Imaginary residue above which a derivative series is reported as broken.
const RESIDUE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricOrder(u32);

impl MetricOrder {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("Sobolev order must be at least 1"));
        }
        Ok(MetricOrder(k))
    }

    /// `k = k_*`, the order of `ρ_*`.
    pub fn star(ctx: &TorusContext) -> Self {
        MetricOrder(ctx.k_star())
    }

    pub fn k(self) -> u32 {
        self.0
    }
}

/// Per-mode weights `(1+|l|²)^{-k}` and the Cauchy–Schwarz constants
/// `c1 = √Σ|l|²(1+|l|²)^{-k}`, `c2 = √Σ|l|⁴(1+|l|²)^{-k}` over the retained modes.
#[derive(Debug, Clone)]
pub struct MetricWeights {
    ctx: TorusContext,
    order: MetricOrder,
    modes: Vec<Vec<i64>>,
    weights: Vec<f64>,
    c1: f64,
    c2: f64,
}

impl MetricWeights {
    pub fn new(ctx: &TorusContext, order: MetricOrder) -> Self {
        let modes = ctx.modes();
        let norms = ctx.mode_norms_sq();
        let k = order.k() as i32;
        let weights: Vec<f64> = norms.iter().map(|n| (1.0 + n).powi(-k)).collect();
        let c1 = norms.iter().zip(&weights).map(|(n, w)| n * w).sum::<f64>().sqrt();
        let c2 = norms.iter().zip(&weights).map(|(n, w)| n * n * w).sum::<f64>().sqrt();
        MetricWeights { ctx: *ctx, order, modes, weights, c1, c2 }
    }

    pub fn star(ctx: &TorusContext) -> Self {
        Self::new(ctx, MetricOrder::star(ctx))
    }

    pub fn ctx(&self) -> &TorusContext {
        &self.ctx
    }

    pub fn order(&self) -> MetricOrder {
        self.order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Weighted squared distance between two coefficient vectors.
    pub fn dist_sq(&self, a: &FourierVector, b: &FourierVector) -> Result<f64> {
        if a.ctx() != &self.ctx || b.ctx() != &self.ctx {
            return Err(Error::domain("Fourier vectors do not match the metric context"));
        }
        Ok(self.weights.iter().zip(a.coeffs().iter().zip(b.coeffs())).map(|(w, (p, q))| w * (p - q).norm_sqr()).sum())
    }

    /// Constant `C` with `ρ_{-k} ≤ C · W_1`: a function with `‖f‖_k ≤ 1` is
    /// Lipschitz with constant at most `(2π)^{-d/2} c1`.
    pub fn w1_comparison_constant(&self) -> f64 {
        self.ctx.basis_norm() * self.c1
    }
}

fn check_pair<A: FourierMeasure + ?Sized, B: FourierMeasure + ?Sized>(
    mu: &A,
    nu: &B,
    ctx: &TorusContext,
) -> Result<()> {
    if mu.dim() != ctx.d() || nu.dim() != ctx.d() {
        return Err(Error::domain(format!(
            "measures have d={} and d={}, context has d={}",
            mu.dim(),
            nu.dim(),
            ctx.d()
        )));
    }
    Ok(())
}

/// Truncated `ρ_{-k}(μ,ν)²`.
pub fn rho_sq<A, B>(mu: &A, nu: &B, order: MetricOrder, ctx: &TorusContext) -> Result<f64>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    check_pair(mu, nu, ctx)?;
    let w = MetricWeights::new(ctx, order);
    w.dist_sq(&mu.fourier(ctx)?, &nu.fourier(ctx)?)
}

/// `ρ_{-k}(μ,ν)`.
pub fn rho<A, B>(mu: &A, nu: &B, order: MetricOrder, ctx: &TorusContext) -> Result<f64>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    rho_sq(mu, nu, order, ctx).map(f64::sqrt)
}

/// `ρ_*(μ,ν)`.
pub fn rho_star<A, B>(mu: &A, nu: &B, ctx: &TorusContext) -> Result<f64>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    rho(mu, nu, MetricOrder::star(ctx), ctx)
}

/// `conj(F_l(ν) - F_l(μ))` scaled by the weights, the common factor of all
/// derivative series.
fn weighted_difference<A, B>(mu: &A, nu: &B, w: &MetricWeights) -> Result<Vec<Complex64>>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    let diff = nu.fourier(w.ctx())?.sub(&mu.fourier(w.ctx())?)?;
    Ok(diff.coeffs().iter().zip(w.weights()).map(|(g, wl)| g.conj() * wl).collect())
}

/// `e_l^*(x)` for every retained mode.
fn basis_conj(w: &MetricWeights, x: &[f64]) -> Vec<Complex64> {
    let norm = w.ctx().basis_norm();
    w.modes
        .iter()
        .map(|l| {
            let phase: f64 = l.iter().zip(x).map(|(&lj, xj)| lj as f64 * xj).sum();
            Complex64::from_polar(norm, -phase)
        })
        .collect()
}

fn take_real(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() > RESIDUE_LIMIT * (1.0 + z.re.abs()) {
        return Err(Error::Internal(format!("{what}: imaginary residue {:.3e}", z.im)));
    }
    Ok(z.re)
}

/// Lions derivative `D_ν ρ_*²(μ,ν)(x) = -2i Σ_l l w_l conj(F_l(ν-μ)) e_l^*(x)`
/// at each evaluation point.
pub fn rho_sq_grad<A, B>(mu: &A, nu: &B, points: &[Vec<f64>], ctx: &TorusContext) -> Result<Vec<Vec<f64>>>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    check_pair(mu, nu, ctx)?;
    let w = MetricWeights::star(ctx);
    let g = weighted_difference(mu, nu, &w)?;
    points
        .iter()
        .map(|x| {
            check_point(x, ctx)?;
            let e = basis_conj(&w, x);
            (0..ctx.d())
                .map(|a| {
                    let s: Complex64 =
                        w.modes.iter().zip(g.iter().zip(&e)).map(|(l, (gl, el))| gl * el * (l[a] as f64)).sum();
                    take_real(Complex64::new(0.0, -2.0) * s, "D_nu rho^2")
                })
                .collect()
        })
        .collect()
}

/// Spatial gradient of the Lions derivative,
/// `D²_{xν} ρ_*²(μ,ν)(x) = -2 Σ_l l lᵀ w_l conj(F_l(ν-μ)) e_l^*(x)`.
///
/// This is the series whose size is controlled by `ρ_*` through `c2`.
pub fn rho_sq_mixed<A, B>(mu: &A, nu: &B, points: &[Vec<f64>], ctx: &TorusContext) -> Result<Vec<Vec<Vec<f64>>>>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    check_pair(mu, nu, ctx)?;
    let w = MetricWeights::star(ctx);
    let g = weighted_difference(mu, nu, &w)?;
    let d = ctx.d();
    points
        .iter()
        .map(|x| {
            check_point(x, ctx)?;
            let e = basis_conj(&w, x);
            let mut m = vec![vec![0.0; d]; d];
            for a in 0..d {
                for b in a..d {
                    let s: Complex64 =
                        w.modes.iter().zip(g.iter().zip(&e)).map(|(l, (gl, el))| gl * el * (l[a] * l[b]) as f64).sum();
                    let v = take_real(-2.0 * s, "D_x D_nu rho^2")?;
                    m[a][b] = v;
                    m[b][a] = v;
                }
            }
            Ok(m)
        })
        .collect()
}

/// Second Lions derivative
/// `D²_ν ρ_*²(μ,ν)(x,y) = 2 Σ_l l lᵀ w_l e_l^*(x) e_l(y)`.
///
/// `ρ_*²` is quadratic in `ν`, so this kernel does not depend on the measures;
/// they are accepted for interface symmetry and validated.
pub fn rho_sq_hess<A, B>(
    mu: &A,
    nu: &B,
    pairs: &[(Vec<f64>, Vec<f64>)],
    ctx: &TorusContext,
) -> Result<Vec<Vec<Vec<f64>>>>
where
    A: FourierMeasure + ?Sized,
    B: FourierMeasure + ?Sized,
{
    check_pair(mu, nu, ctx)?;
    let w = MetricWeights::star(ctx);
    let d = ctx.d();
    pairs
        .iter()
        .map(|(x, y)| {
            check_point(x, ctx)?;
            check_point(y, ctx)?;
            let ex = basis_conj(&w, x);
            let ey = basis_conj(&w, y);
            let mut m = vec![vec![0.0; d]; d];
            for a in 0..d {
                for b in a..d {
                    let s: Complex64 = w
                        .modes
                        .iter()
                        .zip(w.weights.iter().zip(ex.iter().zip(&ey)))
                        .map(|(l, (wl, (p, q)))| p * q.conj() * (wl * (l[a] * l[b]) as f64))
                        .sum();
                    let v = take_real(2.0 * s, "D^2_nu rho^2")?;
                    m[a][b] = v;
                    m[b][a] = v;
                }
            }
            Ok(m)
        })
        .collect()
}

fn check_point(x: &[f64], ctx: &TorusContext) -> Result<()> {
    if x.len() != ctx.d() || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain(format!("evaluation point {x:?} is not a finite {}-vector", ctx.d())));
    }
    Ok(())
}

/// `‖f‖_k = (Σ_l (1+|l|²)^k |F_l(f)|²)^{1/2}` for a trigonometric polynomial.
pub fn sobolev_norm(f: &FourierVector, k: i32) -> f64 {
    f.ctx().mode_norms_sq().iter().zip(f.coeffs()).map(|(n, c)| (1.0 + n).powi(k) * c.norm_sqr()).sum::<f64>().sqrt()
}

/// Sample-complexity rate: `N^{-1/2}` (d=1), `N^{-1/2} log N` (d=2), `N^{-1/d}` (d>2).
pub fn alpha_rate(n: usize, d: usize) -> Result<f64> {
    if n == 0 || d == 0 {
        return Err(Error::domain("alpha_rate needs N >= 1 and d >= 1"));
    }
    let nf = n as f64;
    Ok(match d {
        1 => nf.powf(-0.5),
        2 => nf.powf(-0.5) * nf.ln(),
        _ => nf.powf(-1.0 / d as f64),
    })
}

/// Upper bound on the modes dropped by truncation:
/// `Σ_{|l|_∞ > L} (1+|l|²)^{-k} · 4(2π)^{-d}`, using `|F_l(μ-ν)| ≤ 2(2π)^{-d/2}`.
pub fn truncation_tail_bound(ctx: &TorusContext, order: MetricOrder) -> f64 {
    let d = ctx.d() as i32;
    let k = order.k() as i32;
    if 2 * k <= d {
        return f64::INFINITY;
    }
    let l0 = ctx.trunc() as u64;
    let cutoff = l0 + 20_000;
    let mut sum = 0.0;
    for r in (l0 + 1)..=cutoff {
        let rf = r as f64;
        let shell = (2.0 * rf + 1.0).powi(d) - (2.0 * rf - 1.0).powi(d);
        sum += shell * (1.0 + rf * rf).powi(-k);
    }
    // remainder: shell ≤ 2d(2r+1)^{d-1} ≤ 2d·3^{d-1} r^{d-1}, weight ≤ r^{-2k}
    let rc = cutoff as f64;
    let rest = 2.0 * d as f64 * 3f64.powi(d - 1) * rc.powi(d - 2 * k) / (2 * k - d) as f64;
    (sum + rest) * 4.0 * TWO_PI.powi(-d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::torus::EmpiricalMeasure;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ctx1(l: usize) -> TorusContext {
        TorusContext::new(1, l).unwrap()
    }

    fn circle(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::on_circle(xs).unwrap()
    }

    fn random_circle(seed: u64, idx: u64, n: usize) -> EmpiricalMeasure {
        let mut r = rng::stream(seed, idx);
        circle(&(0..n).map(|_| r.random::<f64>() * TWO_PI).collect::<Vec<_>>())
    }

    /// Independent series: δ_0 - δ_π has coefficients 2(2π)^{-1/2} on odd l.
    fn antipodal_oracle(k: i32, trunc: i64) -> f64 {
        let mut s = 0.0;
        let mut l = 1;
        while l <= trunc {
            s += 2.0 * (1.0 + (l * l) as f64).powi(-k);
            l += 2;
        }
        2.0 / PI * s
    }

    #[test]
    fn antipodal_regression_value() {
        let ctx = ctx1(64);
        let v = rho_sq(&circle(&[0.0]), &circle(&[PI]), MetricOrder::star(&ctx), &ctx).unwrap();
        let oracle = antipodal_oracle(3, 64);
        assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
        assert!((v - 0.1605).abs() < 5e-5);
    }

    #[test]
    fn identity_and_dimension_checks() {
        let ctx = ctx1(16);
        let mu = circle(&[0.3, 1.7, 5.0]);
        assert_eq!(rho_sq(&mu, &mu, MetricOrder::star(&ctx), &ctx).unwrap(), 0.0);
        let mu2 = EmpiricalMeasure::new(2, vec![0.0, 0.0]).unwrap();
        assert!(rho_sq(&mu, &mu2, MetricOrder::star(&ctx), &ctx).is_err());
        assert!(MetricOrder::new(0).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let ctx = ctx1(4);
        let constant = FourierVector::from_modes(ctx, &[(vec![0], Complex64::new(1.0, 0.0))]).unwrap();
        for k in 0..5 {
            assert!((sobolev_norm(&constant, k) - 1.0).abs() < 1e-15);
        }
        let e1 = FourierVector::from_modes(ctx, &[(vec![1], Complex64::new(1.0, 0.0))]).unwrap();
        assert!((sobolev_norm(&e1, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sobolev_norm_is_monotone_in_order(re in prop::collection::vec(-1.0f64..1.0, 9), k in -4i32..4) {
            let ctx = ctx1(4);
            let coeffs = re.iter().map(|&r| Complex64::new(r, 0.5 * r)).collect();
            let f = FourierVector::new(ctx, coeffs).unwrap();
            prop_assert!(sobolev_norm(&f, k + 1) >= sobolev_norm(&f, k));
        }
    }

    #[test]
    fn alpha_rate_cases() {
        assert!((alpha_rate(100, 1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(alpha_rate(1, 2).unwrap(), 0.0);
        assert!((alpha_rate(8, 3).unwrap() - 0.5).abs() < 1e-15);
        assert!((alpha_rate(16, 2).unwrap() - 0.25 * 16f64.ln()).abs() < 1e-15);
        assert!(alpha_rate(0, 1).is_err());
    }

    #[test]
    fn weights_decrease_and_constants_are_finite() {
        let ctx = ctx1(64);
        let w = MetricWeights::star(&ctx);
        let norms = ctx.mode_norms_sq();
        for i in 0..norms.len() {
            for j in 0..norms.len() {
                if norms[i] < norms[j] {
                    assert!(w.weights()[i] > w.weights()[j]);
                }
            }
        }
        assert!(w.c1().is_finite() && w.c2().is_finite());
    }

    #[test]
    fn truncation_tail_bounds_refinement() {
        for (d, l) in [(1usize, 8usize), (1, 16), (2, 3)] {
            let ctx = TorusContext::new(d, l).unwrap();
            let fine = ctx.with_trunc(2 * l).unwrap();
            let ord = MetricOrder::star(&ctx);
            let bound = truncation_tail_bound(&ctx, ord);
            for trial in 0..20 {
                let mut r = rng::stream(17, trial);
                let a = EmpiricalMeasure::new(d, (0..3 * d).map(|_| r.random::<f64>() * TWO_PI).collect()).unwrap();
                let b = EmpiricalMeasure::new(d, (0..2 * d).map(|_| r.random::<f64>() * TWO_PI).collect()).unwrap();
                let diff = rho_sq(&a, &b, ord, &fine).unwrap() - rho_sq(&a, &b, ord, &ctx).unwrap();
                assert!((0.0..=bound).contains(&diff), "d={d} L={l}: {diff} > {bound}");
            }
        }
        let default = TorusContext::with_default_trunc(1).unwrap();
        assert!(truncation_tail_bound(&default, MetricOrder::star(&default)) < 1e-9);
    }

    #[test]
    fn derivatives_vanish_at_coincidence() {
        let ctx = ctx1(32);
        let mu = circle(&[0.2, 2.0, 4.4]);
        let pts = vec![vec![0.0], vec![1.3], vec![5.9]];
        for g in rho_sq_grad(&mu, &mu, &pts, &ctx).unwrap() {
            assert!(g[0].abs() < 1e-14);
        }
        for m in rho_sq_mixed(&mu, &mu, &pts, &ctx).unwrap() {
            assert!(m[0][0].abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ctx = ctx1(64);
        for trial in 0..20u64 {
            let mu = random_circle(3, 2 * trial, 5);
            let nu = random_circle(3, 2 * trial + 1, 4);
            let n = nu.len() as f64;
            let base = rho_sq(&mu, &nu, MetricOrder::star(&ctx), &ctx).unwrap();
            let x0 = nu.coords()[1];
            let grad = rho_sq_grad(&mu, &nu, &[vec![x0]], &ctx).unwrap()[0][0];
            for h in [1e-3, 1e-4] {
                let mut c = nu.coords().to_vec();
                c[1] += h;
                let plus = rho_sq(&mu, &circle(&c), MetricOrder::star(&ctx), &ctx).unwrap();
                c[1] -= 2.0 * h;
                let minus = rho_sq(&mu, &circle(&c), MetricOrder::star(&ctx), &ctx).unwrap();
                let fd = (plus - minus) / (2.0 * h) * n;
                let fwd = (plus - base) / h * n;
                let scale = grad.abs().max(1e-3);
                assert!((fd - grad).abs() <= 10.0 * h * scale, "central h={h}: {fd} vs {grad}");
                assert!((fwd - grad).abs() <= 10.0 * h * scale.max(1.0), "forward h={h}: {fwd} vs {grad}");
            }
        }
    }

    #[test]
    fn second_derivatives_match_finite_differences() {
        let ctx = ctx1(64);
        let ord = MetricOrder::star(&ctx);
        for trial in 0..10u64 {
            let mu = random_circle(8, 2 * trial, 3);
            let nu = random_circle(8, 2 * trial + 1, 4);
            let n = nu.len() as f64;
            let f = |c: &[f64]| rho_sq(&mu, &circle(c), ord, &ctx).unwrap();
            let (xi, xj) = (nu.coords()[0], nu.coords()[2]);
            let hess_ij = rho_sq_hess(&mu, &nu, &[(vec![xi], vec![xj])], &ctx).unwrap()[0][0][0];
            let hess_ii = rho_sq_hess(&mu, &nu, &[(vec![xi], vec![xi])], &ctx).unwrap()[0][0][0];
            let mixed_i = rho_sq_mixed(&mu, &nu, &[vec![xi]], &ctx).unwrap()[0][0][0];
            for h in [1e-3, 1e-4] {
                let c = nu.coords().to_vec();
                let at = |di: f64, dj: f64| {
                    let mut v = c.clone();
                    v[0] += di;
                    v[2] += dj;
                    f(&v)
                };
                // distinct atoms: ∂²/∂x^i∂x^j = D²_ν(x^i, x^j) / N²
                let cross = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h) * n * n;
                // same atom: ∂²/∂(x^i)² = D²_{xν}(x^i)/N + D²_ν(x^i, x^i)/N²
                let diag = (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h);
                let diag_expect = mixed_i / n + hess_ii / (n * n);
                let tol_cross = 10.0 * h * hess_ij.abs().max(1.0);
                let tol_diag = 10.0 * h * diag_expect.abs().max(1.0);
                assert!((cross - hess_ij).abs() <= tol_cross, "h={h}: {cross} vs {hess_ij}");
                assert!((diag - diag_expect).abs() <= tol_diag, "h={h}: {diag} vs {diag_expect}");
            }
        }
    }

    #[test]
    fn derivative_bounds_hold() {
        let ctx = ctx1(64);
        let w = MetricWeights::star(&ctx);
        let pts: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64 * TWO_PI / 16.0]).collect();
        for trial in 0..50u64 {
            let mu = random_circle(21, 2 * trial, 6);
            let nu = random_circle(21, 2 * trial + 1, 3);
            let r = rho_star(&mu, &nu, &ctx).unwrap();
            for g in rho_sq_grad(&mu, &nu, &pts, &ctx).unwrap() {
                assert!(g[0].abs() <= 2.0 * w.c1() * w.ctx().basis_norm() * r * (1.0 + 1e-12));
            }
            for m in rho_sq_mixed(&mu, &nu, &pts, &ctx).unwrap() {
                assert!(m[0][0].abs() <= 2.0 * w.c2() * w.ctx().basis_norm() * r * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn hessian_kernel_is_measure_independent_and_symmetric() {
        let ctx = TorusContext::new(2, 6).unwrap();
        let a = EmpiricalMeasure::new(2, vec![0.1, 0.2, 3.0, 4.0]).unwrap();
        let b = EmpiricalMeasure::new(2, vec![1.0, 5.0]).unwrap();
        let pairs = vec![(vec![0.3, 1.0], vec![2.0, 5.5])];
        let h1 = rho_sq_hess(&a, &b, &pairs, &ctx).unwrap();
        let h2 = rho_sq_hess(&b, &b, &pairs, &ctx).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1[0][0][1], h1[0][1][0]);
        let swapped = vec![(pairs[0].1.clone(), pairs[0].0.clone())];
        let h3 = rho_sq_hess(&a, &b, &swapped, &ctx).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h1[0][i][j] - h3[0][j][i]).abs() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn rho_is_a_pseudometric(a in prop::collection::vec(0.0f64..TWO_PI, 1..8),
                                 b in prop::collection::vec(0.0f64..TWO_PI, 1..8),
                                 c in prop::collection::vec(0.0f64..TWO_PI, 1..8)) {
            let ctx = ctx1(32);
            let (x, y, z) = (circle(&a), circle(&b), circle(&c));
            let xy = rho_star(&x, &y, &ctx).unwrap();
            let yx = rho_star(&y, &x, &ctx).unwrap();
            prop_assert_eq!(xy, yx);
            prop_assert!(xy <= rho_star(&x, &z, &ctx).unwrap() + rho_star(&z, &y, &ctx).unwrap() + 1e-9);
        }
    }
}
