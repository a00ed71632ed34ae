//! Numerical checks of the regularity bounds of Lemma 2.4 on FD solutions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fd::GridValueFunction;
use crate::error::Result;
use crate::rng;
use crate::torus::EmpiricalMeasure;
use crate::transport::w1_circle;

/// Node pairs sampled for the `W_1`-Lipschitz constant.
const W1_PAIRS: usize = 4096;
/// Time slices used for the Hölder estimate.
const HOLDER_SLICES: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub n: usize,
    pub mesh: usize,
    /// `max_{t,x,i} N |D_{x^i} v^N(t,x)|` by central differences.
    pub n_grad_max: f64,
    /// `max |v^N(t,x) - v^N(s,x)| / √|t-s|` over stored slice pairs.
    pub time_holder: f64,
    /// `max |v^N(t,x) - v^N(t,y)| / W_1(μ^x, μ^y)` over sampled node pairs.
    pub w1_lipschitz: f64,
}

pub fn lipschitz_probe(v: &GridValueFunction) -> Result<LipschitzReport> {
    let (n, m) = (v.n(), v.mesh());
    let h = v.spacing();
    let states = v.states();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * m;
    }

    let mut grad: f64 = 0.0;
    for j in 0..=v.n_t() {
        let s = v.slice(j);
        for idx in 0..states {
            let digits = v.digits(idx);
            for i in 0..n {
                let st = strides[i];
                let up = if digits[i] + 1 == m { idx + st - m * st } else { idx + st };
                let dn = if digits[i] == 0 { idx + (m - 1) * st } else { idx - st };
                grad = grad.max((s[up] - s[dn]).abs() / (2.0 * h));
            }
        }
    }

    let picks: Vec<usize> = if v.n_t() < HOLDER_SLICES {
        (0..=v.n_t()).collect()
    } else {
        let mut p: Vec<usize> = (0..HOLDER_SLICES).map(|k| k * v.n_t() / (HOLDER_SLICES - 1)).collect();
        p.dedup();
        p
    };
    let mut holder: f64 = 0.0;
    for (a, &ja) in picks.iter().enumerate() {
        for &jb in &picks[a + 1..] {
            let dt = (v.time(jb) - v.time(ja)).sqrt();
            let (sa, sb) = (v.slice(ja), v.slice(jb));
            for idx in 0..states {
                holder = holder.max((sa[idx] - sb[idx]).abs() / dt);
            }
        }
    }

    let mut r = rng::stream(0x11b5, 0);
    let mut w1lip: f64 = 0.0;
    for j in [0, v.n_t() / 2] {
        let s = v.slice(j);
        for _ in 0..W1_PAIRS {
            let (p, q) = (r.random_range(0..states), r.random_range(0..states));
            let w = w1_circle(&EmpiricalMeasure::on_circle(&v.node(p))?, &EmpiricalMeasure::on_circle(&v.node(q))?)?;
            if w > 1e-12 {
                w1lip = w1lip.max((s[p] - s[q]).abs() / w);
            }
        }
    }

    Ok(LipschitzReport { n, mesh: m, n_grad_max: n as f64 * grad, time_holder: holder, w1_lipschitz: w1lip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::fd::{fd_solve, required_steps};
    use crate::hjb::problem::{benchmarks, HamiltonianSpec, ProblemSpec, TerminalSpec, TrigPoly};

    #[test]
    fn constant_solution_has_zero_constants() {
        let p = ProblemSpec::new(
            HamiltonianSpec::zero(),
            TerminalSpec { g: TrigPoly::constant(1.0), h: TrigPoly::zero() },
            0.0,
            1.0,
        )
        .unwrap();
        let v = fd_solve(&p, 2, 8, required_steps(&p, 2, 8).unwrap()).unwrap();
        let r = lipschitz_probe(&v).unwrap();
        assert_eq!((r.n_grad_max, r.time_holder, r.w1_lipschitz), (0.0, 0.0, 0.0));
    }

    #[test]
    fn null_gradient_constant_is_uniform_in_n() {
        // N D_i v = -e^{-τ} sin x^i, so N max|D_i v| ≈ 1 for every N.
        let p = benchmarks::null(0.0);
        for n in 1..=3 {
            let mesh = 24;
            let v = fd_solve(&p, n, mesh, required_steps(&p, n, mesh).unwrap()).unwrap();
            let r = lipschitz_probe(&v).unwrap();
            assert!((r.n_grad_max - 1.0).abs() < 0.02, "N={n}: {}", r.n_grad_max);
            assert!(r.w1_lipschitz <= 1.0 + 1e-9);
        }
    }
}
