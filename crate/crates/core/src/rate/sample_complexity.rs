//! Lemma 2.8: `E[W_1(μ̂^N, μ)]` and `E[ρ_*(μ̂^N, μ)]` for i.i.d. samples.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::loglog_slope;
use crate::error::{Error, Result};
use crate::hjb::McEstimate;
use crate::rng;
use crate::sobolev::MetricWeights;
use crate::torus::{fourier_coefficients, sample_iid, FourierMeasure, GridDensity, Measure, TorusContext};
use crate::transport::w1_circle_cdf;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub w1_mean: f64,
    pub w1_std_error: f64,
    pub rho_mean: f64,
    pub rho_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTable {
    pub rows: Vec<ComplexityRow>,
    /// Log–log slope of `E[W_1]` against `N`; `None` if some mean is 0 or fewer than 3 rows.
    pub w1_slope: Option<f64>,
    pub rho_slope: Option<f64>,
    /// Largest per-trial ratio `ρ_* / W_1` (trials with `W_1 = 0` have `ρ_* = 0` too).
    pub max_rho_over_w1: f64,
    /// Theoretical `C` with `ρ_* ≤ C W_1`.
    pub comparison_constant: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl ComplexityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,w1_mean,w1_std_error,rho_mean,rho_std_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.n, r.w1_mean, r.w1_std_error, r.rho_mean, r.rho_std_error
            ));
        }
        out
    }
}

/// Monte Carlo means over `n_trials` i.i.d. samples of size `N` for each `N`.
pub fn sample_complexity_experiment(
    mu: &GridDensity,
    n_list: &[usize],
    n_trials: usize,
    seed: u64,
    ctx: &TorusContext,
) -> Result<ComplexityTable> {
    if n_trials < MIN_TRIALS {
        return Err(Error::domain(format!("need at least {MIN_TRIALS} trials, got {n_trials}")));
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::domain("N_list must be nonempty with positive entries"));
    }
    if ctx.d() != 1 {
        return Err(Error::UnsupportedDimension { d: ctx.d(), hint: "exact W_1 is d=1" });
    }
    let weights = MetricWeights::star(ctx);
    let target = fourier_coefficients(mu, ctx)?;
    let grid = Measure::Grid(mu.clone());
    let mut rows = Vec::with_capacity(n_list.len());
    let mut max_ratio = 0.0f64;
    for &n in n_list {
        let n_seed = rng::child_seed(seed, n as u64);
        let trial = |k: usize| -> Result<(f64, f64)> {
            let sample = sample_iid(mu, n, rng::child_seed(n_seed, k as u64))?;
            let f = sample.fourier(ctx)?;
            let rho = weights.dist_sq(&f, &target)?.max(0.0).sqrt();
            let w1 = w1_circle_cdf(&Measure::Empirical(sample), &grid)?;
            Ok((w1, rho))
        };
        #[cfg(feature = "parallel")]
        let pairs: Vec<(f64, f64)> = (0..n_trials).into_par_iter().map(trial).collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let pairs: Vec<(f64, f64)> = (0..n_trials).map(trial).collect::<Result<_>>()?;
        for &(w1, rho) in &pairs {
            if w1 > 0.0 {
                max_ratio = max_ratio.max(rho / w1);
            }
        }
        let w1 = McEstimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>(), seed);
        let rho = McEstimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>(), seed);
        rows.push(ComplexityRow {
            n,
            w1_mean: w1.mean,
            w1_std_error: w1.std_error,
            rho_mean: rho.mean,
            rho_std_error: rho.std_error,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let slope = |ys: Vec<f64>| -> Option<f64> {
        if ys.len() < 3 || ys.iter().any(|&y| y <= 0.0) {
            return None;
        }
        loglog_slope(&ns, &ys).ok()
    };
    Ok(ComplexityTable {
        w1_slope: slope(rows.iter().map(|r| r.w1_mean).collect()),
        rho_slope: slope(rows.iter().map(|r| r.rho_mean).collect()),
        rows,
        max_rho_over_w1: max_ratio,
        comparison_constant: weights.w1_comparison_constant(),
        n_trials,
        seed,
    })
}
