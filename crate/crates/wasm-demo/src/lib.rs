//! Browser bindings for three lab operations. Every function takes and
//! returns JSON strings, so the same code is exercised by native tests.
//! Failures come back as `{"error": "..."}`.
//!
//! * [`metric_explorer`]: `ρ_{-k}`, `W_1` and the comparison constant for two atom lists;
//! * [`mean_field_curve`]: `t ↦ v(t, μ)` from the Fokker–Planck reference;
//! * [`sample_complexity`]: `E[W_1]` and `E[ρ_*]` of i.i.d. uniform samples.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use mfrl_core::hjb::{benchmarks, mean_field_values, FpConfig};
use mfrl_core::rate::sample_complexity_experiment;
use mfrl_core::sobolev::{rho, truncation_tail_bound, MetricOrder, MetricWeights};
use mfrl_core::torus::{EmpiricalMeasure, GridDensity, Measure, TorusContext};
use mfrl_core::transport::w1_circle;

fn respond<T: Serialize>(result: mfrl_core::Result<T>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse_atoms(text: &str) -> mfrl_core::Result<EmpiricalMeasure> {
    let xs: Vec<f64> = serde_json::from_str(text)?;
    EmpiricalMeasure::on_circle(&xs)
}

/// `ρ_{-order}` and `W_1` between two atom lists (JSON arrays of angles).
#[wasm_bindgen]
pub fn metric_explorer(mu_atoms: &str, nu_atoms: &str, order: u32, trunc: usize) -> String {
    respond((|| {
        let (mu, nu) = (parse_atoms(mu_atoms)?, parse_atoms(nu_atoms)?);
        let ctx = TorusContext::new(1, trunc)?;
        let order = MetricOrder::new(order)?;
        let r = rho(&mu, &nu, order, &ctx)?;
        let w1 = w1_circle(&mu, &nu)?;
        let c = MetricWeights::new(&ctx, order).w1_comparison_constant();
        Ok(json!({
            "rho": r,
            "w1": w1,
            "comparison_constant": c,
            "rho_over_w1": if w1 > 0.0 { r / w1 } else { 0.0 },
            "truncation_tail": truncation_tail_bound(&ctx, order),
        }))
    })())
}

/// `v(t, μ)` at `points + 1` equally spaced times for a named benchmark.
#[wasm_bindgen]
pub fn mean_field_curve(benchmark: &str, a: f64, atoms: &str, points: usize) -> String {
    respond((|| {
        let problem = benchmarks::by_name(benchmark, a)?;
        let mu = if atoms.trim().is_empty() {
            Measure::Grid(GridDensity::uniform(256)?)
        } else {
            Measure::Empirical(parse_atoms(atoms)?)
        };
        let points = points.clamp(1, 400);
        let times: Vec<f64> = (0..=points).map(|j| problem.horizon * j as f64 / points as f64).collect();
        let taus: Vec<f64> = times.iter().map(|t| problem.horizon - t).collect();
        let values = mean_field_values(&problem, &mu, &taus, &FpConfig::default())?;
        Ok(json!({ "times": times, "values": values }))
    })())
}

/// Sample complexity for the uniform law (JSON array of sample sizes).
#[wasm_bindgen]
pub fn sample_complexity(n_list: &str, n_trials: usize, seed: u32) -> String {
    respond((|| {
        let ns: Vec<usize> = serde_json::from_str(n_list)?;
        let mu = GridDensity::uniform(256)?;
        sample_complexity_experiment(&mu, &ns, n_trials, seed as u64, &TorusContext::new(1, 32)?)
    })())
}
