//! Rate reports: JSON with full provenance and a CSV table.

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentPlan;
use super::fit::RateFit;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub alpha_cbrt: f64,
    /// Largest `|v^N(t,x) - v(t,μ^x)|` over the sampled `(t, x)`.
    pub sup_error: f64,
    /// Largest Monte Carlo standard error among the samples.
    pub mc_std: f64,
    /// `3·(mc_std + reference std) + reference bias budget`.
    pub noise_budget: f64,
    /// Flags such as non-monotonicity beyond the noise budget; empty if clean.
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// The executed plan (surrogate size resolved): seeds and budgets.
    pub plan: ExperimentPlan,
    /// Sorted by `N`.
    pub rows: Vec<RateRow>,
    /// `log sup_error ≈ log C + β log α(N)`.
    pub fit: RateFit,
    /// Envelope constant: `sup_error ≤ c_fit · α^β` on every row.
    pub c_fit: f64,
    /// `sup_error ≤ c_fit · α^{1/3} + noise_budget` on every row.
    pub bound_holds: bool,
    /// Truncation tail bound of `ρ_*` in the problem's context.
    pub truncation_tail: f64,
    pub software: String,
}

impl RateReport {
    /// CSV columns `N,alpha,alpha_cbrt,sup_error,mc_std,notes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,alpha,alpha_cbrt,sup_error,mc_std,notes\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.n,
                r.alpha,
                r.alpha_cbrt,
                r.sup_error,
                r.mc_std,
                csv_field(&r.notes)
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
