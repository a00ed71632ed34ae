//! Ordinary least squares in log–log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log e ≈ log C + β log α` with per-point residuals `log e - (log C + β log α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub beta: f64,
    pub c: f64,
    pub residuals: Vec<f64>,
}

/// Fit `error ≈ C · α^β` to `(α, error)` points.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(a, e)| !(a.is_finite() && e.is_finite() && a > 0.0 && e > 0.0)) {
        return Err(Error::domain("rate fit needs finite positive alpha and error values"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Fit("all alpha values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let log_c = my - beta * mx;
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (log_c + beta * x)).collect();
    Ok(RateFit { beta, c: log_c.exp(), residuals })
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::domain("slope fit needs equally many x and y values"));
    }
    let pts: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
    Ok(fit_rate(&pts)?.beta)
}
