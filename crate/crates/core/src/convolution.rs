//! Inf-convolution `V̄^{N,ε}` of a grid value function and sup-convolution
//! `Φ^ε` of a test function in the `ρ_*` geometry (paper §3), d = 1.
//!
//! The search set is `time nodes × shift nodes × mesh^N`:
//!
//! * time node `s_i = T i/(n_s-1)`, evaluated by linear interpolation between
//!   the stored FD slices (exact integer position arithmetic);
//! * shift node `w_k = 2πk/K`; `V^N(s,w,x) = v^N(s, x + w·1)` is evaluated by
//!   linear interpolation along the diagonal between `x + ⌊w/h⌋·1` and the
//!   next diagonal node, so mesh-aligned shifts are exact lookups;
//! * configuration nodes are the FD mesh.
//!
//! The minimum is exact over that set. Pruning only discards candidates whose
//! floating-point lower bound strictly exceeds the incumbent. The time and shift
//! windows `|s - t| ≤ 2εL_t + δ_t` and `|w - z| ≤ 2εL_w + δ_w` come from the exact
//! Lipschitz constants of the interpolant. Ties are broken by the smallest
//! `(s, w, lexicographic x)`.

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::GridValueFunction;
use crate::rate::fit::loglog_slope;
use crate::sobolev::{alpha_rate, rho_star};
use crate::torus::{arc_distance, fourier_coefficients, wrap, EmpiricalMeasure, Measure, TorusContext, TWO_PI};

pub const DEFAULT_TIME_NODES: usize = 33;
pub const DEFAULT_SHIFT_NODES: usize = 64;
/// Fourier truncation of the `ρ_*` penalty; the neglected tail is below 1e-9.
pub const DEFAULT_TRUNC: usize = 32;
/// Configurations per parallel block; the incumbent is shared between blocks.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionConfig {
    pub epsilon: f64,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    #[serde(default = "default_shift_nodes")]
    pub shift_nodes: usize,
    #[serde(default = "default_ctx")]
    pub ctx: TorusContext,
}

fn default_time_nodes() -> usize {
    DEFAULT_TIME_NODES
}

fn default_shift_nodes() -> usize {
    DEFAULT_SHIFT_NODES
}

fn default_ctx() -> TorusContext {
    TorusContext::new(1, DEFAULT_TRUNC).expect("valid default context")
}

impl ConvolutionConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = ConvolutionConfig {
            epsilon,
            time_nodes: DEFAULT_TIME_NODES,
            shift_nodes: DEFAULT_SHIFT_NODES,
            ctx: default_ctx(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_grid(self, time_nodes: usize, shift_nodes: usize) -> Result<Self> {
        let cfg = ConvolutionConfig { time_nodes, shift_nodes, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        let cfg = ConvolutionConfig { epsilon, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        check_grid(self.time_nodes, self.shift_nodes)?;
        if self.ctx.d() != 1 {
            return Err(Error::UnsupportedDimension { d: self.ctx.d(), hint: "convolutions are implemented for d=1" });
        }
        Ok(())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    Ok(())
}

fn check_grid(time_nodes: usize, shift_nodes: usize) -> Result<()> {
    if time_nodes < 2 || shift_nodes == 0 {
        return Err(Error::config(format!(
            "empty search grid: need at least 2 time nodes and 1 shift node, got {time_nodes} and {shift_nodes}"
        )));
    }
    Ok(())
}

/// Evaluation point `(t, z, μ)` of `V̄^{N,ε}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub t: f64,
    pub z: f64,
    pub mu: Measure,
}

/// Minimizing tuple and its gaps to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgminRecord {
    pub s0: f64,
    pub w0: f64,
    pub x0: Vec<f64>,
    /// `|t - s0|`.
    pub t_gap: f64,
    /// Arc distance between `z` and `w0`.
    pub z_gap: f64,
    /// `ρ_*(μ^{x0}, μ)` in the configured context.
    pub rho_gap: f64,
}

/// Search-grid resolution and the resulting discretization bound of the inf:
/// `L_t Δs/2 + L_w Δw/2 + L_x h √N / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub time_step: f64,
    pub shift_step: f64,
    pub mesh_step: f64,
    pub lip_t: f64,
    pub lip_w: f64,
    pub lip_x: f64,
    pub error_bound: f64,
}

/// Precomputed search structure for one grid value function.
pub struct InfConvolver<'a> {
    v: &'a GridValueFunction,
    ctx: TorusContext,
    time_nodes: usize,
    shift_nodes: usize,
    /// Per time node: lower slice and weight of the upper slice.
    time_cells: Vec<(usize, f64)>,
    /// Per shift node: diagonal offset and interpolation weight.
    shift_cells: Vec<(usize, f64)>,
    /// `(1+l²)^{-k_*}` for `l = 1..=L`.
    weights: Vec<f64>,
    /// Moments `m_l`, `l = 1..=L`, of every configuration (sorted summation).
    moments: Vec<Complex64>,
    /// Minimum over time of each node value.
    node_min: Vec<f64>,
    vmin: f64,
    resolution: Resolution,
}

impl<'a> InfConvolver<'a> {
    pub fn new(v: &'a GridValueFunction, cfg: &ConvolutionConfig) -> Result<Self> {
        check_grid(cfg.time_nodes, cfg.shift_nodes)?;
        if cfg.ctx.d() != 1 {
            return Err(Error::UnsupportedDimension { d: cfg.ctx.d(), hint: "convolutions are implemented for d=1" });
        }
        let (n, m, n_t) = (v.n(), v.mesh(), v.n_t());
        let states = v.states();
        let denom = cfg.time_nodes - 1;
        let time_cells = (0..cfg.time_nodes)
            .map(|i| {
                let q = i * n_t;
                (q / denom, (q % denom) as f64 / denom as f64)
            })
            .collect();
        let k_nodes = cfg.shift_nodes;
        let shift_cells = (0..k_nodes)
            .map(|k| {
                let q = k * m;
                (q / k_nodes, (q % k_nodes) as f64 / k_nodes as f64)
            })
            .collect();
        let big_l = cfg.ctx.trunc();
        let kk = cfg.ctx.k_star() as i32;
        let weights: Vec<f64> = (1..=big_l).map(|l| (1.0 + (l * l) as f64).powi(-kk)).collect();

        let h = v.spacing();
        let moments_of = |idx: usize| -> Vec<Complex64> {
            let mut digits = v.digits(idx);
            digits.sort_unstable();
            let xs: Vec<f64> = digits.iter().map(|&j| j as f64 * h).collect();
            circle_moments(&xs, big_l)
        };
        #[cfg(feature = "parallel")]
        let per_state: Vec<Vec<Complex64>> = (0..states).into_par_iter().map(moments_of).collect();
        #[cfg(not(feature = "parallel"))]
        let per_state: Vec<Vec<Complex64>> = (0..states).map(moments_of).collect();
        let moments = per_state.concat();

        let mut node_min = v.slice(0).to_vec();
        for j in 1..=n_t {
            for (a, &b) in node_min.iter_mut().zip(v.slice(j)) {
                *a = a.min(b);
            }
        }
        let vmin = node_min.iter().cloned().fold(f64::INFINITY, f64::min);

        // exact Lipschitz constants of the interpolant
        let dt_slice = v.horizon / n_t as f64;
        let mut lip_t = 0.0f64;
        for j in 0..n_t {
            for (a, b) in v.slice(j).iter().zip(v.slice(j + 1)) {
                lip_t = lip_t.max((b - a).abs() / dt_slice);
            }
        }
        let mut lip_w = 0.0f64;
        let mut lip_x = 0.0f64;
        for idx in 0..states {
            let digits = v.digits(idx);
            let diag = v.index(&digits.iter().map(|&d| d + 1).collect::<Vec<_>>());
            let axes: Vec<usize> = (0..n)
                .map(|p| {
                    let mut d = digits.clone();
                    d[p] += 1;
                    v.index(&d)
                })
                .collect();
            for j in 0..=n_t {
                let s = v.slice(j);
                lip_w = lip_w.max((s[diag] - s[idx]).abs() / h);
                for &a in &axes {
                    lip_x = lip_x.max((s[a] - s[idx]).abs() / h);
                }
            }
        }
        let time_step = v.horizon / denom as f64;
        let shift_step = TWO_PI / k_nodes as f64;
        let resolution = Resolution {
            time_step,
            shift_step,
            mesh_step: h,
            lip_t,
            lip_w,
            lip_x,
            error_bound: 0.5 * (lip_t * time_step + lip_w * shift_step + lip_x * h * (n as f64).sqrt()),
        };
        Ok(InfConvolver {
            v,
            ctx: cfg.ctx,
            time_nodes: cfg.time_nodes,
            shift_nodes: cfg.shift_nodes,
            time_cells,
            shift_cells,
            weights,
            moments,
            node_min,
            vmin,
            resolution,
        })
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn time_node(&self, i: usize) -> f64 {
        self.v.horizon * i as f64 / (self.time_nodes - 1) as f64
    }

    pub fn shift_node(&self, k: usize) -> f64 {
        TWO_PI * k as f64 / self.shift_nodes as f64
    }

    /// Node indices `x + k·1`, `k = 0..mesh`.
    fn orbit(&self, idx: usize) -> Vec<usize> {
        let digits = self.v.digits(idx);
        (0..self.v.mesh()).map(|k| self.v.index(&digits.iter().map(|&d| d + k).collect::<Vec<_>>())).collect()
    }

    /// `V^N(s_i, w_k, x)` for the configuration with diagonal orbit `orbit`.
    #[inline]
    fn eval(&self, i: usize, k: usize, orbit: &[usize]) -> f64 {
        let (j, lam) = self.time_cells[i];
        let (kk, th) = self.shift_cells[k];
        let m = orbit.len();
        let at = |jj: usize| {
            let s = self.v.slice(jj);
            let a = s[orbit[kk]];
            if th == 0.0 {
                a
            } else {
                (1.0 - th) * a + th * s[orbit[(kk + 1) % m]]
            }
        };
        if lam == 0.0 {
            at(j)
        } else {
            (1.0 - lam) * at(j) + lam * at(j + 1)
        }
    }

    /// Grid value `V^N(s_i, w_k, x)`, public for oracles and tests.
    pub fn grid_value(&self, i: usize, k: usize, idx: usize) -> f64 {
        self.eval(i, k, &self.orbit(idx))
    }

    fn target_moments(&self, mu: &Measure) -> Result<Vec<Complex64>> {
        let big_l = self.ctx.trunc();
        match mu {
            Measure::Empirical(e) => {
                if e.d() != 1 {
                    return Err(Error::domain(format!("target measure has d={}, expected 1", e.d())));
                }
                let mut xs = e.coords().to_vec();
                xs.sort_by(f64::total_cmp);
                Ok(circle_moments(&xs, big_l))
            }
            Measure::Grid(_) => {
                let f = fourier_coefficients(mu, &self.ctx)?;
                let scale = 1.0 / self.ctx.basis_norm();
                Ok((1..=big_l as i64).map(|l| f.get(&[l]).expect("retained mode") * scale).collect())
            }
        }
    }

    /// `ρ²` of every configuration against the target, from moments.
    fn rho_sq_all(&self, tm: &[Complex64]) -> Vec<f64> {
        let big_l = self.weights.len();
        let f = |idx: usize| moments_dist_sq(&self.moments[idx * big_l..(idx + 1) * big_l], tm, &self.weights);
        #[cfg(feature = "parallel")]
        return (0..self.v.states()).into_par_iter().map(f).collect();
        #[cfg(not(feature = "parallel"))]
        return (0..self.v.states()).map(f).collect();
    }

    fn check_target(&self, target: &Target) -> Result<()> {
        if !(target.t.is_finite() && (0.0..=self.v.horizon).contains(&target.t)) {
            return Err(Error::domain(format!("target time {} outside [0, {}]", target.t, self.v.horizon)));
        }
        if !target.z.is_finite() {
            return Err(Error::domain("target shift must be finite"));
        }
        if target.mu.d() != 1 {
            return Err(Error::domain("target measure must live on the circle"));
        }
        Ok(())
    }

    fn penalties(&self, target: &Target, epsilon: f64) -> Result<Penalties> {
        check_epsilon(epsilon)?;
        self.check_target(target)?;
        let two_eps = 2.0 * epsilon;
        let tm = self.target_moments(&target.mu)?;
        let p_s = (0..self.time_nodes).map(|i| (target.t - self.time_node(i)).powi(2) / two_eps).collect();
        let p_w = (0..self.shift_nodes).map(|k| arc_distance(target.z, self.shift_node(k)).powi(2) / two_eps).collect();
        let p_x = self.rho_sq_all(&tm).into_iter().map(|r| r / two_eps).collect();
        Ok(Penalties { p_s, p_w, p_x })
    }

    /// Exact minimum over the search set with deterministic tie-breaking.
    pub fn inf_convolve(&self, target: &Target, epsilon: f64) -> Result<(f64, ArgminRecord)> {
        let pen = self.penalties(target, epsilon)?;
        let slack = |r: f64| r * (1.0 + 1e-9) + 1e-12;
        let near_t = (0..self.time_nodes).map(|i| (target.t - self.time_node(i)).abs()).fold(f64::INFINITY, f64::min);
        let rad_t = slack(2.0 * epsilon * self.resolution.lip_t + near_t);
        let s_cands: Vec<usize> =
            (0..self.time_nodes).filter(|&i| (target.t - self.time_node(i)).abs() <= rad_t).collect();
        let near_w =
            (0..self.shift_nodes).map(|k| arc_distance(target.z, self.shift_node(k))).fold(f64::INFINITY, f64::min);
        let rad_w = slack(2.0 * epsilon * self.resolution.lip_w + near_w);
        let w_cands: Vec<usize> =
            (0..self.shift_nodes).filter(|&k| arc_distance(target.z, self.shift_node(k)) <= rad_w).collect();

        let mut order: Vec<usize> = (0..self.v.states()).collect();
        order.sort_by(|&a, &b| pen.p_x[a].total_cmp(&pen.p_x[b]).then(a.cmp(&b)));

        let mut best = Best::none();
        for block in order.chunks(BLOCK) {
            if self.vmin + pen.p_x[block[0]] > best.value {
                break;
            }
            let scan = |&idx: &usize| self.scan_config(idx, &s_cands, &w_cands, &pen, best);
            #[cfg(feature = "parallel")]
            let found: Vec<Best> = block.par_iter().map(scan).collect();
            #[cfg(not(feature = "parallel"))]
            let found: Vec<Best> = block.iter().map(scan).collect();
            for b in found {
                best = best.merge(b);
            }
        }
        let key = best.key.ok_or_else(|| Error::Internal("inf-convolution search found no candidate".into()))?;
        Ok((best.value, self.record(target, key)?))
    }

    fn scan_config(&self, idx: usize, s_cands: &[usize], w_cands: &[usize], pen: &Penalties, start: Best) -> Best {
        let r = pen.p_x[idx];
        let mut best = start;
        let orbit = self.orbit(idx);
        let vmin_x = orbit.iter().map(|&o| self.node_min[o]).fold(f64::INFINITY, f64::min);
        if vmin_x + r > best.value {
            return best;
        }
        for &i in s_cands {
            let base = vmin_x + pen.p_s[i];
            if base + r > best.value {
                continue;
            }
            for &k in w_cands {
                if (base + pen.p_w[k]) + r > best.value {
                    continue;
                }
                let val = ((self.eval(i, k, &orbit) + pen.p_s[i]) + pen.p_w[k]) + r;
                best = best.merge(Best { value: val, key: Some((i, k, idx)) });
            }
        }
        best
    }

    /// Unpruned scan of the full search set; the reference oracle for tests.
    pub fn brute_force(&self, target: &Target, epsilon: f64) -> Result<(f64, ArgminRecord)> {
        let pen = self.penalties(target, epsilon)?;
        let mut best = Best::none();
        for idx in 0..self.v.states() {
            let orbit = self.orbit(idx);
            for i in 0..self.time_nodes {
                for k in 0..self.shift_nodes {
                    let val = ((self.eval(i, k, &orbit) + pen.p_s[i]) + pen.p_w[k]) + pen.p_x[idx];
                    best = best.merge(Best { value: val, key: Some((i, k, idx)) });
                }
            }
        }
        let key = best.key.ok_or_else(|| Error::Internal("empty search set".into()))?;
        Ok((best.value, self.record(target, key)?))
    }

    fn record(&self, target: &Target, (i, k, idx): (usize, usize, usize)) -> Result<ArgminRecord> {
        let s0 = self.time_node(i);
        let w0 = self.shift_node(k);
        let x0 = self.v.node(idx);
        let rho_gap = rho_star(&EmpiricalMeasure::on_circle(&x0)?, &target.mu, &self.ctx)?;
        Ok(ArgminRecord { s0, w0, t_gap: (target.t - s0).abs(), z_gap: arc_distance(target.z, w0), rho_gap, x0 })
    }
}

struct Penalties {
    p_s: Vec<f64>,
    p_w: Vec<f64>,
    p_x: Vec<f64>,
}

/// Incumbent `(value, (s index, w index, flat x index))`.
#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    key: Option<(usize, usize, usize)>,
}

impl Best {
    fn none() -> Self {
        Best { value: f64::INFINITY, key: None }
    }

    fn merge(self, other: Best) -> Best {
        match (self.key, other.key) {
            (None, _) => other,
            (_, None) => self,
            (Some(a), Some(b)) => {
                if other.value < self.value || (other.value == self.value && b < a) {
                    other
                } else {
                    self
                }
            }
        }
    }
}

/// `m_l = (1/n) Σ e^{-ilx}` for `l = 1..=big_l`, summed in the given order.
fn circle_moments(xs: &[f64], big_l: usize) -> Vec<Complex64> {
    let inv = 1.0 / xs.len() as f64;
    (1..=big_l)
        .map(|l| {
            let s: Complex64 = xs
                .iter()
                .map(|&x| {
                    let (sn, cs) = (l as f64 * x).sin_cos();
                    Complex64::new(cs, -sn)
                })
                .sum();
            s * inv
        })
        .collect()
}

/// `ρ²` from positive-mode moments: `(1/π) Σ_{l≥1} w_l |Δm_l|²`
/// (conjugate symmetry, `F_l = m_l/√(2π)`, and `Δm_0 = 0`).
fn moments_dist_sq(a: &[Complex64], b: &[Complex64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| w * (x - y).norm_sqr()).sum::<f64>() / std::f64::consts::PI
}

/// One-shot `V̄^{N,ε}(t, z, μ)` and its minimizer.
pub fn inf_convolve(v: &GridValueFunction, target: &Target, cfg: &ConvolutionConfig) -> Result<(f64, ArgminRecord)> {
    cfg.validate()?;
    InfConvolver::new(v, cfg)?.inf_convolve(target, cfg.epsilon)
}

/// Sup-convolution `Φ^ε` of a test function sampled on the shift grid at `(t₀, ·, μ₀)`.
pub struct SupConvolution {
    t0: f64,
    phi: Vec<f64>,
    mu0: Vec<Complex64>,
    weights: Vec<f64>,
}

impl SupConvolution {
    pub fn new(phi: impl Fn(f64) -> f64, t0: f64, mu0: &Measure, cfg: &ConvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        if mu0.d() != 1 {
            return Err(Error::domain("μ₀ must live on the circle"));
        }
        let k_nodes = cfg.shift_nodes;
        let phi: Vec<f64> = (0..k_nodes).map(|k| phi(TWO_PI * k as f64 / k_nodes as f64)).collect();
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("Φ must be finite on the shift grid"));
        }
        let big_l = cfg.ctx.trunc();
        let mu0 = match mu0 {
            Measure::Empirical(e) => {
                let mut xs = e.coords().to_vec();
                xs.sort_by(f64::total_cmp);
                circle_moments(&xs, big_l)
            }
            Measure::Grid(_) => {
                let f = fourier_coefficients(mu0, &cfg.ctx)?;
                let scale = 1.0 / cfg.ctx.basis_norm();
                (1..=big_l as i64).map(|l| f.get(&[l]).expect("retained mode") * scale).collect()
            }
        };
        let kk = cfg.ctx.k_star() as i32;
        let weights = (1..=big_l).map(|l| (1.0 + (l * l) as f64).powi(-kk)).collect();
        Ok(SupConvolution { t0, phi, mu0, weights })
    }

    pub fn shift_node(&self, k: usize) -> f64 {
        TWO_PI * k as f64 / self.phi.len() as f64
    }

    /// `max_k {Φ(t₀, z_k, μ₀) - |w - z_k|²/(2ε)}` with the torus arc distance.
    pub fn envelope(&self, w: f64, epsilon: f64) -> f64 {
        let two_eps = 2.0 * epsilon;
        self.phi
            .iter()
            .enumerate()
            .map(|(k, p)| p - arc_distance(w, self.shift_node(k)).powi(2) / two_eps)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Φ^ε(s, w, x)`.
    pub fn eval(&self, s: f64, w: f64, atoms: &EmpiricalMeasure, epsilon: f64) -> Result<f64> {
        check_epsilon(epsilon)?;
        if atoms.d() != 1 || !s.is_finite() || !w.is_finite() {
            return Err(Error::domain("sup-convolution needs finite s, w and atoms on the circle"));
        }
        let mut xs = atoms.coords().to_vec();
        xs.sort_by(f64::total_cmp);
        let rho_sq = moments_dist_sq(&circle_moments(&xs, self.weights.len()), &self.mu0, &self.weights);
        let two_eps = 2.0 * epsilon;
        Ok(self.envelope(wrap(w), epsilon) - (s - self.t0).powi(2) / two_eps - rho_sq / two_eps)
    }
}

/// One-shot `Φ^ε(s, w, x)`.
pub fn sup_convolve_testfn(
    phi: impl Fn(f64) -> f64,
    t0: f64,
    mu0: &Measure,
    s: f64,
    w: f64,
    atoms: &EmpiricalMeasure,
    cfg: &ConvolutionConfig,
) -> Result<f64> {
    SupConvolution::new(phi, t0, mu0, cfg)?.eval(s, w, atoms, cfg.epsilon)
}

/// Maxima of the argmin gaps at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub epsilon: f64,
    pub t_gap: f64,
    pub z_gap: f64,
    pub rho_gap: f64,
    /// `ε + α(N) + √(εα(N))`, the Lemma 3.3 scale of the `ρ_*` gap.
    pub rho_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTable {
    pub n: usize,
    pub alpha: f64,
    pub rows: Vec<GapRow>,
    /// Log–log slopes of each gap column against `ε`; `None` when a column has zeros.
    pub t_slope: Option<f64>,
    pub z_slope: Option<f64>,
    pub rho_slope: Option<f64>,
    /// Smallest `C` with `ρ gap ≤ C (ε + α + √(εα))` on every row.
    pub rho_constant: f64,
    pub resolution: Resolution,
}

impl GapTable {
    /// CSV with header `epsilon,t_gap,z_gap,rho_gap,fit_slope`. Data rows
    /// leave `fit_slope` empty. A trailing `fit` row carries the fitted
    /// log–log slope of each gap column (`nan` if undefined).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,t_gap,z_gap,rho_gap,fit_slope\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:e},{:e},\n", r.epsilon, r.t_gap, r.z_gap, r.rho_gap));
        }
        let f = |s: Option<f64>| s.map_or("nan".to_string(), |v| format!("{v:.6}"));
        out.push_str(&format!("fit,{},{},{},\n", f(self.t_slope), f(self.z_slope), f(self.rho_slope)));
        out
    }
}

/// Runs `inf_convolve` for every `(ε, target)` and fits the gap exponents.
pub fn gap_scaling_probe(
    v: &GridValueFunction,
    targets: &[Target],
    eps_list: &[f64],
    cfg: &ConvolutionConfig,
) -> Result<GapTable> {
    if eps_list.len() < 3 {
        return Err(Error::Fit(format!("gap scaling needs at least 3 epsilon values, got {}", eps_list.len())));
    }
    if targets.is_empty() {
        return Err(Error::domain("gap scaling needs at least one target"));
    }
    for &e in eps_list {
        check_epsilon(e)?;
    }
    let conv = InfConvolver::new(v, cfg)?;
    let alpha = alpha_rate(v.n(), 1)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &epsilon in eps_list {
        let mut row = GapRow { epsilon, t_gap: 0.0, z_gap: 0.0, rho_gap: 0.0, rho_scale: 0.0 };
        for target in targets {
            let (_, rec) = conv.inf_convolve(target, epsilon)?;
            row.t_gap = row.t_gap.max(rec.t_gap);
            row.z_gap = row.z_gap.max(rec.z_gap);
            row.rho_gap = row.rho_gap.max(rec.rho_gap);
        }
        row.rho_scale = epsilon + alpha + (epsilon * alpha).sqrt();
        log::debug!("gap probe eps={epsilon}: t={} z={} rho={}", row.t_gap, row.z_gap, row.rho_gap);
        rows.push(row);
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let slope = |col: fn(&GapRow) -> f64| -> Result<Option<f64>> {
        let ys: Vec<f64> = rows.iter().map(col).collect();
        if ys.iter().any(|&y| y <= 0.0) {
            return Ok(None);
        }
        loglog_slope(&eps, &ys).map(Some)
    };
    let rho_constant = rows.iter().map(|r| r.rho_gap / r.rho_scale).fold(0.0, f64::max);
    Ok(GapTable {
        n: v.n(),
        alpha,
        t_slope: slope(|r| r.t_gap)?,
        z_slope: slope(|r| r.z_gap)?,
        rho_slope: slope(|r| r.rho_gap)?,
        rows,
        rho_constant,
        resolution: conv.resolution(),
    })
}
