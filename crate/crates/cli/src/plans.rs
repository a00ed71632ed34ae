//! Versioned JSON plan files: a top-level `"version": 1` next to the
//! command payload. Unknown fields are rejected everywhere.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mfrl_core::convolution::{ConvolutionConfig, Target};
use mfrl_core::hjb::{benchmarks, ProblemSpec};
use mfrl_core::torus::{GridDensity, TorusContext};

pub const PLAN_VERSION: u64 = 1;

/// Parse a plan document: check and strip `version`, then decode the payload strictly.
pub fn parse_plan<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value.as_object_mut().ok_or("plan must be a JSON object")?;
    match obj.remove("version") {
        Some(v) if v.as_u64() == Some(PLAN_VERSION) => {}
        Some(v) => return Err(format!("unsupported plan version {v} (expected {PLAN_VERSION})")),
        None => return Err("plan is missing \"version\"".into()),
    }
    serde_json::from_value(value).map_err(|e| format!("plan schema: {e}"))
}

/// Either a full problem specification or a named benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Spec(Box<ProblemSpec>),
    Benchmark {
        name: String,
        #[serde(default)]
        a: f64,
    },
}

impl ProblemSource {
    pub fn resolve(&self) -> mfrl_core::Result<ProblemSpec> {
        match self {
            ProblemSource::Spec(p) => Ok((**p).clone()),
            ProblemSource::Benchmark { name, a } => benchmarks::by_name(name, *a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverPlan {
    /// Finite differences on `mesh^N`; `n_t` defaults to the stable minimum.
    Fd {
        mesh: usize,
        #[serde(default)]
        n_t: Option<usize>,
        #[serde(default)]
        max_slices: Option<usize>,
    },
    /// Monte Carlo estimate of `v^N(t, x)` at one configuration.
    Mc {
        t: f64,
        atoms: Vec<f64>,
        #[serde(default = "default_paths")]
        n_paths: usize,
        #[serde(default = "default_steps")]
        n_steps: usize,
    },
}

fn default_paths() -> usize {
    4096
}

fn default_steps() -> usize {
    mfrl_core::hjb::mc::DEFAULT_STEPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvePlan {
    pub problem: ProblemSource,
    pub n: usize,
    pub solver: SolverPlan,
    #[serde(default)]
    pub seed: u64,
}

/// Gap-scaling probe of the inf-convolution (Lemma 3.3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePlan {
    pub problem: ProblemSource,
    pub n: usize,
    pub mesh: usize,
    #[serde(default = "default_slices")]
    pub max_slices: usize,
    pub eps_list: Vec<f64>,
    pub targets: Vec<Target>,
    #[serde(default)]
    pub time_nodes: Option<usize>,
    #[serde(default)]
    pub shift_nodes: Option<usize>,
    #[serde(default)]
    pub trunc: Option<usize>,
}

fn default_slices() -> usize {
    200
}

impl ProbePlan {
    pub fn config(&self) -> mfrl_core::Result<ConvolutionConfig> {
        let base = ConvolutionConfig::new(self.eps_list.first().copied().unwrap_or(1.0))?;
        let mut cfg =
            base.with_grid(self.time_nodes.unwrap_or(base.time_nodes), self.shift_nodes.unwrap_or(base.shift_nodes))?;
        if let Some(l) = self.trunc {
            cfg.ctx = TorusContext::new(1, l)?;
        }
        Ok(cfg)
    }
}

/// Sample-complexity sweep (Lemma 2.8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityPlan {
    pub density: GridDensitySource,
    pub n_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trunc: Option<usize>,
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridDensitySource {
    Uniform { m: usize },
    Values(Vec<f64>),
}

impl GridDensitySource {
    pub fn resolve(&self) -> mfrl_core::Result<GridDensity> {
        match self {
            GridDensitySource::Uniform { m } => GridDensity::uniform(*m),
            GridDensitySource::Values(v) => GridDensity::new(v.clone()),
        }
    }
}
