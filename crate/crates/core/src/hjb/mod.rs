//! Particle HJB solvers, the mean-field reference and the extension maps.

pub mod extension;
pub mod fd;
pub mod fokker_planck;
pub mod mc;
pub mod probe;
pub mod problem;
pub mod value_file;

use crate::error::Result;
use crate::rng::Stream;

pub use extension::{extend_value, hat_v, FnValue};
pub use fd::{fd_solve, fd_solve_with, FdConfig, GridValueFunction};
pub use fokker_planck::{mean_field_reference, mean_field_values, FpConfig, FpScheme, Reference, ReferenceConfig};
pub use mc::{mc_solve_horizons, mc_solve_linear, McEstimate, McValueFn};
pub use probe::{lipschitz_probe, LipschitzReport};
pub use problem::{benchmarks, HamiltonianFamily, HamiltonianSpec, Moments, ProblemSpec, TerminalSpec, TrigPoly};

/// Access to a particle value function `v^N(t, x)`, `x ∈ T^N` (d=1).
pub trait ValueFn: Sync {
    fn n_particles(&self) -> usize;

    fn horizon(&self) -> f64;

    /// Best available value at `(t, x)`.
    fn value(&self, t: f64, x: &[f64]) -> Result<f64>;

    /// An unbiased draw of `v^N(t, x)`; deterministic accessors return
    /// [`ValueFn::value`], Monte Carlo accessors simulate one path.
    fn sample(&self, t: f64, x: &[f64], _rng: &mut Stream) -> Result<f64> {
        self.value(t, x)
    }
}
