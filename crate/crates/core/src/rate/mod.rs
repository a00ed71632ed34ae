//! Convergence-rate experiments (Theorem 1.2) and sample complexity (Lemma 2.8).

pub mod experiment;
pub mod fit;
pub mod report;
pub mod sample_complexity;

pub use experiment::{run_rate_experiment, ExperimentPlan, SolverBudget};
pub use fit::{fit_rate, loglog_slope, RateFit};
pub use report::{RateReport, RateRow};
pub use sample_complexity::{sample_complexity_experiment, ComplexityRow, ComplexityTable};
