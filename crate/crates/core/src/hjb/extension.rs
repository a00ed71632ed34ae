//! Extension `V^N(t,z,x) = v^N(t, z+x)` and the smoothed estimator
//! `ĥ^N(t,μ) = ∫ v^N(t,y) μ^{⊗N}(dy)`.

use super::mc::McEstimate;
use super::ValueFn;
use crate::error::{Error, Result};
use crate::rng;
use crate::torus::{canonicalize, EmpiricalMeasure, Measure};
use rand::Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Closure-backed accessor, used for closed forms and tests.
pub struct FnValue<F> {
    n: usize,
    horizon: f64,
    f: F,
}

impl<F> FnValue<F>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    pub fn new(n: usize, horizon: f64, f: F) -> Self {
        FnValue { n, horizon, f }
    }
}

impl<F> ValueFn for FnValue<F>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn n_particles(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::domain(format!("configuration has {} coordinates, N = {}", x.len(), self.n)));
        }
        Ok((self.f)(t, &canonicalize(x)?))
    }
}

/// `V^N(t, z, x) = v^N(t, z + x)` with the shift applied to every particle
/// and coordinates canonicalized (d=1).
pub fn extend_value<V: ValueFn + ?Sized>(v: &V, t: f64, z: &[f64], atoms: &EmpiricalMeasure) -> Result<f64> {
    if atoms.d() != 1 || z.len() != 1 {
        return Err(Error::UnsupportedDimension { d: atoms.d().max(z.len()), hint: "value functions are d=1" });
    }
    v.value(t, atoms.shifted(z)?.coords())
}

/// Monte Carlo `ĥ^N(t, μ)` from `n_resample` i.i.d. `N`-tuples of `μ`.
///
/// Resample `r` draws `N` uniforms from `rng::stream(seed, r)` and maps them
/// through the quantile function of `μ`. Calls with the same seed on
/// different measures are therefore coupled (common random numbers), which
/// keeps Lipschitz-in-`μ` checks sharp.
pub fn hat_v<V: ValueFn + ?Sized>(v: &V, t: f64, mu: &Measure, n_resample: usize, seed: u64) -> Result<McEstimate> {
    if n_resample == 0 {
        return Err(Error::config("n_resample must be positive"));
    }
    let n = v.n_particles();
    let quantile: Box<dyn Fn(f64) -> f64 + Sync> = match mu {
        Measure::Grid(g) => {
            let cdf = g.cell_cdf();
            let g = g.clone();
            Box::new(move |u| g.quantile(&cdf, u))
        }
        Measure::Empirical(e) => {
            let sorted = e.sorted_circle()?;
            let e = e.clone();
            Box::new(move |u| e.quantile(&sorted, u))
        }
    };
    let draw = |r: usize| -> Result<f64> {
        let mut s = rng::stream(seed, r as u64);
        let y: Vec<f64> = (0..n).map(|_| quantile(s.random::<f64>())).collect();
        v.sample(t, &y, &mut s)
    };
    #[cfg(feature = "parallel")]
    let samples: Vec<f64> = (0..n_resample).into_par_iter().map(draw).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<f64> = (0..n_resample).map(draw).collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::mc::McValueFn;
    use crate::hjb::problem::benchmarks;
    use crate::torus::{GridDensity, TWO_PI};

    fn null_closed_form(n: usize) -> FnValue<impl Fn(f64, &[f64]) -> f64 + Sync> {
        FnValue::new(n, 1.0, |t: f64, x: &[f64]| {
            (-(1.0 - t)).exp() * x.iter().map(|c| c.cos()).sum::<f64>() / x.len() as f64
        })
    }

    #[test]
    fn extension_identities() {
        let v = null_closed_form(3);
        let x = EmpiricalMeasure::on_circle(&[0.2, 1.5, 4.0]).unwrap();
        let base = v.value(0.3, x.coords()).unwrap();
        assert_eq!(extend_value(&v, 0.3, &[0.0], &x).unwrap(), base);
        assert!((extend_value(&v, 0.3, &[TWO_PI], &x).unwrap() - base).abs() < 1e-14);
        let (z1, z2) = (0.7, 2.9);
        let lhs = extend_value(&v, 0.3, &[z1], &x.shifted(&[z2]).unwrap()).unwrap();
        let rhs = extend_value(&v, 0.3, &[z1 + z2], &x).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
        let zx = x.shifted(&[z1]).unwrap();
        assert_eq!(extend_value(&v, 0.3, &[z1], &x).unwrap(), extend_value(&v, 0.3, &[0.0], &zx).unwrap());
    }

    #[test]
    fn constant_value_gives_exact_hat_v() {
        let v = FnValue::new(4, 1.0, |_, _| 2.5);
        let mu = Measure::Grid(GridDensity::uniform(32).unwrap());
        let e = hat_v(&v, 0.0, &mu, 100, 3).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn hat_v_of_null_value_is_linear_in_mu() {
        // ĥ(t, μ) = e^{-(T-t)} ∫cos dμ for the null benchmark.
        let v = null_closed_form(4);
        let g = GridDensity::from_fn(256, |x| 1.0 + 0.5 * x.cos()).unwrap();
        let exact = (-1.0f64).exp() * g.integrate(f64::cos);
        let e = hat_v(&v, 0.0, &Measure::Grid(g), 20_000, 1).unwrap();
        assert!((e.mean - exact).abs() <= 4.0 * e.std_error, "{} vs {exact}", e.mean);
    }

    #[test]
    fn monte_carlo_accessor_is_unbiased_inside_hat_v() {
        let acc = McValueFn::new(benchmarks::null(0.0), 2, 1, 10, 0).unwrap();
        let x = EmpiricalMeasure::on_circle(&[0.5, 2.0, 3.0]).unwrap();
        let exact = (-0.6f64).exp() * x.coords().iter().map(|c| c.cos()).sum::<f64>() / 3.0;
        let e = hat_v(&acc, 0.4, &Measure::Empirical(x), 20_000, 2).unwrap();
        assert!((e.mean - exact).abs() <= 4.0 * e.std_error, "{} vs {exact}", e.mean);
        assert!(e.std_error > 0.0);
    }
}
