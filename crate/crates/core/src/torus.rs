//! Probability measures on the flat torus `[0, 2π)^d`.
//!
//! Two representations are used throughout: [`EmpiricalMeasure`] (uniform
//! atoms, the object `μ^x` built from a particle configuration) and
//! [`GridDensity`] (a d=1 density on a uniform periodic mesh, used by the
//! mean-field reference solvers). Both expose Fourier coefficients
//! `F_l(η) = ∫ e_l^* dη` with `e_l(x) = (2π)^{-d/2} e^{i l·x}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const TWO_PI: f64 = 2.0 * PI;

/// Dimension, Sobolev order and Fourier truncation shared by all metric
/// computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ContextSpec", into = "ContextSpec")]
pub struct TorusContext {
    d: usize,
    k_star: u32,
    trunc: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextSpec {
    d: usize,
    trunc: usize,
}

impl TryFrom<ContextSpec> for TorusContext {
    type Error = Error;
    fn try_from(s: ContextSpec) -> Result<Self> {
        TorusContext::new(s.d, s.trunc)
    }
}

impl From<TorusContext> for ContextSpec {
    fn from(c: TorusContext) -> Self {
        ContextSpec { d: c.d, trunc: c.trunc }
    }
}

impl TorusContext {
    pub fn new(d: usize, trunc: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if trunc == 0 {
            return Err(Error::domain("truncation level must be at least 1"));
        }
        Ok(TorusContext { d, k_star: (d / 2 + 3) as u32, trunc })
    }

    /// Context with the default truncation: 64 modes for d=1, 16 otherwise.
    pub fn with_default_trunc(d: usize) -> Result<Self> {
        Self::new(d, if d == 1 { 64 } else { 16 })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `k_* = ⌊d/2⌋ + 3`.
    pub fn k_star(&self) -> u32 {
        self.k_star
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn with_trunc(&self, trunc: usize) -> Result<Self> {
        Self::new(self.d, trunc)
    }

    /// Number of retained modes `(2L+1)^d`.
    pub fn n_modes(&self) -> usize {
        (2 * self.trunc + 1).pow(self.d as u32)
    }

    /// Retained wave vectors in flat order (last axis fastest).
    pub fn modes(&self) -> Vec<Vec<i64>> {
        let side = 2 * self.trunc + 1;
        let l = self.trunc as i64;
        (0..self.n_modes())
            .map(|mut idx| {
                let mut v = vec![0i64; self.d];
                for j in (0..self.d).rev() {
                    v[j] = (idx % side) as i64 - l;
                    idx /= side;
                }
                v
            })
            .collect()
    }

    /// `|l|²` for every retained mode, in flat order.
    pub fn mode_norms_sq(&self) -> Vec<f64> {
        self.modes().iter().map(|l| l.iter().map(|&c| (c * c) as f64).sum()).collect()
    }

    /// `(2π)^{-d/2}`, the normalization of the Fourier basis.
    pub fn basis_norm(&self) -> f64 {
        TWO_PI.powf(-(self.d as f64) / 2.0)
    }
}

/// Reduce a point componentwise into `[0, 2π)`.
pub fn canonicalize(point: &[f64]) -> Result<Vec<f64>> {
    point
        .iter()
        .map(|&x| if x.is_finite() { Ok(wrap(x)) } else { Err(Error::domain(format!("non-finite coordinate {x}"))) })
        .collect()
}

/// Scalar reduction into `[0, 2π)`; the input must be finite.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Geodesic distance on the circle of circumference 2π.
#[inline]
pub fn arc_distance(x: f64, y: f64) -> f64 {
    let r = (x - y).rem_euclid(TWO_PI);
    r.min(TWO_PI - r)
}

/// Geodesic distance on `T^d`.
pub fn torus_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| arc_distance(a, b).powi(2)).sum::<f64>().sqrt()
}

/// Uniform atomic measure `(1/N) Σ δ_{x^i}` on `T^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    d: usize,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Build from a flat `N·d` coordinate buffer; coordinates are canonicalized.
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if coords.is_empty() || coords.len() % d != 0 {
            return Err(Error::domain(format!("need a positive multiple of d={d} coordinates, got {}", coords.len())));
        }
        let atoms = canonicalize(&coords)?;
        Ok(EmpiricalMeasure { d, atoms })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::domain("atoms have inconsistent dimension"));
        }
        Self::new(d, points.concat())
    }

    /// d=1 convenience constructor.
    pub fn on_circle(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Flat coordinates, atom-major.
    pub fn coords(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.d..(i + 1) * self.d]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.d)
    }

    /// Rigid translation `(I + z)_# μ`.
    pub fn shifted(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.d {
            return Err(Error::domain("shift dimension mismatch"));
        }
        let coords = self.atoms.chunks_exact(self.d).flat_map(|a| a.iter().zip(z).map(|(x, s)| x + s)).collect();
        Self::new(self.d, coords)
    }

    /// d=1 coordinates sorted ascending.
    pub fn sorted_circle(&self) -> Result<Vec<f64>> {
        if self.d != 1 {
            return Err(Error::UnsupportedDimension { d: self.d, hint: "sorting is defined on the circle only" });
        }
        let mut v = self.atoms.clone();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Quantile draw (d=1): the atom of rank `⌊uN⌋` in sorted order.
    pub fn quantile(&self, sorted: &[f64], u: f64) -> f64 {
        let n = sorted.len();
        sorted[((u * n as f64) as usize).min(n - 1)]
    }
}

/// d=1 density on the nodes `x_j = 2πj/m`; mass is the rectangle rule
/// `(2π/m) Σ values`. Sampling and transport read node `j` as the cell
/// `[x_j - h/2, x_j + h/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
}

impl GridDensity {
    /// Validate and normalize to unit mass.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("grid density needs at least one node"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("grid density values must be finite and nonnegative"));
        }
        let h = TWO_PI / values.len() as f64;
        let mass: f64 = values.iter().sum::<f64>() * h;
        if mass <= 0.0 {
            return Err(Error::domain("grid density has zero mass"));
        }
        Ok(GridDensity { values: values.into_iter().map(|v| v / mass).collect() })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0; m])
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..m).map(|j| f(TWO_PI * j as f64 / m as f64)).collect())
    }

    /// All mass on node `node` (a δ at the mesh resolution).
    pub fn delta_like(m: usize, node: usize) -> Result<Self> {
        let mut v = vec![0.0; m];
        v[node % m] = 1.0;
        Self::new(v)
    }

    /// Cloud-in-cell deposit of a d=1 empirical measure: each atom splits its
    /// mass linearly between the two neighbouring nodes.
    pub fn from_empirical(mu: &EmpiricalMeasure, m: usize) -> Result<Self> {
        if mu.d() != 1 {
            return Err(Error::UnsupportedDimension { d: mu.d(), hint: "grid densities are d=1" });
        }
        let h = TWO_PI / m as f64;
        let mut v = vec![0.0; m];
        let w = 1.0 / mu.len() as f64;
        for &x in mu.coords() {
            let s = x / h;
            let j = s.floor();
            let th = s - j;
            let j = j as usize % m;
            v[j] += w * (1.0 - th);
            v[(j + 1) % m] += w * th;
        }
        Self::new(v)
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.m() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.spacing() * j as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    /// `∫ f dμ` by the rectangle rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.spacing();
        self.values.iter().enumerate().map(|(j, v)| v * f(h * j as f64)).sum::<f64>() * h
    }

    /// Cumulative cell masses `c_0 = 0, c_{j+1} = c_j + h·v_j`.
    pub fn cell_cdf(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut c = Vec::with_capacity(self.m() + 1);
        let mut acc = 0.0;
        c.push(0.0);
        for v in &self.values {
            acc += v * h;
            c.push(acc);
        }
        c
    }

    /// Inverse CDF with linear interpolation inside cells.
    pub fn quantile(&self, cdf: &[f64], u: f64) -> f64 {
        let h = self.spacing();
        let total = cdf[cdf.len() - 1];
        let target = u * total;
        // first cell whose upper cumulative mass exceeds the target
        let j = cdf[1..].partition_point(|&c| c <= target).min(self.m() - 1);
        let mass = cdf[j + 1] - cdf[j];
        let frac = if mass > 0.0 { ((target - cdf[j]) / mass).clamp(0.0, 1.0) } else { 0.5 };
        wrap(h * j as f64 - 0.5 * h + h * frac)
    }
}

/// Either measure representation; this is also the JSON wire format.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Empirical(EmpiricalMeasure),
    Grid(GridDensity),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum MeasureFile {
    Empirical { d: usize, atoms: Vec<Vec<f64>> },
    Grid { m: usize, values: Vec<f64> },
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let f = match self {
            Measure::Empirical(e) => {
                MeasureFile::Empirical { d: e.d(), atoms: e.atoms().map(<[f64]>::to_vec).collect() }
            }
            Measure::Grid(g) => MeasureFile::Grid { m: g.m(), values: g.values().to_vec() },
        };
        f.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match MeasureFile::deserialize(de)? {
            MeasureFile::Empirical { d, atoms } => {
                if atoms.iter().any(|a| a.len() != d) {
                    return Err(D::Error::custom(format!("every atom must have d={d} coordinates")));
                }
                EmpiricalMeasure::new(d, atoms.concat()).map(Measure::Empirical).map_err(D::Error::custom)
            }
            MeasureFile::Grid { m, values } => {
                if values.len() != m {
                    return Err(D::Error::custom(format!("grid declares m={m} but has {} values", values.len())));
                }
                GridDensity::new(values).map(Measure::Grid).map_err(D::Error::custom)
            }
        }
    }
}

impl Measure {
    pub fn d(&self) -> usize {
        match self {
            Measure::Empirical(e) => e.d(),
            Measure::Grid(_) => 1,
        }
    }
}

/// Fourier coefficients `F_l` for `|l|_∞ ≤ trunc`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVector {
    ctx: TorusContext,
    coeffs: Vec<Complex64>,
}

impl FourierVector {
    pub fn new(ctx: TorusContext, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != ctx.n_modes() {
            return Err(Error::domain(format!("expected {} coefficients, got {}", ctx.n_modes(), coeffs.len())));
        }
        Ok(FourierVector { ctx, coeffs })
    }

    /// Coefficients of the function `Σ_l c_l e_l` (so `F_l = c_l`).
    pub fn from_modes(ctx: TorusContext, modes: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); ctx.n_modes()];
        for (l, c) in modes {
            let idx = flat_index(&ctx, l).ok_or_else(|| Error::domain(format!("mode {l:?} outside truncation")))?;
            coeffs[idx] += c;
        }
        Self::new(ctx, coeffs)
    }

    pub fn ctx(&self) -> &TorusContext {
        &self.ctx
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, l: &[i64]) -> Option<Complex64> {
        flat_index(&self.ctx, l).map(|i| self.coeffs[i])
    }

    pub fn sub(&self, other: &FourierVector) -> Result<FourierVector> {
        if self.ctx != other.ctx {
            return Err(Error::domain("Fourier vectors live on different contexts"));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(FourierVector { ctx: self.ctx, coeffs })
    }
}

fn flat_index(ctx: &TorusContext, l: &[i64]) -> Option<usize> {
    if l.len() != ctx.d() {
        return None;
    }
    let big_l = ctx.trunc() as i64;
    let side = 2 * ctx.trunc() + 1;
    let mut idx = 0usize;
    for &c in l {
        if c.abs() > big_l {
            return None;
        }
        idx = idx * side + (c + big_l) as usize;
    }
    Some(idx)
}

/// Anything that has Fourier coefficients on a torus context.
pub trait FourierMeasure {
    fn dim(&self) -> usize;
    fn fourier(&self, ctx: &TorusContext) -> Result<FourierVector>;
}

impl FourierMeasure for EmpiricalMeasure {
    fn dim(&self) -> usize {
        self.d
    }

    fn fourier(&self, ctx: &TorusContext) -> Result<FourierVector> {
        check_dim(ctx, self.d)?;
        let w = 1.0 / self.len() as f64;
        let weighted: Vec<(&[f64], f64)> = self.atoms().map(|a| (a, w)).collect();
        Ok(weighted_atoms_fourier(ctx, &weighted))
    }
}

impl FourierMeasure for GridDensity {
    fn dim(&self) -> usize {
        1
    }

    fn fourier(&self, ctx: &TorusContext) -> Result<FourierVector> {
        check_dim(ctx, 1)?;
        let h = self.spacing();
        let nodes: Vec<[f64; 1]> = (0..self.m()).map(|j| [self.node(j)]).collect();
        let weighted: Vec<(&[f64], f64)> = nodes.iter().zip(&self.values).map(|(x, v)| (&x[..], v * h)).collect();
        Ok(weighted_atoms_fourier(ctx, &weighted))
    }
}

impl FourierMeasure for Measure {
    fn dim(&self) -> usize {
        self.d()
    }

    fn fourier(&self, ctx: &TorusContext) -> Result<FourierVector> {
        match self {
            Measure::Empirical(e) => e.fourier(ctx),
            Measure::Grid(g) => g.fourier(ctx),
        }
    }
}

/// `F_l(η)` for a measure given as weighted atoms.
pub fn fourier_coefficients<M: FourierMeasure + ?Sized>(mu: &M, ctx: &TorusContext) -> Result<FourierVector> {
    mu.fourier(ctx)
}

fn check_dim(ctx: &TorusContext, d: usize) -> Result<()> {
    if ctx.d() != d {
        return Err(Error::domain(format!("measure has d={d}, context has d={}", ctx.d())));
    }
    Ok(())
}

fn weighted_atoms_fourier(ctx: &TorusContext, atoms: &[(&[f64], f64)]) -> FourierVector {
    let d = ctx.d();
    let big_l = ctx.trunc();
    let side = 2 * big_l + 1;
    let n_modes = ctx.n_modes();
    let norm = ctx.basis_norm();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n_modes];
    // per-axis tables e^{-i l x_j}, l = -L..=L
    let mut table = vec![Complex64::new(0.0, 0.0); d * side];
    for &(x, w) in atoms {
        for (j, &xj) in x.iter().enumerate() {
            let row = &mut table[j * side..(j + 1) * side];
            row[big_l] = Complex64::new(1.0, 0.0);
            for l in 1..=big_l {
                // direct evaluation keeps translation covariance at machine precision
                let (s, c) = (l as f64 * xj).sin_cos();
                row[big_l + l] = Complex64::new(c, -s);
                row[big_l - l] = Complex64::new(c, s);
            }
        }
        if d == 1 {
            for (c, t) in coeffs.iter_mut().zip(&table) {
                *c += t * w;
            }
            continue;
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let mut rem = idx;
            let mut prod = Complex64::new(w, 0.0);
            for j in (0..d).rev() {
                prod *= table[j * side + rem % side];
                rem /= side;
            }
            *c += prod;
        }
    }
    for c in &mut coeffs {
        *c *= norm;
    }
    FourierVector { ctx: *ctx, coeffs }
}

/// Draw `n` i.i.d. atoms from a grid density by inverse-CDF sampling.
pub fn sample_iid(mu: &GridDensity, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let cdf = mu.cell_cdf();
    let mut rng = rng::stream(seed, 0);
    let xs: Vec<f64> = (0..n).map(|_| mu.quantile(&cdf, rng.random::<f64>())).collect();
    EmpiricalMeasure::new(1, xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx1(l: usize) -> TorusContext {
        TorusContext::new(1, l).unwrap()
    }

    #[test]
    fn k_star_follows_dimension() {
        assert_eq!(TorusContext::new(1, 4).unwrap().k_star(), 3);
        assert_eq!(TorusContext::new(2, 4).unwrap().k_star(), 4);
        assert_eq!(TorusContext::new(3, 4).unwrap().k_star(), 4);
        assert_eq!(TorusContext::new(5, 1).unwrap().k_star(), 5);
        assert!(TorusContext::new(1, 0).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(&[0.0]).unwrap(), vec![0.0]);
        assert!((canonicalize(&[TWO_PI + 1.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((canonicalize(&[-0.5]).unwrap()[0] - (TWO_PI - 0.5)).abs() < 1e-15);
        assert!(canonicalize(&[f64::NAN]).is_err());
        assert!(canonicalize(&[f64::INFINITY]).is_err());
        assert_eq!(canonicalize(&[-1e-300]).unwrap()[0], 0.0);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_periodic(x in -1e3f64..1e3, k in -20i32..20) {
            let a = canonicalize(&[x]).unwrap()[0];
            prop_assert!((0.0..TWO_PI).contains(&a));
            prop_assert_eq!(canonicalize(&[a]).unwrap()[0], a);
            let b = canonicalize(&[x + k as f64 * TWO_PI]).unwrap()[0];
            prop_assert!(arc_distance(a, b) < 1e-9);
        }
    }

    #[test]
    fn delta_at_zero_has_flat_spectrum() {
        let mu = EmpiricalMeasure::on_circle(&[0.0]).unwrap();
        let f = fourier_coefficients(&mu, &ctx1(8)).unwrap();
        let norm = TWO_PI.powf(-0.5);
        for c in f.coeffs() {
            assert!((c.re - norm).abs() < 1e-15 && c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn antipodal_pair_kills_first_mode() {
        let mu = EmpiricalMeasure::on_circle(&[0.0, PI]).unwrap();
        let f = fourier_coefficients(&mu, &ctx1(4)).unwrap();
        assert!(f.get(&[1]).unwrap().norm() < 1e-15);
        assert!((f.get(&[2]).unwrap().re - TWO_PI.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_is_orthogonal_to_nonzero_modes() {
        let mu = GridDensity::uniform(256).unwrap();
        let f = fourier_coefficients(&mu, &ctx1(16)).unwrap();
        assert!((f.get(&[0]).unwrap().re - TWO_PI.powf(-0.5)).abs() < 1e-14);
        for l in 1..=16 {
            assert!(f.get(&[l]).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn real_measure_coefficients_are_conjugate_symmetric() {
        let mu = EmpiricalMeasure::new(2, vec![0.3, 1.0, 2.0, 5.5, 4.0, 0.1]).unwrap();
        let ctx = TorusContext::new(2, 3).unwrap();
        let f = fourier_coefficients(&mu, &ctx).unwrap();
        for l in ctx.modes() {
            let neg: Vec<i64> = l.iter().map(|c| -c).collect();
            let a = f.get(&l).unwrap();
            let b = f.get(&neg).unwrap();
            assert!((a - b.conj()).norm() < 1e-14);
        }
        assert!((f.get(&[0, 0]).unwrap().re - 1.0 / TWO_PI).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn fourier_is_permutation_invariant(xs in prop::collection::vec(0.0f64..TWO_PI, 2..10), rot in 0usize..10) {
            let ctx = ctx1(6);
            let mut ys = xs.clone();
            ys.rotate_left(rot % xs.len());
            ys.reverse();
            let a = fourier_coefficients(&EmpiricalMeasure::on_circle(&xs).unwrap(), &ctx).unwrap();
            let b = fourier_coefficients(&EmpiricalMeasure::on_circle(&ys).unwrap(), &ctx).unwrap();
            for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
                // summation order differs; equality is up to the last ulp
                prop_assert!((p - q).norm() <= 4.0 * f64::EPSILON);
            }
        }

        #[test]
        fn translation_multiplies_by_phase(xs in prop::collection::vec(0.0f64..TWO_PI, 1..8), z in -3.0f64..3.0) {
            let ctx = ctx1(5);
            let mu = EmpiricalMeasure::on_circle(&xs).unwrap();
            let a = fourier_coefficients(&mu, &ctx).unwrap();
            let b = fourier_coefficients(&mu.shifted(&[z]).unwrap(), &ctx).unwrap();
            for (l, (p, q)) in ctx.modes().iter().zip(a.coeffs().iter().zip(b.coeffs())) {
                let phase = Complex64::from_polar(1.0, -(l[0] as f64) * z);
                prop_assert!((p * phase - q).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_respects_support() {
        let mu = GridDensity::delta_like(64, 10).unwrap();
        let s = sample_iid(&mu, 5, 11).unwrap();
        let h = mu.spacing();
        for &x in s.coords() {
            assert!(arc_distance(x, mu.node(10)) <= h);
        }
        let g = GridDensity::from_fn(128, |x| 1.0 + 0.5 * x.cos()).unwrap();
        assert_eq!(sample_iid(&g, 50, 3).unwrap(), sample_iid(&g, 50, 3).unwrap());
        assert_ne!(sample_iid(&g, 50, 3).unwrap(), sample_iid(&g, 50, 4).unwrap());
        assert!(sample_iid(&g, 0, 3).is_err());
    }

    #[test]
    fn uniform_sample_first_mode_is_clt_sized() {
        let mu = GridDensity::uniform(512).unwrap();
        let n = 10_000;
        let s = sample_iid(&mu, n, 2024).unwrap();
        let f = fourier_coefficients(&s, &ctx1(1)).unwrap();
        // |F_1| = (2π)^{-1/2} |mean e^{-ix}|; the mean has std 1/√n
        let mean_mod = f.get(&[1]).unwrap().norm() / TWO_PI.powf(-0.5);
        assert!(mean_mod <= 5.0 / (n as f64).sqrt(), "{mean_mod}");
    }

    #[test]
    fn cic_deposit_preserves_mass_and_mean_phase() {
        let mu = EmpiricalMeasure::on_circle(&[0.1, 2.0, 6.2]).unwrap();
        let g = GridDensity::from_empirical(&mu, 512).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-12);
        let exact: f64 = mu.coords().iter().map(|x| x.cos()).sum::<f64>() / 3.0;
        let h = g.spacing();
        assert!((g.integrate(f64::cos) - exact).abs() < h * h);
    }

    #[test]
    fn measure_json_round_trip_and_validation() {
        let m: Measure = serde_json::from_str(r#"{"kind":"empirical","d":1,"atoms":[[0.0],[3.0]]}"#).unwrap();
        assert_eq!(m.d(), 1);
        let back: Measure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        let g: Measure = serde_json::from_str(r#"{"kind":"grid","m":4,"values":[1,1,1,1]}"#).unwrap();
        assert!(matches!(g, Measure::Grid(ref gd) if (gd.mass() - 1.0).abs() < 1e-12));
        assert!(serde_json::from_str::<Measure>(r#"{"kind":"grid","m":3,"values":[1,1,1,1]}"#).is_err());
        assert!(serde_json::from_str::<Measure>(r#"{"kind":"empirical","d":2,"atoms":[[0.0]]}"#).is_err());
        assert!(serde_json::from_str::<Measure>(r#"{"kind":"empirical","d":1,"atoms":[[0.0]],"x":1}"#).is_err());
    }
}
