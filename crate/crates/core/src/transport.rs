//! Exact 1-Wasserstein distances with the torus geodesic ground cost.
//!
//! On the circle two independent routes are available: a scan over cyclic
//! shifts of the sorted matching (equal atom counts) and the CDF formula
//! `W_1 = min_c ∫ |F_μ - F_ν - c| dx`, which also handles grid densities.
//! [`w1_lp`] solves the transport linear program directly in any dimension
//! and serves as the oracle for both.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::torus::{arc_distance, torus_distance, EmpiricalMeasure, GridDensity, Measure, TWO_PI};

/// Largest `N_μ · N_ν` accepted by [`w1_lp`].
pub const LP_SUPPORT_BUDGET: usize = 10_000;

/// W_1 between two empirical measures on the circle.
///
/// Equal atom counts use the sorted rotation scan; otherwise the CDF formula.
pub fn w1_circle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.d() != 1 || nu.d() != 1 {
        return Err(Error::UnsupportedDimension {
            d: mu.d().max(nu.d()),
            hint: "w1_circle is d=1 only; use w1_lp for small supports in higher dimension",
        });
    }
    let (mut a, mut b) = (mu.sorted_circle()?, nu.sorted_circle()?);
    // fixed argument order makes the result exactly symmetric
    if (a.len(), &a).partial_cmp(&(b.len(), &b)) == Some(Ordering::Greater) {
        std::mem::swap(&mut a, &mut b);
    }
    if a.len() == b.len() {
        Ok(rotation_scan(&a, &b))
    } else {
        let (p, q) = (EmpiricalMeasure::on_circle(&a)?, EmpiricalMeasure::on_circle(&b)?);
        w1_circle_cdf(&Measure::Empirical(p), &Measure::Empirical(q))
    }
}

/// Sorted matching minimized over the `N` cyclic shifts. Exact for uniform
/// weights: some cyclically monotone matching is optimal on the circle.
pub fn rotation_scan(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let best =
        (0..n).map(|k| (0..n).map(|i| arc_distance(a[i], b[(i + k) % n])).sum::<f64>()).fold(f64::INFINITY, f64::min);
    best / n as f64
}

/// W_1 on the circle between arbitrary d=1 measures via the CDF formula.
/// Grid densities are read as piecewise constant on their cells.
pub fn w1_circle_cdf(mu: &Measure, nu: &Measure) -> Result<f64> {
    for m in [mu, nu] {
        if m.d() != 1 {
            return Err(Error::UnsupportedDimension { d: m.d(), hint: "the CDF formula is d=1 only" });
        }
    }
    let mut events = Vec::new();
    let mut slope0 = 0.0;
    push_events(mu, 1.0, &mut events, &mut slope0);
    push_events(nu, -1.0, &mut events, &mut slope0);
    events.sort_by(|a, b| a.pos.total_cmp(&b.pos));

    // H = F_μ - F_ν up to an additive constant, as linear segments
    let mut segs: Vec<Segment> = Vec::with_capacity(events.len() + 1);
    let (mut x, mut h, mut slope) = (0.0, 0.0, slope0);
    for e in events.iter().chain(std::iter::once(&Event { pos: TWO_PI, jump: 0.0, dslope: 0.0 })) {
        let len = e.pos - x;
        if len > 0.0 {
            segs.push(Segment { len, start: h, slope });
            h += slope * len;
            x = e.pos;
        }
        h += e.jump;
        slope += e.dslope;
    }
    Ok(min_abs_integral(&segs))
}

struct Event {
    pos: f64,
    jump: f64,
    dslope: f64,
}

struct Segment {
    len: f64,
    start: f64,
    slope: f64,
}

fn push_events(m: &Measure, sign: f64, events: &mut Vec<Event>, slope0: &mut f64) {
    match m {
        Measure::Empirical(e) => {
            let w = sign / e.len() as f64;
            events.extend(e.coords().iter().map(|&p| Event { pos: p, jump: w, dslope: 0.0 }));
        }
        Measure::Grid(g) => push_grid_events(g, sign, events, slope0),
    }
}

fn push_grid_events(g: &GridDensity, sign: f64, events: &mut Vec<Event>, slope0: &mut f64) {
    let m = g.m();
    let h = g.spacing();
    let v = g.values();
    // cell j covers [x_j - h/2, x_j + h/2); cell 0 wraps through the origin
    *slope0 += sign * v[0];
    for j in 0..m {
        let next = v[(j + 1) % m];
        events.push(Event { pos: (j as f64 + 0.5) * h, jump: 0.0, dslope: sign * (next - v[j]) });
    }
}

/// `min_c Σ ∫_seg |H - c|`, with the optimal `c` located by bisection on the
/// monotone subgradient `|{H < c}| - |{H > c}|`.
fn min_abs_integral(segs: &[Segment]) -> f64 {
    let (mut lo, mut hi) = segs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let end = s.start + s.slope * s.len;
        (lo.min(s.start).min(end), hi.max(s.start).max(end))
    });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below: f64 = segs.iter().map(|s| length_below(s, mid)).sum();
        if below * 2.0 < TWO_PI {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    segs.iter().map(|s| abs_integral(s.start - c, s.slope, s.len)).sum()
}

fn length_below(s: &Segment, c: f64) -> f64 {
    if s.slope == 0.0 {
        return if s.start < c { s.len } else { 0.0 };
    }
    let cross = ((c - s.start) / s.slope).clamp(0.0, s.len);
    if s.slope > 0.0 {
        cross
    } else {
        s.len - cross
    }
}

/// `∫_0^len |a + b u| du`.
fn abs_integral(a: f64, b: f64, len: f64) -> f64 {
    let end = a + b * len;
    if a * end >= 0.0 {
        0.5 * (a.abs() + end.abs()) * len
    } else {
        0.5 * (a * a + end * end) / b.abs()
    }
}

/// Exact optimal transport cost between uniform empirical measures in any
/// dimension, solved as a min-cost flow (successive shortest paths).
pub fn w1_lp(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.d() != nu.d() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", mu.d(), nu.d())));
    }
    let (n1, n2) = (mu.len(), nu.len());
    if n1 * n2 > LP_SUPPORT_BUDGET {
        return Err(Error::Resource(format!("transport LP needs N_mu*N_nu <= {LP_SUPPORT_BUDGET}, got {n1}*{n2}")));
    }
    let cost: Vec<f64> = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| torus_distance(mu.atom(i), nu.atom(j)))
        .collect();
    // mass 1/n1 per source, 1/n2 per sink, scaled to integers by n1*n2
    let total = transport_flow(n1, n2, n2 as i64, n1 as i64, &cost);
    Ok(total / (n1 * n2) as f64)
}

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn add(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
    }
}

#[derive(PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn transport_flow(n1: usize, n2: usize, supply: i64, demand: i64, cost: &[f64]) -> f64 {
    let (src, sink) = (0, n1 + n2 + 1);
    let n_nodes = n1 + n2 + 2;
    let mut g = FlowGraph { edges: Vec::new(), adj: vec![Vec::new(); n_nodes] };
    let big = supply * n1 as i64;
    for i in 0..n1 {
        g.add(src, 1 + i, supply, 0.0);
        for j in 0..n2 {
            g.add(1 + i, 1 + n1 + j, big, cost[i * n2 + j]);
        }
    }
    for j in 0..n2 {
        g.add(1 + n1 + j, sink, demand, 0.0);
    }

    let mut potential = vec![0.0; n_nodes];
    let mut remaining = big;
    let mut total = 0.0;
    while remaining > 0 {
        let mut dist = vec![f64::INFINITY; n_nodes];
        let mut prev = vec![usize::MAX; n_nodes];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Label(0.0, src));
        while let Some(Label(du, u)) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for &eid in &g.adj[u] {
                let e = &g.edges[eid];
                if e.cap <= 0 {
                    continue;
                }
                let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                let nd = du + reduced;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = eid;
                    heap.push(Label(nd, e.to));
                }
            }
        }
        debug_assert!(dist[sink].is_finite(), "transport network is always feasible");
        for (p, d) in potential.iter_mut().zip(&dist) {
            if d.is_finite() {
                *p += d;
            }
        }
        let mut push = remaining;
        let mut v = sink;
        while v != src {
            let eid = prev[v];
            push = push.min(g.edges[eid].cap);
            v = g.edges[eid ^ 1].to;
        }
        let mut v = sink;
        while v != src {
            let eid = prev[v];
            g.edges[eid].cap -= push;
            g.edges[eid ^ 1].cap += push;
            total += push as f64 * g.edges[eid].cost;
            v = g.edges[eid ^ 1].to;
        }
        remaining -= push;
    }
    total
}
