//! Discrete p-modulus of curve families on a graph.
//!
//! Densities live on edges: a walk's rho-length is `sum rho(e) len(e)` and the
//! p-mass is `sum rho(e)^p len(e)`. The minimizing walk for a density is found
//! exactly by Dijkstra (layered over quantized length when the family bounds
//! lengths), which makes a cutting-plane scheme exact up to the inner solve.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_core::{Curve, MetricError, VertexId};
use crate::{Path, Space};

#[derive(Debug, Error)]
pub enum ModulusError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("p must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error("no convergence after {iterations} iterations (gap {gap})")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("family does not have the requested shape: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodMode {
    /// Curves must visit the neighborhood.
    Touch,
    /// Curves must stay out of it.
    Avoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub set: Vec<VertexId>,
    /// Vertices at distance `< delta` from `set` form the neighborhood.
    pub delta: f64,
    pub mode: NeighborhoodMode,
}

/// Walks inside `domain` from `connect_from` to `connect_to`, optionally with
/// length bounds and a neighborhood constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFamilySpec {
    pub domain: Vec<VertexId>,
    pub connect_from: Vec<VertexId>,
    pub connect_to: Vec<VertexId>,
    #[serde(default)]
    pub min_length: Option<f64>,
    #[serde(default)]
    pub max_length: Option<f64>,
    #[serde(default)]
    pub neighborhood: Option<Neighborhood>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusResult {
    pub value: f64,
    /// Density per edge `(u, v, rho)` with `u < v`; zero edges omitted.
    pub rho: Vec<(VertexId, VertexId, f64)>,
    pub p: f64,
    pub active_paths: Vec<Path>,
    pub certificate_gap: f64,
    /// Set when the connect sets lie in different components of the domain.
    pub infeasible: bool,
    pub iterations: usize,
}

struct Family {
    domain: Vec<bool>,
    from: Vec<usize>,
    to: Vec<bool>,
    touch: Option<Vec<bool>>,
    min_q: usize,
    max_q: Option<usize>,
}

impl Family {
    fn compile(space: &Space, spec: &CurveFamilySpec) -> Result<Self, ModulusError> {
        if spec.connect_from.is_empty() || spec.connect_to.is_empty() {
            return Err(ModulusError::InvalidFamily("connect sets must be nonempty".into()));
        }
        let mut domain = vec![false; space.len()];
        for i in space.indices(&spec.domain)? {
            domain[i] = true;
        }
        let from = space.indices(&spec.connect_from)?;
        let to_idx = space.indices(&spec.connect_to)?;
        let mut to = vec![false; space.len()];
        for &i in &to_idx {
            to[i] = true;
        }
        if from.iter().any(|&i| to[i]) {
            return Err(ModulusError::InvalidFamily("connect sets must be disjoint".into()));
        }
        if from.iter().chain(&to_idx).any(|&i| !domain[i]) {
            return Err(ModulusError::InvalidFamily("connect sets must lie in the domain".into()));
        }
        let mut touch = None;
        if let Some(nb) = &spec.neighborhood {
            let near = if nb.set.is_empty() {
                vec![f64::INFINITY; space.len()]
            } else {
                space.distances_to_set(&space.indices(&nb.set)?)
            };
            let inside: Vec<bool> = near.iter().map(|&d| d < nb.delta).collect();
            match nb.mode {
                NeighborhoodMode::Avoid => {
                    for (d, &bad) in domain.iter_mut().zip(&inside) {
                        if bad {
                            *d = false;
                        }
                    }
                }
                NeighborhoodMode::Touch => touch = Some(inside),
            }
        }
        let h = space.resolution();
        let min_q = spec.min_length.map_or(0, |l| (l / h - 1e-9).ceil().max(0.0) as usize);
        let max_q = spec.max_length.map(|l| (l / h + 1e-9).floor().max(0.0) as usize);
        Ok(Self { domain, from, to, touch, min_q, max_q })
    }

    fn connected(&self, space: &Space) -> bool {
        let mut seen = vec![false; space.len()];
        let mut stack: Vec<usize> = self.from.iter().copied().filter(|&i| self.domain[i]).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(u) = stack.pop() {
            if self.to[u] {
                return true;
            }
            for &(v, _) in space.neighbors(u) {
                if self.domain[v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest walks over states `(vertex, quantized length)`. Lengths at or above
/// `cap` collapse into the top layer; with `max_q` set, longer walks are cut.
struct Layered<'a> {
    space: &'a Space,
    domain: &'a [bool],
    quanta: Vec<Vec<usize>>,
    layers: usize,
    saturate: bool,
}

impl<'a> Layered<'a> {
    fn new(space: &'a Space, domain: &'a [bool], min_q: usize, max_q: Option<usize>) -> Self {
        let h = space.resolution();
        let quanta = (0..space.len())
            .map(|u| space.neighbors(u).iter().map(|&(_, len)| ((len / h).round() as usize).max(1)).collect())
            .collect();
        let (layers, saturate) = match max_q {
            Some(m) => (m + 1, false),
            None => (min_q + 1, true),
        };
        Self { space, domain, quanta, layers, saturate }
    }

    fn state(&self, v: usize, k: usize) -> usize {
        v * self.layers + k
    }

    /// Dijkstra from the given `(vertex, layer)` sources; returns cost and predecessor per state.
    fn run(&self, sources: &[(usize, usize)], cost: &dyn Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<usize>) {
        let total = self.space.len() * self.layers;
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![usize::MAX; total];
        let mut heap = BinaryHeap::new();
        for &(v, k) in sources {
            let s = self.state(v, k);
            dist[s] = 0.0;
            heap.push(Entry(0.0, s));
        }
        while let Some(Entry(d, s)) = heap.pop() {
            if d > dist[s] {
                continue;
            }
            let (u, k) = (s / self.layers, s % self.layers);
            for (slot, &(v, _)) in self.space.neighbors(u).iter().enumerate() {
                if !self.domain[v] {
                    continue;
                }
                let mut nk = k + self.quanta[u][slot];
                if nk >= self.layers {
                    if self.saturate {
                        nk = self.layers - 1;
                    } else {
                        continue;
                    }
                }
                let t = self.state(v, nk);
                let nd = d + cost(u, v);
                if nd < dist[t] {
                    heap.push(Entry(nd, t));
                    dist[t] = nd;
                    pred[t] = s;
                }
            }
        }
        (dist, pred)
    }

    fn walk(&self, pred: &[usize], end: usize) -> Vec<usize> {
        let mut out = vec![end / self.layers];
        let mut s = end;
        while pred[s] != usize::MAX {
            s = pred[s];
            out.push(s / self.layers);
        }
        out.reverse();
        out
    }
}

/// Oracle: the cheapest family walk under edge costs `rho(e) len(e)`.
fn cheapest_walk(space: &Space, fam: &Family, rho: &BTreeMap<(usize, usize), f64>) -> Option<(Vec<usize>, f64)> {
    let cost = |u: usize, v: usize| {
        let key = (u.min(v), u.max(v));
        rho.get(&key).copied().unwrap_or(0.0) * space.edge_length(u, v).unwrap_or(0.0)
    };
    let lay = Layered::new(space, &fam.domain, fam.min_q, fam.max_q);
    let ok_layer = |k: usize| k >= fam.min_q;
    let starts: Vec<(usize, usize)> = fam.from.iter().filter(|&&v| fam.domain[v]).map(|&v| (v, 0)).collect();
    let (fwd, fpred) = lay.run(&starts, &cost);
    match &fam.touch {
        None => {
            let mut best: Option<(usize, f64)> = None;
            for v in (0..space.len()).filter(|&v| fam.to[v]) {
                for k in (0..lay.layers).filter(|&k| ok_layer(k)) {
                    let c = fwd[lay.state(v, k)];
                    if c.is_finite() && best.is_none_or(|(_, b)| c < b) {
                        best = Some((lay.state(v, k), c));
                    }
                }
            }
            best.map(|(s, c)| (lay.walk(&fpred, s), c))
        }
        Some(inside) => {
            // second leg runs backwards from the targets; walks are undirected
            let ends: Vec<(usize, usize)> = (0..space.len()).filter(|&v| fam.to[v] && fam.domain[v]).map(|v| (v, 0)).collect();
            let (bwd, bpred) = lay.run(&ends, &cost);
            let mut best: Option<(usize, usize, f64)> = None;
            for u in (0..space.len()).filter(|&u| inside[u] && fam.domain[u]) {
                for k1 in 0..lay.layers {
                    let c1 = fwd[lay.state(u, k1)];
                    if !c1.is_finite() {
                        continue;
                    }
                    for k2 in 0..lay.layers {
                        let total_q = k1 + k2;
                        let admissible = if lay.saturate { total_q >= fam.min_q } else { total_q < lay.layers && total_q >= fam.min_q };
                        if !admissible {
                            continue;
                        }
                        let c = c1 + bwd[lay.state(u, k2)];
                        if c.is_finite() && best.is_none_or(|(_, _, b)| c < b) {
                            best = Some((lay.state(u, k1), lay.state(u, k2), c));
                        }
                    }
                }
            }
            best.map(|(s1, s2, c)| {
                let mut walk = lay.walk(&fpred, s1);
                let mut back = lay.walk(&bpred, s2);
                back.reverse();
                walk.extend_from_slice(&back[1..]);
                (walk, c)
            })
        }
    }
}

/// Constraint row: `(edge, count * len)` entries of one active walk.
type Row = Vec<(usize, f64)>;

struct Program {
    weights: Vec<f64>,
    rows: Vec<Row>,
    p: f64,
}

impl Program {
    fn density(&self, lambda: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.weights.len()];
        for (row, &l) in self.rows.iter().zip(lambda) {
            for &(e, a) in row {
                s[e] += l * a;
            }
        }
        s.iter()
            .zip(&self.weights)
            .map(|(&se, &w)| if se > 0.0 { (se / (self.p * w)).powf(1.0 / (self.p - 1.0)) } else { 0.0 })
            .collect()
    }

    fn mass(&self, rho: &[f64]) -> f64 {
        rho.iter().zip(&self.weights).map(|(&r, &w)| w * r.powf(self.p)).sum()
    }

    fn lengths(&self, rho: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(e, a)| a * rho[e]).sum()).collect()
    }

    fn dual(&self, lambda: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let rho = self.density(lambda);
        let lens = self.lengths(&rho);
        let value = lambda.iter().sum::<f64>() - (self.p - 1.0) * self.mass(&rho);
        let grad = lens.iter().map(|&l| 1.0 - l).collect();
        (value, grad, rho)
    }

    /// Projected gradient ascent on the dual with backtracking; stops at a
    /// relative primal-dual gap below `tol` and returns the feasible density.
    fn solve(&self, lambda: &mut Vec<f64>, tol: f64, cap: usize) -> Result<(Vec<f64>, usize), ModulusError> {
        let mut step = 1.0;
        let (mut val, mut grad, mut rho) = self.dual(lambda);
        for it in 0..cap {
            let lens = self.lengths(&rho);
            let shortest = lens.iter().cloned().fold(f64::INFINITY, f64::min);
            if shortest > 0.0 {
                let primal = self.mass(&rho) / shortest.powf(self.p);
                if (primal - val).abs() <= tol * primal.abs().max(1e-300) {
                    // scaled so every active walk has rho-length at least one
                    return Ok((rho.iter().map(|r| r / shortest).collect(), it));
                }
            }
            loop {
                let cand: Vec<f64> = lambda.iter().zip(&grad).map(|(&l, &g)| (l + step * g).max(0.0)).collect();
                let (cval, cgrad, crho) = self.dual(&cand);
                let diff: Vec<f64> = cand.iter().zip(lambda.iter()).map(|(c, l)| c - l).collect();
                let lin: f64 = diff.iter().zip(&grad).map(|(d, g)| d * g).sum();
                let sq: f64 = diff.iter().map(|d| d * d).sum();
                if cval >= val + lin - sq / (2.0 * step) || sq == 0.0 {
                    *lambda = cand;
                    val = cval;
                    grad = cgrad;
                    rho = crho;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
                if step < 1e-300 {
                    return Err(ModulusError::NonConvergence { iterations: it, gap: f64::NAN });
                }
            }
        }
        Err(ModulusError::NonConvergence { iterations: cap, gap: f64::NAN })
    }
}

/// Cutting-plane modulus of `family` with edge measure equal to edge length.
pub fn solve_modulus(space: &Space, family: &CurveFamilySpec, p: f64, tol: f64) -> Result<ModulusResult, ModulusError> {
    if !(p > 1.0) {
        return Err(ModulusError::InvalidExponent(p));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(ModulusError::InvalidFamily(format!("tolerance {tol} outside (0,1)")));
    }
    let fam = Family::compile(space, family)?;
    let empty = |infeasible| ModulusResult {
        value: 0.0,
        rho: Vec::new(),
        p,
        active_paths: Vec::new(),
        certificate_gap: 0.0,
        infeasible,
        iterations: 0,
    };
    if !fam.connected(space) {
        return Ok(empty(true));
    }
    let edge_index: BTreeMap<(usize, usize), usize> =
        space.edges().iter().enumerate().map(|(k, &(a, b, _))| ((a, b), k)).collect();
    let weights: Vec<f64> = space.edges().iter().map(|e| e.2).collect();
    let mut program = Program { weights, rows: Vec::new(), p };
    let mut lambda: Vec<f64> = Vec::new();
    let mut rho_vec = vec![0.0; space.edges().len()];
    let mut active = Vec::new();
    let cap = 10 * space.edges().len().max(1);
    let inner_tol = tol * 0.05;
    for iteration in 0..cap {
        let rho_map: BTreeMap<(usize, usize), f64> =
            space.edges().iter().zip(&rho_vec).map(|(&(a, b, _), &r)| ((a, b), r)).collect();
        let Some((walk, cost)) = cheapest_walk(space, &fam, &rho_map) else {
            return Ok(empty(false));
        };
        if cost >= 1.0 - tol {
            let value = program.mass(&rho_vec);
            let rho = space
                .edges()
                .iter()
                .zip(&rho_vec)
                .filter(|(_, &r)| r > 0.0)
                .map(|(&(a, b, _), &r)| (space.id(a), space.id(b), r))
                .collect();
            return Ok(ModulusResult {
                value,
                rho,
                p,
                active_paths: active,
                certificate_gap: (1.0 - cost).max(0.0),
                infeasible: false,
                iterations: iteration,
            });
        }
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for w in walk.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            let e = edge_index[&key];
            *counts.entry(e).or_insert(0.0) += program.weights[e];
        }
        program.rows.push(counts.into_iter().collect());
        lambda.push(0.0);
        active.push(space.curve_from_indices(&walk));
        let (rho, _) = program.solve(&mut lambda, inner_tol, 200_000)?;
        rho_vec = rho;
    }
    Err(ModulusError::NonConvergence { iterations: cap, gap: f64::NAN })
}

/// The three model families whose modulus has an explicit bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FamilyShape {
    /// Curves in `B(x, 2 lambda d(x,y))` joining the closed `r`-balls at `x` and `y`.
    Connect { x: VertexId, y: VertexId, r: f64 },
    /// Curves in `B(x, radius)` of length at least `ell * radius`.
    Long { x: VertexId, radius: f64, ell: f64 },
    /// Curves in `B(x, radius)` meeting `B(Y, delta * radius)` with length at least `2 delta radius`.
    Touch { x: VertexId, radius: f64, delta: f64, set: Vec<VertexId> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub q: f64,
    pub c1: f64,
    pub lambda: f64,
    /// Multiplier on the lower-bound formula; only trends are meaningful.
    pub constant: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self { q: 3.0, c1: 1.0, lambda: 1.0, constant: 1.0 }
    }
}

fn ball_mask(space: &Space, x: VertexId, r: f64, closed: bool) -> Result<Vec<bool>, MetricError> {
    let row = space.distances_from(x)?;
    Ok(row.iter().map(|&d| if closed { d <= r } else { d < r }).collect())
}

fn mask_of(space: &Space, set: &[VertexId]) -> Result<Vec<bool>, MetricError> {
    let mut m = vec![false; space.len()];
    for i in space.indices(set)? {
        m[i] = true;
    }
    Ok(m)
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

/// Explicit bounds for a family of the given shape: the lower-bound formula
/// for connecting families and the mass of the explicit admissible density
/// for the other two. Sub-families of a shape are accepted.
pub fn analytic_bounds(
    space: &Space,
    family: &CurveFamilySpec,
    p: f64,
    shape: &FamilyShape,
    params: &BoundParams,
) -> Result<(Option<f64>, Option<f64>), ModulusError> {
    let domain = mask_of(space, &family.domain)?;
    let mismatch = |why: &str| Err(ModulusError::ShapeMismatch(why.to_string()));
    match shape {
        FamilyShape::Connect { x, y, r } => {
            let d = space.distance(*x, *y)?;
            let outer = ball_mask(space, *x, 2.0 * params.lambda * d, false)?;
            if domain != outer
                || mask_of(space, &family.connect_from)? != ball_mask(space, *x, *r, true)?
                || mask_of(space, &family.connect_to)? != ball_mask(space, *y, *r, true)?
            {
                return mismatch("connect family must use B(x, 2 lambda d) and the closed r-balls");
            }
            let lower = params.constant * d.powf(params.q - p) * (d / r).powf(-params.q * p);
            Ok((Some(lower), None))
        }
        FamilyShape::Long { x, radius, ell } => {
            let ball = ball_mask(space, *x, *radius, false)?;
            if !subset(&domain, &ball) || family.min_length.is_none_or(|m| m < ell * radius - 1e-12) {
                return mismatch("long family needs domain in B(x,R) and min length >= ell R");
            }
            let density = 1.0 / (ell * radius);
            let upper = space
                .edges()
                .iter()
                .filter(|&&(a, b, _)| ball[a] && ball[b])
                .map(|&(_, _, len)| density.powf(p) * len)
                .sum();
            Ok((None, Some(upper)))
        }
        FamilyShape::Touch { x, radius, delta, set } => {
            let ball = ball_mask(space, *x, *radius, false)?;
            let touches = match &family.neighborhood {
                Some(nb) => nb.mode == NeighborhoodMode::Touch && nb.delta <= delta * radius + 1e-12 && {
                    let mut a = nb.set.clone();
                    let mut b = set.clone();
                    a.sort();
                    b.sort();
                    a == b
                },
                None => false,
            };
            let long_enough = family.min_length.is_some_and(|m| m >= 2.0 * delta * radius - 1e-12);
            if !subset(&domain, &ball) || !touches || !long_enough {
                return mismatch("touch family needs domain in B(x,R), a touch constraint and min length >= 2 delta R");
            }
            let near = if set.is_empty() {
                vec![f64::INFINITY; space.len()]
            } else {
                space.distances_to_set(&space.indices(set)?)
            };
            let widened: Vec<bool> = near.iter().map(|&d| d < 2.0 * delta * radius).collect();
            let density = 1.0 / (delta * radius);
            let upper = space
                .edges()
                .iter()
                .filter(|&&(a, b, _)| ball[a] && ball[b] && (widened[a] || widened[b]))
                .map(|&(_, _, len)| density.powf(p) * len)
                .sum();
            Ok((None, Some(upper)))
        }
    }
}

/// Discrete p-capacity between `e` and `f` inside `domain`: minimum of
/// `sum |u(a)-u(b)|^p len^(1-p)` over `u = 1` on `e`, `u = 0` on `f`.
/// Coordinate descent; meant for tiny cross-checks.
pub fn p_capacity(space: &Space, domain: &[VertexId], e: &[VertexId], f: &[VertexId], p: f64, sweeps: usize) -> Result<f64, ModulusError> {
    let inside = mask_of(space, domain)?;
    let fixed_hi = mask_of(space, e)?;
    let fixed_lo = mask_of(space, f)?;
    let mut u: Vec<f64> = (0..space.len()).map(|v| if fixed_hi[v] { 1.0 } else { 0.0 }).collect();
    let energy_at = |u: &[f64], v: usize, val: f64| -> f64 {
        space
            .neighbors(v)
            .iter()
            .filter(|&&(w, _)| inside[w])
            .map(|&(w, len)| (val - u[w]).abs().powf(p) * len.powf(1.0 - p))
            .sum()
    };
    for _ in 0..sweeps {
        for v in 0..space.len() {
            if !inside[v] || fixed_hi[v] || fixed_lo[v] {
                continue;
            }
            // convex in the single coordinate: golden-section on [0,1]
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let m1 = hi - g * (hi - lo);
                let m2 = lo + g * (hi - lo);
                if energy_at(&u, v, m1) <= energy_at(&u, v, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            u[v] = 0.5 * (lo + hi);
        }
    }
    Ok(space
        .edges()
        .iter()
        .filter(|&&(a, b, _)| inside[a] && inside[b])
        .map(|&(a, b, len)| (u[a] - u[b]).abs().powf(p) * len.powf(1.0 - p))
        .sum())
}

/// Builds a family joining two vertex sets inside a domain.
pub fn connecting_family(domain: &[VertexId], from: &[VertexId], to: &[VertexId]) -> CurveFamilySpec {
    CurveFamilySpec {
        domain: domain.to_vec(),
        connect_from: from.to_vec(),
        connect_to: to.to_vec(),
        min_length: None,
        max_length: None,
        neighborhood: None,
    }
}

/// rho-length of a curve under a result's density.
pub fn rho_length(space: &Space, result: &ModulusResult, curve: &Curve<f64>) -> Result<f64, MetricError> {
    let map: BTreeMap<(VertexId, VertexId), f64> = result.rho.iter().map(|&(a, b, r)| ((a, b), r)).collect();
    let mut total = 0.0;
    for w in curve.points().windows(2) {
        let key = (w[0].min(w[1]), w[0].max(w[1]));
        let len = space.edge_length(space.index(w[0])?, space.index(w[1])?).unwrap_or(0.0);
        total += map.get(&key).copied().unwrap_or(0.0) * len;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_core::{EdgeRecord, VertexRecord};
    use crate::space_gallery::grid_space;

    /// `k` disjoint paths of `s` unit edges between separate start and end vertices.
    pub(crate) fn parallel_paths(k: usize, s: usize) -> (Space, Vec<VertexId>, Vec<VertexId>) {
        let mut vs = Vec::new();
        let mut es = Vec::new();
        let per = s + 1;
        for j in 0..k {
            for i in 0..per {
                vs.push(VertexRecord { id: VertexId(j * per + i), coords: None, measure: 1.0 });
                if i > 0 {
                    es.push(EdgeRecord { u: VertexId(j * per + i - 1), v: VertexId(j * per + i), len: 1.0 });
                }
            }
        }
        // a hub joins the paths' starts with long detours so the space is
        // connected without adding cheap alternatives inside the domain
        let hub = VertexId(k * per);
        vs.push(VertexRecord { id: hub, coords: None, measure: 1.0 });
        for j in 0..k {
            es.push(EdgeRecord { u: hub, v: VertexId(j * per), len: 1.0 });
        }
        let space = Space::new(1.0, vs, es).unwrap();
        let from = (0..k).map(|j| VertexId(j * per)).collect();
        let to = (0..k).map(|j| VertexId(j * per + s)).collect();
        (space, from, to)
    }

    fn without_hub(space: &Space) -> Vec<VertexId> {
        let hub = *space.ids().last().unwrap();
        space.ids().iter().copied().filter(|&v| v != hub).collect()
    }

    #[test]
    fn single_path_closed_form() {
        for s in [4usize, 8] {
            for p in [1.5, 2.0, 3.0] {
                let (g, from, to) = parallel_paths(1, s);
                let fam = connecting_family(&without_hub(&g), &from, &to);
                let res = solve_modulus(&g, &fam, p, 1e-4).unwrap();
                let exact = (s as f64).powf(1.0 - p);
                assert!((res.value - exact).abs() <= 0.01 * exact, "s={s} p={p}: {} vs {exact}", res.value);
                assert!(res.certificate_gap <= 1e-4);
                for c in &res.active_paths {
                    assert!(rho_length(&g, &res, c).unwrap() >= 1.0 - 1e-4);
                }
            }
        }
    }

    #[test]
    fn disjoint_paths_add_up() {
        let (g, from, to) = parallel_paths(3, 4);
        let fam = connecting_family(&without_hub(&g), &from, &to);
        let res = solve_modulus(&g, &fam, 2.0, 1e-4).unwrap();
        assert!((res.value - 3.0 / 4.0).abs() <= 0.01 * 0.75, "{}", res.value);
    }

    #[test]
    fn disconnected_family_is_flagged() {
        let (g, from, to) = parallel_paths(2, 3);
        // domain keeps only the first path, target on the second
        let first: Vec<VertexId> = (0..4).map(VertexId).chain([to[1]]).collect();
        let fam = connecting_family(&first, &from[..1], &to[1..]);
        let res = solve_modulus(&g, &fam, 2.0, 1e-3).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.infeasible);
    }

    #[test]
    fn capacity_matches_on_tiny_grid() {
        let g = grid_space(2, 3, 1.0).unwrap();
        let all = g.ids().to_vec();
        let left: Vec<VertexId> = [0, 3, 6].map(VertexId).to_vec();
        let right: Vec<VertexId> = [2, 5, 8].map(VertexId).to_vec();
        let fam = connecting_family(&all, &left, &right);
        let res = solve_modulus(&g, &fam, 2.0, 1e-4).unwrap();
        let cap = p_capacity(&g, &all, &left, &right, 2.0, 200).unwrap();
        assert!((res.value - cap).abs() <= 0.01 * cap, "{} vs {}", res.value, cap);
        assert!((cap - 1.5).abs() < 1e-6);
    }

    #[test]
    fn long_family_under_explicit_bound() {
        let g = grid_space(3, 5, 1.0).unwrap();
        let x = VertexId(62);
        let (radius, ell) = (3.0, 2.0);
        let ball = g.ball(x, radius).unwrap();
        let from = vec![ball[0]];
        let to = vec![*ball.last().unwrap()];
        let mut fam = connecting_family(&ball, &from, &to);
        fam.min_length = Some(ell * radius);
        let res = solve_modulus(&g, &fam, 2.0, 1e-3).unwrap();
        let (_, upper) = analytic_bounds(&g, &fam, 2.0, &FamilyShape::Long { x, radius, ell }, &BoundParams::default()).unwrap();
        assert!(res.value <= upper.unwrap() * (1.0 + 1e-3));
        for c in &res.active_paths {
            assert!(c.length() >= ell * radius);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = grid_space(2, 4, 1.0).unwrap();
        let fam = connecting_family(g.ids(), &[VertexId(0)], &[VertexId(15)]);
        let shape = FamilyShape::Long { x: VertexId(5), radius: 2.0, ell: 1.0 };
        assert!(matches!(analytic_bounds(&g, &fam, 2.0, &shape, &BoundParams::default()), Err(ModulusError::ShapeMismatch(_))));
    }
}
