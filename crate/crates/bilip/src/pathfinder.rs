//! Paths that keep their distance from an obstacle set.
//!
//! [`clearance_path`] searches directly for a short path with the largest
//! achievable clearance; [`uniform_connect`] chains such paths through
//! porosity holes at dyadic scales around both endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_core::{Curve, MetricError, VertexId};
use crate::{Path, Space};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("no path from {from} to {to} avoids the obstacles within budget {budget} after {relaxations} relaxations")]
    NoClearancePath { from: VertexId, to: VertexId, budget: f64, relaxations: u32 },
    #[error("no porosity witness at scale {scale} around {center}")]
    PorosityWitnessNotFound { center: VertexId, scale: f64 },
    #[error("endpoint {0} lies within half a resolution step of the obstacles")]
    EndpointBlocked(VertexId),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearanceParams {
    /// Paths stay inside `B(x, 2 * lambda * d(x,y))`.
    pub lambda: f64,
    /// Length budget relative to `d(x,y)`.
    pub length_factor: f64,
    /// Largest clearance sought, relative to `d(x,y)`.
    pub clearance_factor: f64,
    pub relax_factor: f64,
    pub max_relaxations: u32,
}

impl Default for ClearanceParams {
    fn default() -> Self {
        Self { lambda: 1.0, length_factor: 4.0, clearance_factor: 0.25, relax_factor: 2.0, max_relaxations: 6 }
    }
}

impl ClearanceParams {
    /// Budget and clearance from the exponent shapes with unit constants:
    /// `max(1, (d/s)^q)` and `min(1, (s/d)^e)` where `s` is the endpoints'
    /// distance to the obstacles and `e = (qp + q - p - a) / (q - p - a)`.
    /// When `q - p - a <= 0` no clearance is sought beyond one resolution step.
    pub fn from_exponents(q: f64, p: f64, alpha: f64, d: f64, s: f64, lambda: f64) -> Self {
        let ratio = if s > 0.0 { d / s } else { f64::INFINITY };
        let length_factor = ratio.powf(q).clamp(1.0, 1e6);
        let gap = q - p - alpha;
        let clearance_factor = if gap > 0.0 {
            let e = (q * p + q - p - alpha) / gap;
            (1.0 / ratio).powf(e).min(1.0)
        } else {
            0.0
        };
        Self { lambda, length_factor, clearance_factor, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PathError> {
        let ok = self.lambda >= 1.0
            && self.length_factor > 0.0
            && self.clearance_factor >= 0.0
            && self.relax_factor > 1.0;
        if ok {
            Ok(())
        } else {
            Err(PathError::InvalidParams(format!("{self:?}")))
        }
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

/// Shortest path from `a` to `b` through vertices with `allowed[v]`, stopping
/// early once `b` is settled. Ties go to the smaller predecessor index.
pub fn masked_shortest_path(space: &Space, a: usize, b: usize, allowed: &[bool]) -> Option<(Vec<usize>, f64)> {
    if !allowed[a] || !allowed[b] {
        return None;
    }
    let n = space.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[a] = 0.0;
    heap.push(Entry(0.0, a));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == b {
            break;
        }
        for &(v, len) in space.neighbors(u) {
            if !allowed[v] {
                continue;
            }
            let nd = d + len;
            let tol = 1e-12 * (1.0 + nd);
            if nd < dist[v] - tol {
                dist[v] = nd;
                pred[v] = u;
                heap.push(Entry(nd, v));
            } else if (nd - dist[v]).abs() <= tol && u < pred[v] {
                pred[v] = u;
            }
        }
    }
    if !dist[b].is_finite() {
        return None;
    }
    let mut path = vec![b];
    let mut cur = b;
    while cur != a {
        cur = pred[cur];
        path.push(cur);
    }
    path.reverse();
    Some((path, dist[b]))
}

/// Outcome of a clearance search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearancePath {
    pub curve: Path,
    /// Smallest distance to the obstacles along the curve, outside the endpoint zones.
    pub clearance: f64,
    pub length_budget: f64,
    pub relaxations: u32,
}

/// Search problem for [`ClearanceSearch::run`]: hard mask, obstacle distances and
/// zones near the endpoints where clearance is not enforced.
pub struct ClearanceSearch<'a> {
    pub space: &'a Space,
    pub allowed: &'a [bool],
    pub obstacle_distance: &'a [f64],
    pub exempt: &'a [bool],
}

impl ClearanceSearch<'_> {
    fn mask_at(&self, level: f64) -> Vec<bool> {
        (0..self.space.len())
            .map(|v| self.allowed[v] && (self.exempt[v] || self.obstacle_distance[v] >= level))
            .collect()
    }

    /// Largest clearance level up to `max_clearance` admitting a path of length
    /// at most `budget`; the budget grows geometrically when even the floor fails.
    pub fn run(
        &self,
        a: usize,
        b: usize,
        max_clearance: f64,
        budget: f64,
        params: &ClearanceParams,
    ) -> Result<ClearancePath, PathError> {
        let mut levels: Vec<f64> = (0..self.space.len())
            .filter(|&v| self.allowed[v] && !self.exempt[v])
            .map(|v| self.obstacle_distance[v])
            .filter(|&d| d > 0.0 && d.is_finite())
            .collect();
        levels.sort_by(|x, y| x.partial_cmp(y).unwrap());
        levels.dedup();
        let floor = levels.first().copied().unwrap_or(0.0);
        levels.retain(|&d| d <= max_clearance.max(floor));
        if levels.is_empty() {
            levels.push(floor);
        }
        let mut budget = budget;
        for relaxations in 0..=params.max_relaxations {
            let attempt = |level: f64| {
                masked_shortest_path(self.space, a, b, &self.mask_at(level)).filter(|(_, len)| *len <= budget * (1.0 + 1e-12))
            };
            if let Some(mut best) = attempt(levels[0]) {
                let mut best_level = levels[0];
                let (mut lo, mut hi) = (0usize, levels.len());
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    match attempt(levels[mid]) {
                        Some(found) => {
                            lo = mid;
                            best = found;
                            best_level = levels[mid];
                        }
                        None => hi = mid,
                    }
                }
                let curve = self.space.curve_from_indices(&best.0);
                let clearance = best
                    .0
                    .iter()
                    .filter(|&&v| !self.exempt[v])
                    .map(|&v| self.obstacle_distance[v])
                    .fold(f64::INFINITY, f64::min);
                debug_assert!(clearance >= best_level || clearance.is_infinite());
                return Ok(ClearancePath { curve, clearance, length_budget: budget, relaxations });
            }
            budget *= params.relax_factor;
        }
        Err(PathError::NoClearancePath {
            from: self.space.id(a),
            to: self.space.id(b),
            budget,
            relaxations: params.max_relaxations,
        })
    }
}

fn obstacle_distances(space: &Space, obstacles: &[usize]) -> Vec<f64> {
    if obstacles.is_empty() {
        vec![f64::INFINITY; space.len()]
    } else {
        space.distances_to_set(obstacles)
    }
}

/// Short path from `x` to `y` avoiding `obstacles`, with the largest clearance
/// up to `clearance_factor * d(x,y)`, inside `B(x, 2 lambda d(x,y))`.
pub fn clearance_path(
    space: &Space,
    x: VertexId,
    y: VertexId,
    obstacles: &[VertexId],
    params: &ClearanceParams,
) -> Result<ClearancePath, PathError> {
    params.validate()?;
    let (a, b) = (space.index(x)?, space.index(y)?);
    let obs = space.indices(obstacles)?;
    let dist_y = obstacle_distances(space, &obs);
    let h = space.resolution();
    for (v, id) in [(a, x), (b, y)] {
        if dist_y[v] < 0.5 * h {
            return Err(PathError::EndpointBlocked(id));
        }
    }
    let d = space.dist_idx(a, b);
    if a == b {
        return Ok(ClearancePath { curve: Curve::single(x), clearance: dist_y[a], length_budget: 0.0, relaxations: 0 });
    }
    let row_a = space.distances_from_index(a);
    let row_b = space.distances_from_index(b);
    let reach = 2.0 * params.lambda * d;
    let allowed: Vec<bool> = (0..space.len()).map(|v| row_a[v] < reach.max(d + h) && dist_y[v] >= 0.5 * h).collect();
    let exempt: Vec<bool> = (0..space.len()).map(|v| row_a[v] < 2.0 * h || row_b[v] < 2.0 * h).collect();
    let search = ClearanceSearch { space, allowed: &allowed, obstacle_distance: &dist_y, exempt: &exempt };
    search.run(a, b, params.clearance_factor * d, params.length_factor * d, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformParams {
    pub p0: f64,
    pub depth_cap: u32,
    pub clearance: ClearanceParams,
}

impl Default for UniformParams {
    fn default() -> Self {
        Self { p0: 2.0, depth_cap: 16, clearance: ClearanceParams::default() }
    }
}

/// Witness in the annulus `rho/2 <= d(c, .) < rho` whose `rho/(2 p0)`-ball stays
/// in the annulus and misses the obstacles. `Ok(None)` when the annulus holds no
/// vertex at this resolution.
fn annulus_witness(
    space: &Space,
    center: usize,
    other: usize,
    rho: f64,
    p0: f64,
    dist_y: &[f64],
) -> Result<Option<usize>, PathError> {
    let row_c = space.distances_from_index(center);
    let row_o = space.distances_from_index(other);
    let annulus: Vec<usize> = (0..space.len()).filter(|&v| row_c[v] >= 0.5 * rho && row_c[v] < rho).collect();
    if annulus.is_empty() {
        return Ok(None);
    }
    let hole = rho / (2.0 * p0);
    let mut best: Option<(usize, f64, f64)> = None;
    for &z in &annulus {
        if dist_y[z] < hole.max(0.5 * space.resolution()) {
            continue;
        }
        let row_z = space.distances_from_index(z);
        // containment is checked against the annulus widened by one step
        let h = space.resolution();
        let inside = (0..space.len()).all(|v| !(row_z[v] < hole) || (row_c[v] >= 0.5 * rho - h && row_c[v] < rho + h));
        if !inside {
            continue;
        }
        let score = dist_y[z];
        let detour = row_c[z] + row_o[z];
        let better = match best {
            None => true,
            Some((_, s, dt)) => score > s || (score == s && detour < dt),
        };
        if better {
            best = Some((z, score, detour));
        }
    }
    match best {
        Some((z, _, _)) => Ok(Some(z)),
        None => Err(PathError::PorosityWitnessNotFound { center: space.id(center), scale: rho }),
    }
}

/// Curve from `x` to `y` through porosity holes at dyadic scales, avoiding `obstacles`.
pub fn uniform_connect(
    space: &Space,
    obstacles: &[VertexId],
    x: VertexId,
    y: VertexId,
    p0: f64,
    depth_cap: u32,
) -> Result<Path, PathError> {
    uniform_connect_with(space, obstacles, x, y, &UniformParams { p0, depth_cap, ..UniformParams::default() })
}

pub fn uniform_connect_with(
    space: &Space,
    obstacles: &[VertexId],
    x: VertexId,
    y: VertexId,
    params: &UniformParams,
) -> Result<Path, PathError> {
    params.clearance.validate()?;
    if !(params.p0 >= 1.0) {
        return Err(PathError::InvalidParams(format!("p0 = {} < 1", params.p0)));
    }
    let (a, b) = (space.index(x)?, space.index(y)?);
    let obs = space.indices(obstacles)?;
    let h = space.resolution();
    let dist_y = obstacle_distances(space, &obs);
    for (v, id) in [(a, x), (b, y)] {
        if dist_y[v] < 0.5 * h {
            return Err(PathError::EndpointBlocked(id));
        }
    }
    if a == b {
        return Ok(Curve::single(x));
    }
    if obs.is_empty() {
        return Ok(space.geodesic(x, y)?);
    }
    let r = space.dist_idx(a, b);
    let depth = params.depth_cap.min((r / h).log2().floor().max(0.0) as u32);
    // middle witness: hole of radius r/(2 p0) away from both half-balls
    let row_a = space.distances_from_index(a);
    let row_b = space.distances_from_index(b);
    let hole = r / (2.0 * params.p0);
    let middle_ok = |v: usize| row_a[v] < r && row_a[v] >= 0.5 * r && row_b[v] >= 0.5 * r;
    let middle_loose = |v: usize| row_a[v] < r + h && row_a[v] >= 0.5 * r - h && row_b[v] >= 0.5 * r - h;
    let mut z0: Option<(usize, f64, f64)> = None;
    for v in 0..space.len() {
        if !middle_ok(v) || dist_y[v] < hole.max(0.5 * h) {
            continue;
        }
        let row_v = space.distances_from_index(v);
        if !(0..space.len()).all(|u| !(row_v[u] < hole) || middle_loose(u)) {
            continue;
        }
        let detour = row_a[v] + row_b[v];
        if z0.is_none_or(|(_, s, dt)| dist_y[v] > s || (dist_y[v] == s && detour < dt)) {
            z0 = Some((v, dist_y[v], detour));
        }
    }
    let z0 = z0.ok_or(PathError::PorosityWitnessNotFound { center: x, scale: r })?.0;
    let mut toward_x = Vec::new();
    let mut toward_y = Vec::new();
    for n in 1..=depth {
        let rho = r / 2f64.powi(n as i32);
        match annulus_witness(space, a, b, rho, params.p0, &dist_y)? {
            Some(z) => toward_x.push(z),
            None => break,
        }
    }
    for n in 1..=depth {
        let rho = r / 2f64.powi(n as i32);
        match annulus_witness(space, b, a, rho, params.p0, &dist_y)? {
            Some(z) => toward_y.push(z),
            None => break,
        }
    }
    let mut chain = vec![a];
    chain.extend(toward_x.iter().rev());
    chain.push(z0);
    chain.extend(toward_y.iter());
    chain.push(b);
    chain.dedup();

    let free: Vec<bool> = dist_y.iter().map(|&d| d >= 0.5 * h).collect();
    let mut curve = Curve::single(x);
    let last = chain.len() - 1;
    for (k, w) in chain.windows(2).enumerate() {
        let (u, v) = (w[0], w[1]);
        // the outermost hops close the gap to the endpoints with plain shortest paths
        let piece = if k == 0 || k + 1 == last {
            let (path, _) = masked_shortest_path(space, u, v, &free).ok_or(PathError::NoClearancePath {
                from: space.id(u),
                to: space.id(v),
                budget: f64::INFINITY,
                relaxations: 0,
            })?;
            space.curve_from_indices(&path)
        } else {
            clearance_path(space, space.id(u), space.id(v), obstacles, &params.clearance)?.curve
        };
        curve = curve.concat(&piece)?;
    }
    Ok(curve)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityRecord {
    pub x: VertexId,
    pub y: VertexId,
    pub distance: f64,
    pub length: f64,
    /// `min_t dist(curve(t), complement) / dist(curve(t), {x,y})`, capped.
    pub min_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityCertificate {
    pub c_hat: f64,
    pub records: Vec<UniformityRecord>,
}

/// Stand-in for an infinite cigar ratio when the domain has no boundary.
pub const RATIO_CAP: f64 = 1e9;

impl UniformityCertificate {
    pub fn check(&self) -> bool {
        self.records.iter().all(|r| {
            r.length <= self.c_hat * r.distance * (1.0 + 1e-9) && r.min_ratio * self.c_hat >= 1.0 - 1e-9
        })
    }
}

/// Cigar ratio of `curve` relative to the complement distances `dist_out`.
pub fn cigar_ratio(space: &Space, curve: &Path, dist_out: &[f64]) -> Result<f64, MetricError> {
    let a = space.index(curve.first())?;
    let b = space.index(curve.last())?;
    let row_a = space.distances_from_index(a);
    let row_b = space.distances_from_index(b);
    let mut ratio = RATIO_CAP;
    for &p in curve.points() {
        let v = space.index(p)?;
        let near = row_a[v].min(row_b[v]);
        if near > 0.0 {
            ratio = ratio.min(dist_out[v] / near);
        }
    }
    Ok(ratio)
}

/// Runs [`uniform_connect_with`] on seeded pairs of `domain` with the
/// complement as obstacles and aggregates the worst constants.
pub fn uniformity_report(
    space: &Space,
    domain: &[VertexId],
    pair_count: usize,
    seed: u64,
    params: &UniformParams,
) -> Result<UniformityCertificate, PathError> {
    if domain.len() < 2 {
        return Err(MetricError::EmptySet.into());
    }
    let inside = {
        let mut mask = vec![false; space.len()];
        for i in space.indices(domain)? {
            mask[i] = true;
        }
        mask
    };
    let complement: Vec<usize> = (0..space.len()).filter(|&v| !inside[v]).collect();
    let obstacles: Vec<VertexId> = complement.iter().map(|&v| space.id(v)).collect();
    let dist_out = if complement.is_empty() {
        vec![f64::INFINITY; space.len()]
    } else {
        space.distances_to_set(&complement)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(VertexId, VertexId)> = (0..pair_count)
        .map(|_| {
            let i = rng.gen_range(0..domain.len());
            let mut j = rng.gen_range(0..domain.len() - 1);
            if j >= i {
                j += 1;
            }
            (domain[i], domain[j])
        })
        .collect();
    let records = pairs
        .into_par_iter()
        .map(|(x, y)| {
            // witnesses can be missing at the smallest scales; measure the direct search then
            let curve = match uniform_connect_with(space, &obstacles, x, y, params) {
                Err(PathError::PorosityWitnessNotFound { .. }) => {
                    clearance_path(space, x, y, &obstacles, &params.clearance)?.curve
                }
                other => other?,
            };
            let distance = space.distance(x, y)?;
            let min_ratio = cigar_ratio(space, &curve, &dist_out)?;
            Ok(UniformityRecord { x, y, distance, length: curve.length(), min_ratio })
        })
        .collect::<Result<Vec<_>, PathError>>()?;
    let c_hat = records.iter().fold(1.0f64, |c, r| c.max(r.length / r.distance).max(1.0 / r.min_ratio));
    Ok(UniformityCertificate { c_hat, records })
}
