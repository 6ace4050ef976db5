//! Test spaces and sampled estimators for regularity, porosity and
//! homogeneity constants.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_core::{EdgeRecord, MetricError, VertexId, VertexRecord};
use crate::Space;

pub const GRID_CAP: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("{requested} vertices exceed the cap of {cap}")]
    SizeOverflow { requested: u128, cap: usize },
    #[error("hole of radius {0} disconnects the space")]
    DisconnectedResult(f64),
    #[error("radius range [{0}, {1}] is narrower than a factor two")]
    RangeTooNarrow(f64, f64),
    #[error("no porosity candidate works at y={y}, r={r}")]
    NoFeasibleP { y: VertexId, r: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn lattice_size(dim: usize, side: usize, cap: usize) -> Result<usize, GalleryError> {
    let requested = (side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(GalleryError::SizeOverflow { requested, cap });
    }
    Ok(requested as usize)
}

fn unflatten(mut id: usize, dim: usize, side: usize) -> Vec<usize> {
    let mut c = Vec::with_capacity(dim);
    for _ in 0..dim {
        c.push(id % side);
        id /= side;
    }
    c
}

/// Lattice `{0..side-1}^dim` scaled by `h`; ids are row-major with the first
/// coordinate fastest.
pub fn grid_space(dim: usize, side: usize, h: f64) -> Result<Space, GalleryError> {
    grid_space_capped(dim, side, h, GRID_CAP)
}

pub fn grid_space_capped(dim: usize, side: usize, h: f64, cap: usize) -> Result<Space, GalleryError> {
    if dim == 0 || side < 2 || !(h > 0.0) {
        return Err(GalleryError::InvalidParameter("need dim >= 1, side >= 2, h > 0".into()));
    }
    let n = lattice_size(dim, side, cap)?;
    let measure = h.powi(dim as i32);
    let mut vertices = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n * dim);
    for id in 0..n {
        let c = unflatten(id, dim, side);
        vertices.push(VertexRecord {
            id: VertexId(id),
            coords: Some(c.iter().map(|&x| x as f64 * h).collect()),
            measure,
        });
        let mut stride = 1;
        for &x in &c {
            if x + 1 < side {
                edges.push(EdgeRecord { u: VertexId(id), v: VertexId(id + stride), len: h });
            }
            stride *= side;
        }
    }
    Ok(Space::new(h, vertices, edges)?)
}

/// Id of the lattice point with integer coordinates `c` in a grid of `side`.
pub fn grid_id(c: &[usize], side: usize) -> VertexId {
    VertexId(c.iter().rev().fold(0, |acc, &x| acc * side + x))
}

/// Two `dim`-dimensional sheets sharing one coordinate line, with a hole
/// punched around the midpoint of that line.
#[derive(Clone, Debug)]
pub struct PlanePair {
    pub space: Space,
    /// Shared line vertices that survived the hole, in order along the line.
    pub line: Vec<VertexId>,
    /// Integer position of each surviving line vertex along the line.
    pub line_positions: Vec<usize>,
    /// Position of the hole center along the line.
    pub center_position: usize,
    pub side: usize,
    pub dim: usize,
}

impl PlanePair {
    /// Id of the vertex with sheet coordinates `c` (`c[0]` along the line) on sheet 0 or 1.
    pub fn vertex(&self, sheet: usize, c: &[usize]) -> Option<VertexId> {
        let id = plane_pair_id(sheet, c, self.side, self.dim);
        self.space.contains(id).then_some(id)
    }
}

fn plane_pair_id(sheet: usize, c: &[usize], side: usize, dim: usize) -> VertexId {
    let mid = side / 2;
    let on_line = c[1..].iter().all(|&x| x == mid);
    let id = grid_id(c, side);
    if sheet == 0 || on_line {
        id
    } else {
        VertexId(id.0 + side.pow(dim as u32))
    }
}

pub fn plane_pair_space(dim: usize, side: usize, h: f64, hole_radius: f64) -> Result<PlanePair, GalleryError> {
    if dim < 2 || side < 3 || !(h > 0.0) || !(hole_radius >= 0.0) {
        return Err(GalleryError::InvalidParameter("need dim >= 2, side >= 3, h > 0, hole_radius >= 0".into()));
    }
    let per_sheet = lattice_size(dim, side, GRID_CAP / 2)?;
    let ambient = 2 * dim - 1;
    let mid = side / 2;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for sheet in 0..2 {
        for flat in 0..per_sheet {
            let c = unflatten(flat, dim, side);
            let id = plane_pair_id(sheet, &c, side, dim);
            let on_line = c[1..].iter().all(|&x| x == mid);
            if sheet == 0 || !on_line {
                let mut coords = vec![0.0; ambient];
                coords[0] = c[0] as f64 * h;
                let offset = if sheet == 0 { 1 } else { dim };
                for k in 1..dim {
                    coords[offset + k - 1] = (c[k] as f64 - mid as f64) * h;
                }
                vertices.push(VertexRecord { id, coords: Some(coords), measure: h.powi(dim as i32) });
            }
            for k in 0..dim {
                if c[k] + 1 < side {
                    let mut nb = c.clone();
                    nb[k] += 1;
                    let other = plane_pair_id(sheet, &nb, side, dim);
                    let both_line = on_line && nb[1..].iter().all(|&x| x == mid);
                    if sheet == 0 || !both_line {
                        edges.push(EdgeRecord { u: id, v: other, len: h });
                    }
                }
            }
        }
    }
    let full = Space::new(h, vertices, edges)?;
    let mut center = vec![mid; dim];
    center[0] = mid;
    let center_id = grid_id(&center, side);
    let dist = full.distances_from(center_id)?;
    let keep: Vec<bool> = dist.iter().map(|&d| !(d < hole_radius)).collect();
    let space = full.induced(&keep)?;
    if !space.is_connected() {
        return Err(GalleryError::DisconnectedResult(hole_radius));
    }
    let mut line = Vec::new();
    let mut line_positions = Vec::new();
    for x in 0..side {
        let mut c = vec![mid; dim];
        c[0] = x;
        let id = grid_id(&c, side);
        if space.contains(id) {
            line.push(id);
            line_positions.push(x);
        }
    }
    Ok(PlanePair { space, line, line_positions, center_position: mid, side, dim })
}

/// Cycle of `circumference` vertices times a path of `length` vertices.
pub fn cylinder_space(circumference: usize, length: usize, h: f64) -> Result<Space, GalleryError> {
    if circumference < 3 || length < 2 || !(h > 0.0) {
        return Err(GalleryError::InvalidParameter("need circumference >= 3, length >= 2".into()));
    }
    let _ = lattice_size(2, circumference.max(length), GRID_CAP)?;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for z in 0..length {
        for a in 0..circumference {
            let id = z * circumference + a;
            let angle = std::f64::consts::TAU * a as f64 / circumference as f64;
            let radius = h * circumference as f64 / std::f64::consts::TAU;
            vertices.push(VertexRecord {
                id: VertexId(id),
                coords: Some(vec![radius * angle.cos(), radius * angle.sin(), z as f64 * h]),
                measure: h * h,
            });
            edges.push(EdgeRecord { u: VertexId(id), v: VertexId(z * circumference + (a + 1) % circumference), len: h });
            if z + 1 < length {
                edges.push(EdgeRecord { u: VertexId(id), v: VertexId(id + circumference), len: h });
            }
        }
    }
    Ok(Space::new(h, vertices, edges)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityFit {
    #[serde(rename = "Q_hat")]
    pub q_hat: f64,
    #[serde(rename = "C1_hat")]
    pub c1_hat: f64,
    pub r_range: (f64, f64),
    pub residual: f64,
    pub samples: Vec<(VertexId, f64, f64)>,
}

fn ball_measure(space: &Space, row: &[f64], r: f64) -> f64 {
    row.iter().enumerate().filter(|&(_, &d)| d < r).map(|(i, _)| space.measure_at(i)).sum()
}

/// Radii spaced by the resolution when that gives at least three values,
/// otherwise eight log-spaced radii.
fn sample_radii(space: &Space, r_min: f64, r_max: f64) -> Vec<f64> {
    let h = space.resolution();
    let steps = ((r_max - r_min) / h + 1e-9).floor() as usize;
    if (2..=64).contains(&steps) {
        (0..=steps).map(|k| r_min + k as f64 * h).collect()
    } else {
        let ratio = r_max / r_min;
        (0..8).map(|k| r_min * ratio.powf(k as f64 / 7.0)).collect()
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Log-log fit of ball measure against radius. Centers are drawn from the
/// vertices whose `r_max`-ball carries at least half the largest such measure,
/// which keeps truncated boundary balls from biasing the exponent.
pub fn regularity_fit(
    space: &Space,
    sample_count: usize,
    r_min: f64,
    r_max: f64,
    seed: u64,
) -> Result<RegularityFit, GalleryError> {
    if !(r_min > 0.0) || r_max < 2.0 * r_min {
        return Err(GalleryError::RangeTooNarrow(r_min, r_max));
    }
    if r_min < space.resolution() {
        return Err(GalleryError::InvalidParameter("r_min below the resolution".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..space.len()).collect();
    pool.shuffle(&mut rng);
    pool.truncate((sample_count * 4).max(sample_count).min(space.len()));
    pool.sort_unstable();
    let outer: Vec<f64> = pool.iter().map(|&i| ball_measure(space, &space.distances_from_index(i), r_max)).collect();
    let top = outer.iter().cloned().fold(0.0, f64::max);
    let mut centers: Vec<usize> = pool.iter().zip(&outer).filter(|&(_, &m)| m >= 0.5 * top).map(|(&i, _)| i).collect();
    centers.shuffle(&mut rng);
    centers.truncate(sample_count.max(1));
    centers.sort_unstable();
    let radii = sample_radii(space, r_min, r_max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut samples = Vec::new();
    for &c in &centers {
        let row = space.distances_from_index(c);
        for &r in &radii {
            let m = ball_measure(space, &row, r);
            xs.push(r.ln());
            ys.push(m.ln());
            samples.push((space.id(c), r, m));
        }
    }
    let (q_hat, intercept) = least_squares(&xs, &ys);
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - q_hat * x).abs()).fold(0.0, f64::max);
    let c1_hat = samples
        .iter()
        .map(|&(_, r, m)| {
            let model = r.powf(q_hat);
            (m / model).max(model / m)
        })
        .fold(1.0, f64::max);
    Ok(RegularityFit { q_hat, c1_hat, r_range: (r_min, r_max), residual, samples })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorosityWitness {
    pub y: VertexId,
    pub r: f64,
    pub x: VertexId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub p0_hat: f64,
    pub witnesses: Vec<PorosityWitness>,
}

pub const DEFAULT_P_CANDIDATES: [f64; 10] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 32.0];

/// Exact witness search: the point of `B(y,r)` farthest from `Y` whose
/// `r/p`-ball stays inside `B(y,r)`, accepted when that ball misses `Y`.
pub fn porosity_witness(space: &Space, dist_to_y: &[f64], y: usize, r: f64, p: f64) -> Option<usize> {
    let row_y = space.distances_from_index(y);
    let mut candidates: Vec<usize> = (0..space.len()).filter(|&i| row_y[i] < r).collect();
    candidates.sort_by(|&a, &b| dist_to_y[b].partial_cmp(&dist_to_y[a]).unwrap().then(a.cmp(&b)));
    let inner = r / p;
    for x in candidates {
        if dist_to_y[x] < inner {
            return None;
        }
        let row_x = space.distances_from_index(x);
        let inside = row_x.iter().zip(row_y.iter()).all(|(&dx, &dy)| !(dx < inner) || dy < r);
        if inside {
            return Some(x);
        }
    }
    None
}

/// Dyadic radii `2h, 4h, ...` up to half the diameter estimate.
fn probe_radii(space: &Space, around: usize) -> Vec<f64> {
    let h = space.resolution();
    let far = space.distances_from_index(around).iter().cloned().filter(|d| d.is_finite()).fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut r = 2.0 * h;
    while r <= far.max(2.0 * h) {
        out.push(r);
        r *= 2.0;
    }
    out
}

pub fn porosity_probe(
    space: &Space,
    y_set: &[VertexId],
    p_candidates: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<PorosityReport, GalleryError> {
    if y_set.is_empty() {
        return Err(GalleryError::Metric(MetricError::EmptySet));
    }
    let mut cands = p_candidates.to_vec();
    cands.retain(|&p| p >= 1.0);
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if cands.is_empty() {
        return Err(GalleryError::InvalidParameter("no candidate p >= 1".into()));
    }
    let y_idx = space.indices(y_set)?;
    let dist_to_y = space.distances_to_set(&y_idx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for _ in 0..sample_count.max(1) {
        let y = y_idx[rng.gen_range(0..y_idx.len())];
        let radii = probe_radii(space, y);
        let r = radii[rng.gen_range(0..radii.len())];
        samples.push((y, r));
    }
    samples.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    samples.dedup();
    let mut p0_hat: f64 = cands[0];
    let mut found = Vec::with_capacity(samples.len());
    for &(y, r) in &samples {
        let hit = cands.iter().find_map(|&p| porosity_witness(space, &dist_to_y, y, r, p).map(|x| (p, x)));
        match hit {
            Some((p, x)) => {
                p0_hat = p0_hat.max(p);
                found.push((y, r, x));
            }
            None => return Err(GalleryError::NoFeasibleP { y: space.id(y), r }),
        }
    }
    // re-derive witnesses at the common constant so every one certifies p0_hat
    let witnesses = found
        .iter()
        .map(|&(y, r, x)| {
            let x = porosity_witness(space, &dist_to_y, y, r, p0_hat).unwrap_or(x);
            PorosityWitness { y: space.id(y), r, x: space.id(x) }
        })
        .collect();
    Ok(PorosityReport { p0_hat, witnesses })
}

/// Checks `B(x, r/p) ∩ Y = ∅` and `B(x, r/p) ⊆ B(y, r)` exactly.
pub fn verify_witness(space: &Space, y_set: &[VertexId], w: &PorosityWitness, p: f64) -> Result<bool, GalleryError> {
    let row_x = space.distances_from(w.x)?;
    let row_y = space.distances_from(w.y)?;
    let inner = w.r / p;
    let in_y: Vec<usize> = space.indices(y_set)?;
    let misses = in_y.iter().all(|&i| !(row_x[i] < inner));
    let inside = row_x.iter().zip(row_y.iter()).all(|(&dx, &dy)| !(dx < inner) || dy < w.r);
    Ok(misses && inside)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverRecord {
    pub y: VertexId,
    pub big: f64,
    pub small: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssouadEstimate {
    pub alpha_hat: f64,
    #[serde(rename = "C2_hat")]
    pub c2_hat: f64,
    pub scales: Vec<(f64, f64)>,
    pub records: Vec<CoverRecord>,
}

/// Greedy covers of `B(y,R) ∩ Y` by `r`-balls at `R/r in {2,4,8}`.
pub fn assouad_estimate(
    space: &Space,
    y_set: &[VertexId],
    sample_count: usize,
    seed: u64,
) -> Result<AssouadEstimate, GalleryError> {
    if y_set.is_empty() {
        return Err(GalleryError::Metric(MetricError::EmptySet));
    }
    let y_idx = space.indices(y_set)?;
    let h = space.resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut scales = Vec::new();
    for _ in 0..sample_count.max(1) {
        let y = y_idx[rng.gen_range(0..y_idx.len())];
        let row = space.distances_from_index(y);
        let reach = y_idx.iter().map(|&i| row[i]).fold(0.0, f64::max);
        let mut big = 8.0 * h;
        while big <= reach.max(8.0 * h) {
            let members: Vec<VertexId> = y_idx.iter().filter(|&&i| row[i] < big).map(|&i| space.id(i)).collect();
            for k in [2.0, 4.0, 8.0] {
                let small = big / k;
                let net = space.separated_net(&members, small, &[])?;
                records.push(CoverRecord { y: space.id(y), big, small, count: net.len() });
                scales.push((big, small));
            }
            big *= 2.0;
        }
    }
    scales.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scales.dedup();
    let xs: Vec<f64> = records.iter().map(|r| (r.big / r.small).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| (r.count as f64).ln()).collect();
    let (alpha_hat, _) = least_squares(&xs, &ys);
    let alpha_hat = alpha_hat.max(0.0);
    let c2_hat = records
        .iter()
        .map(|r| r.count as f64 / (r.big / r.small).powf(alpha_hat))
        .fold(f64::MIN_POSITIVE, f64::max);
    Ok(AssouadEstimate { alpha_hat, c2_hat, scales, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids() {
        let g = grid_space(1, 3, 1.0).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges().len(), 2);
        let sq = grid_space(2, 2, 0.5).unwrap();
        assert_eq!(sq.len(), 4);
        assert_eq!(sq.edges().len(), 4);
        assert!(sq.edges().iter().all(|e| e.2 == 0.5));
        assert_eq!(sq.measure_at(0), 0.25);
        assert!(matches!(grid_space_capped(3, 100, 1.0, 1000), Err(GalleryError::SizeOverflow { .. })));
    }

    #[test]
    fn grid_metric_is_scaled_l1() {
        let g = grid_space(3, 4, 0.5).unwrap();
        for a in [0usize, 5, 17, 63] {
            for b in [0usize, 9, 33, 62] {
                let (ca, cb) = (unflatten(a, 3, 4), unflatten(b, 3, 4));
                let l1: usize = ca.iter().zip(&cb).map(|(x, y)| x.abs_diff(*y)).sum();
                assert_eq!(g.distance(VertexId(a), VertexId(b)).unwrap(), 0.5 * l1 as f64);
            }
        }
    }

    #[test]
    fn plane_pair_glue_degree() {
        for dim in [2usize, 3] {
            let pp = plane_pair_space(dim, 5, 1.0, 0.0).unwrap();
            let mid_line = pp.line[2];
            let i = pp.space.index(mid_line).unwrap();
            assert_eq!(pp.space.neighbors(i).len(), 4 * dim - 2);
            assert_eq!(pp.space.len(), 2 * 5usize.pow(dim as u32) - 5);
        }
    }

    #[test]
    fn plane_pair_hole() {
        let pp = plane_pair_space(2, 9, 1.0, 2.0).unwrap();
        let center = grid_id(&[4, 4], 9);
        assert!(!pp.space.contains(center));
        assert!(!pp.space.contains(grid_id(&[5, 4], 9)));
        assert!(pp.space.contains(grid_id(&[6, 4], 9)));
        // mirror points across the hole on the line must detour
        let a = pp.vertex(0, &[2, 4]).unwrap();
        let b = pp.vertex(0, &[6, 4]).unwrap();
        assert!(pp.space.distance(a, b).unwrap() > 4.0);
        assert!(matches!(plane_pair_space(2, 5, 1.0, 10.0), Err(GalleryError::Metric(_)) | Err(GalleryError::DisconnectedResult(_))));
    }

    #[test]
    fn regularity_exponents() {
        let path = grid_space(1, 200, 1.0).unwrap();
        let fit = regularity_fit(&path, 20, 2.0, 32.0, 7).unwrap();
        assert!((fit.q_hat - 1.0).abs() <= 0.2, "path Q_hat {}", fit.q_hat);
        let cube = grid_space(3, 8, 1.0).unwrap();
        let fit = regularity_fit(&cube, 30, 2.0, 4.0, 7).unwrap();
        assert!((fit.q_hat - 3.0).abs() <= 0.3, "cube Q_hat {}", fit.q_hat);
        assert!(fit.c1_hat >= 1.0);
        for &(_, r, m) in &fit.samples {
            let model = r.powf(fit.q_hat);
            assert!(m <= fit.c1_hat * model * (1.0 + 1e-12) && model <= fit.c1_hat * m * (1.0 + 1e-12));
        }
        assert!(matches!(regularity_fit(&cube, 5, 2.0, 3.0, 1), Err(GalleryError::RangeTooNarrow(..))));
    }

    #[test]
    fn porosity_of_point_face_and_everything() {
        let cube = grid_space(3, 9, 1.0).unwrap();
        let center = grid_id(&[4, 4, 4], 9);
        let rep = porosity_probe(&cube, &[center], &DEFAULT_P_CANDIDATES, 12, 3).unwrap();
        assert!(rep.p0_hat <= 4.0, "p0_hat {}", rep.p0_hat);
        for w in &rep.witnesses {
            assert!(verify_witness(&cube, &[center], w, rep.p0_hat).unwrap());
        }
        let face: Vec<VertexId> = (0..81).map(|k| grid_id(&[k % 9, k / 9, 0], 9)).collect();
        let rep = porosity_probe(&cube, &face, &DEFAULT_P_CANDIDATES, 12, 3).unwrap();
        assert!(rep.p0_hat <= 8.0, "face p0_hat {}", rep.p0_hat);
        for w in &rep.witnesses {
            assert!(verify_witness(&cube, &face, w, rep.p0_hat).unwrap());
        }
        let all: Vec<VertexId> = cube.ids().to_vec();
        assert!(matches!(porosity_probe(&cube, &all, &DEFAULT_P_CANDIDATES, 3, 3), Err(GalleryError::NoFeasibleP { .. })));
    }

    #[test]
    fn line_has_assouad_one() {
        let cube = grid_space(3, 16, 1.0).unwrap();
        let line: Vec<VertexId> = (0..16).map(|x| grid_id(&[x, 8, 8], 16)).collect();
        let est = assouad_estimate(&cube, &line, 6, 11).unwrap();
        assert!((0.7..=1.3).contains(&est.alpha_hat), "alpha {}", est.alpha_hat);
        for r in &est.records {
            assert!(r.count as f64 <= est.c2_hat * (r.big / r.small).powf(est.alpha_hat) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn cylinder_is_connected() {
        let c = cylinder_space(8, 5, 1.0).unwrap();
        assert_eq!(c.len(), 40);
        assert_eq!(c.distance(VertexId(0), VertexId(4)).unwrap(), 4.0);
    }
}
