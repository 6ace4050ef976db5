//! Extension of a bi-Lipschitz map `f: A -> X` from a finite `A` on the line
//! to a curve `F` on the hull of `A`.
//!
//! Stages, in order:
//! 1. reference points `pi(x)` for every Whitney endpoint, placed off `f(A)`
//!    at a distance comparable to `|x - a_x|` and apart from each other;
//! 2. a free neighbor ("port") reserved next to every reference point;
//! 3. arcs over the middle thirds, each from the port of the left endpoint to
//!    the reference point of the right endpoint, kept away from earlier arcs;
//! 4. bridges across the truncated gaps next to `A`;
//! 5. a connector from each reference point to its port, glued to the arcs
//!    by threshold scans and short bridges.
//!
//! Each stage checks the inequalities it relies on and refuses to continue
//! when one fails.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_core::{BiLipschitzReport, MetricError, VertexId, REPORT_SEED};
use crate::pathfinder::{masked_shortest_path, ClearanceParams, ClearanceSearch};
use crate::space_gallery::{assouad_estimate, porosity_probe, GalleryError, DEFAULT_P_CANDIDATES};
use crate::straighten::{straighten, StraightenConfig};
use crate::whitney::{ds_filtration, filter_endpoints, whitney_decompose, Filtration, WhitneyError};
use crate::{Decomposition, Path, Report, Space};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Setup,
    ReferencePoints,
    Ports,
    MiddleThirds,
    GapBridges,
    LocalModifications,
    Assembly,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Setup => "setup",
            Stage::ReferencePoints => "reference points",
            Stage::Ports => "ports",
            Stage::MiddleThirds => "middle thirds",
            Stage::GapBridges => "gap bridges",
            Stage::LocalModifications => "local modifications",
            Stage::Assembly => "assembly",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum ExtensionError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("porosity of f(A) could not be certified: {0}")]
    PorosityFailed(String),
    #[error("no reference point for endpoint {endpoint}: {constraint}")]
    PlacementFailed { endpoint: f64, constraint: String },
    #[error("{stage}: certificate '{clause}' failed: {detail}")]
    CertificationFailed { stage: Stage, clause: String, detail: String },
    #[error("threshold scan at endpoint {endpoint} failed down to glue constant {eps_glue}")]
    ThresholdNotCrossed { endpoint: f64, eps_glue: f64 },
    #[error("{stage}: no admissible path: {detail}")]
    NoClearancePath { stage: Stage, detail: String },
    #[error(transparent)]
    Whitney(#[from] WhitneyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl ExtensionError {
    /// Failures that certify the construction breaks down on this input, as
    /// opposed to malformed input.
    pub fn is_certified_failure(&self) -> bool {
        matches!(
            self,
            Self::PorosityFailed(_)
                | Self::PlacementFailed { .. }
                | Self::CertificationFailed { .. }
                | Self::ThresholdNotCrossed { .. }
                | Self::NoClearancePath { .. }
        )
    }

    /// Short name of the violated clause.
    pub fn clause(&self) -> String {
        match self {
            Self::CertificationFailed { clause, .. } => clause.clone(),
            Self::PlacementFailed { .. } => "reference point placement".into(),
            Self::PorosityFailed(_) => "porosity of f(A)".into(),
            Self::ThresholdNotCrossed { .. } => "glue threshold crossing".into(),
            Self::NoClearancePath { stage, .. } => format!("path existence ({stage})"),
            other => other.to_string(),
        }
    }
}

/// User-facing knobs; unset values are derived in [`ExtensionProblem::settings`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtensionConfig {
    /// Reference-point separation; defaults to `1/(4 p0)`.
    pub xi: Option<f64>,
    /// Porosity constant of `f(A)`; probed when unset.
    pub p0: Option<f64>,
    pub delta0: f64,
    pub ell0: f64,
    /// Glue constant; defaults to `xi / 100`.
    pub eps_glue: Option<f64>,
    pub lambda: f64,
    /// Factor in the component diameter bound; defaults to `75 lambda`.
    pub component_factor: Option<f64>,
    /// Smallest Whitney interval; never below the space resolution.
    pub r_min: Option<f64>,
    /// Regularity exponent and modulus exponent of the target space.
    pub q: f64,
    pub p: f64,
    pub straighten_eps: f64,
    pub max_halvings: u32,
    pub seed: u64,
    pub report_budget: usize,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            xi: None,
            p0: None,
            delta0: 0.05,
            ell0: 4.0,
            eps_glue: None,
            lambda: 1.0,
            component_factor: None,
            r_min: None,
            q: 3.0,
            p: 1.5,
            straighten_eps: 0.25,
            max_halvings: 6,
            seed: 7,
            report_budget: 250_000,
        }
    }
}

/// Fully resolved constants of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub xi: f64,
    pub p0: f64,
    pub delta0: f64,
    pub ell0: f64,
    pub eps_glue: f64,
    pub lambda: f64,
    pub component_factor: f64,
    pub r_min: f64,
    pub q: f64,
    pub p: f64,
    pub straighten_eps: f64,
    pub max_halvings: u32,
    pub seed: u64,
    pub report_budget: usize,
}

pub struct ExtensionProblem<'a> {
    pub space: &'a Space,
    /// Sorted, distinct.
    pub a: Vec<f64>,
    pub f: Vec<VertexId>,
    /// `max d(f(a),f(b)) / |a-b|` and its reciprocal counterpart.
    pub l_measured: f64,
    pub config: ExtensionConfig,
}

/// On-disk problem: `{"schema": 1, "A": [...], "f": {"a": id}, "config": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(default = "schema_one")]
    pub schema: u32,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub f: BTreeMap<String, VertexId>,
    #[serde(default)]
    pub config: ExtensionConfig,
}

fn schema_one() -> u32 {
    SCHEMA
}

impl ProblemFile {
    pub fn new(pairs: &[(f64, VertexId)], config: ExtensionConfig) -> Self {
        Self {
            schema: SCHEMA,
            a: pairs.iter().map(|p| p.0).collect(),
            f: pairs.iter().map(|&(a, v)| (format!("{a}"), v)).collect(),
            config,
        }
    }

    pub fn pairs(&self) -> Result<Vec<(f64, VertexId)>, ExtensionError> {
        let mut by_value = Vec::with_capacity(self.f.len());
        for (key, &v) in &self.f {
            let a: f64 = key.trim().parse().map_err(|_| ExtensionError::InvalidProblem(format!("bad key {key:?} in f")))?;
            by_value.push((a, v));
        }
        self.a
            .iter()
            .map(|&a| {
                by_value
                    .iter()
                    .find(|p| p.0 == a)
                    .map(|&(_, v)| (a, v))
                    .ok_or_else(|| ExtensionError::InvalidProblem(format!("f has no value at {a}")))
            })
            .collect()
    }
}

impl<'a> ExtensionProblem<'a> {
    pub fn new(space: &'a Space, pairs: &[(f64, VertexId)], config: ExtensionConfig) -> Result<Self, ExtensionError> {
        let mut pairs = pairs.to_vec();
        if pairs.iter().any(|p| !p.0.is_finite()) {
            return Err(ExtensionError::InvalidProblem("non-finite point in A".into()));
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        if pairs.len() < 2 {
            return Err(ExtensionError::InvalidProblem("A needs at least two points".into()));
        }
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ExtensionError::InvalidProblem("A has a repeated point".into()));
        }
        let f: Vec<VertexId> = pairs.iter().map(|p| p.1).collect();
        let idx = space.indices(&f)?;
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(ExtensionError::InvalidProblem("f is not injective".into()));
        }
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut l_measured: f64 = 1.0;
        for i in 0..a.len() {
            let row = space.distances_from_index(idx[i]);
            for j in i + 1..a.len() {
                let (d, gap) = (row[idx[j]], a[j] - a[i]);
                if !d.is_finite() {
                    return Err(ExtensionError::InvalidProblem("f(A) is not in one component".into()));
                }
                l_measured = l_measured.max(d / gap).max(gap / d);
            }
        }
        Ok(Self { space, a, f, l_measured, config })
    }

    pub fn value_at(&self, a: f64) -> Option<VertexId> {
        self.a.iter().position(|&x| x == a).map(|k| self.f[k])
    }

    pub fn settings(&self) -> Result<Settings, ExtensionError> {
        let c = &self.config;
        let h = self.space.resolution();
        let bad = |what: &str| Err(ExtensionError::InvalidProblem(what.to_string()));
        if !(c.lambda >= 1.0) {
            return bad("lambda must be at least 1");
        }
        if !(c.delta0 > 0.0 && c.delta0 < 1.0) || !(c.ell0 > 0.0) {
            return bad("delta0 must lie in (0,1) and ell0 must be positive");
        }
        if !(c.p > 1.0) || !(c.q > 0.0) {
            return bad("p must exceed 1 and q must be positive");
        }
        let p0 = match c.p0 {
            Some(p) if p >= 1.0 => p,
            Some(_) => return bad("p0 must be at least 1"),
            None => match porosity_probe(self.space, &self.f, &DEFAULT_P_CANDIDATES, 16, c.seed) {
                Ok(rep) => rep.p0_hat,
                Err(GalleryError::NoFeasibleP { y, r }) => {
                    return Err(ExtensionError::PorosityFailed(format!("no hole in B({y}, {r})")))
                }
                Err(e) => return Err(ExtensionError::PorosityFailed(e.to_string())),
            },
        };
        let xi = c.xi.unwrap_or(1.0 / (4.0 * p0));
        if !(xi > 0.0 && xi < 1.0 / 3.0) {
            return bad("xi must lie in (0, 1/3)");
        }
        let eps_glue = c.eps_glue.unwrap_or(0.01 * xi);
        if !(eps_glue > 0.0 && eps_glue < xi) {
            return bad("eps_glue must lie in (0, xi)");
        }
        Ok(Settings {
            xi,
            p0,
            delta0: c.delta0,
            ell0: c.ell0,
            eps_glue,
            lambda: c.lambda,
            component_factor: c.component_factor.unwrap_or(75.0 * c.lambda),
            r_min: c.r_min.unwrap_or(h).max(h),
            q: c.q,
            p: c.p,
            straighten_eps: c.straighten_eps,
            max_halvings: c.max_halvings,
            seed: c.seed,
            report_budget: c.report_budget,
        })
    }

    pub fn decompose(&self, settings: &Settings) -> Result<Decomposition, ExtensionError> {
        Ok(whitney_decompose(&self.a, settings.r_min)?)
    }

    fn component_of(&self, x: f64) -> (usize, usize) {
        let k = self.a.partition_point(|&p| p < x).clamp(1, self.a.len() - 1);
        (k - 1, k)
    }

    fn anchor_index(&self, anchor: f64) -> usize {
        self.a.iter().position(|&p| p == anchor).expect("anchor is a point of A")
    }
}

/// A clause checked at runtime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub stage: Stage,
    pub clause: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Default)]
struct Ledger {
    entries: Vec<Certificate>,
}

impl Ledger {
    fn check(&mut self, stage: Stage, clause: &str, passed: bool, detail: impl FnOnce() -> String) -> Result<(), ExtensionError> {
        let detail = if passed { String::new() } else { detail() };
        self.entries.push(Certificate { stage, clause: clause.to_string(), passed, detail: detail.clone() });
        if passed {
            Ok(())
        } else {
            Err(ExtensionError::CertificationFailed { stage, clause: clause.to_string(), detail })
        }
    }

    /// Records the worst case of a clause evaluated many times.
    fn check_all(
        &mut self,
        stage: Stage,
        clause: &str,
        items: impl IntoIterator<Item = (bool, String)>,
        summary: String,
    ) -> Result<(), ExtensionError> {
        for (ok, detail) in items {
            if !ok {
                return self.check(stage, clause, false, || detail);
            }
        }
        self.entries.push(Certificate { stage, clause: clause.to_string(), passed: true, detail: summary });
        Ok(())
    }
}

/// Shared geometry of `f(A)`.
struct Image {
    f_idx: Vec<usize>,
    in_image: Vec<bool>,
    dist_image: Vec<f64>,
}

impl Image {
    fn new(problem: &ExtensionProblem) -> Result<Self, ExtensionError> {
        let space = problem.space;
        let f_idx = space.indices(&problem.f)?;
        let mut in_image = vec![false; space.len()];
        for &i in &f_idx {
            in_image[i] = true;
        }
        let dist_image = space.distances_to_set(&f_idx);
        Ok(Self { f_idx, in_image, dist_image })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoints {
    /// One vertex per endpoint of the decomposition, in endpoint order.
    pub points: Vec<VertexId>,
    pub filtration: Filtration,
}

/// Places `pi(x)` for every Whitney endpoint, class by class.
pub fn reference_points(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
) -> Result<ReferencePoints, ExtensionError> {
    let mut ledger = Ledger::default();
    let image = Image::new(problem)?;
    place_reference_points(problem, settings, dec, &image, &mut ledger)
}

fn place_reference_points(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
    image: &Image,
    ledger: &mut Ledger,
) -> Result<ReferencePoints, ExtensionError> {
    let space = problem.space;
    let h = space.resolution();
    let (xi, p0) = (settings.xi, settings.p0);
    let filtration = filter_endpoints(dec, problem.l_measured, p0)?;
    let n = space.len();
    let mut placed: Vec<Option<usize>> = vec![None; dec.endpoints.len()];
    let mut taken = image.in_image.clone();
    let mut order: Vec<usize> = (0..dec.endpoints.len()).collect();
    order.sort_by_key(|&e| (filtration.colors[e], e));

    for &e in &order {
        let frame = &dec.endpoints[e];
        let r = frame.anchor_distance();
        let (lo, hi) = problem.component_of(frame.x);
        let anchor = problem.anchor_index(frame.anchor);
        let far = if anchor == lo { hi } else { lo };
        let row_a = space.distances_from_index(image.f_idx[anchor]);
        let row_b = space.distances_from_index(image.f_idx[far]);
        let others: Vec<(usize, f64)> = placed
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.map(|v| (v, dec.endpoints[k].anchor_distance())))
            .collect();
        let other_rows: Vec<_> = others.iter().map(|&(v, _)| space.distances_from_index(v)).collect();

        let annulus = |v: usize| row_a[v] >= 0.25 * r - h && row_a[v] <= 4.0 * r + h;
        let clear = |v: usize| image.dist_image[v] >= xi * r - h && image.dist_image[v] > 0.0;
        let apart = |v: usize| {
            others
                .iter()
                .zip(&other_rows)
                .all(|(&(_, ry), row)| row[v] > 0.0 && row[v] >= xi * (r + ry) - h)
        };
        let base = |v: usize| !taken[v] && annulus(v) && clear(v);

        // sphere point around the anchor, leaning towards the far end
        let sphere = (0..n)
            .filter(|&v| row_a[v].is_finite())
            .min_by(|&u, &v| {
                let key = |w: usize| ((row_a[w] - r).abs(), row_b[w]);
                key(u).partial_cmp(&key(v)).unwrap().then(u.cmp(&v))
            })
            .expect("nonempty space");
        let row_s = space.distances_from_index(sphere);
        let closest = |pool: &mut dyn Iterator<Item = usize>| {
            pool.min_by(|&u, &v| row_s[u].partial_cmp(&row_s[v]).unwrap().then(u.cmp(&v)))
        };
        let hole = r / (2.0 * p0);
        let witness = closest(&mut (0..n).filter(|&v| row_s[v] < 0.5 * r && image.dist_image[v] >= hole && base(v)));
        let mut choice = witness.filter(|&v| apart(v));
        if choice.is_none() {
            if let Some(w) = witness {
                let row_w = space.distances_from_index(w);
                let near = (r / (32.0 * p0)).max(2.0 * h);
                choice = closest(&mut (0..n).filter(|&v| row_w[v] < near && base(v) && apart(v)));
            }
        }
        if choice.is_none() {
            choice = closest(&mut (0..n).filter(|&v| base(v) && apart(v)));
        }
        let Some(v) = choice else {
            let constraint = if !(0..n).any(|v| !taken[v] && annulus(v)) {
                format!("no free vertex at distance [{}, {}] from f({})", 0.25 * r - h, 4.0 * r + h, frame.anchor)
            } else if !(0..n).any(base) {
                format!("no annulus vertex at distance >= {} from f(A)", xi * r - h)
            } else {
                "every admissible vertex collides with an earlier reference point".to_string()
            };
            return Err(ExtensionError::PlacementFailed { endpoint: frame.x, constraint });
        };
        placed[e] = Some(v);
        taken[v] = true;
    }
    let pi: Vec<usize> = placed.into_iter().map(|p| p.expect("all placed")).collect();

    // recheck every clause on the final placement
    let stage = Stage::ReferencePoints;
    let ends = &dec.endpoints;
    let annulus_items = ends.iter().zip(&pi).map(|(fr, &v)| {
        let d = space.dist_idx(v, image.f_idx[problem.anchor_index(fr.anchor)]);
        let r = fr.anchor_distance();
        (d >= 0.25 * r - h && d <= 4.0 * r + h, format!("endpoint {}: d(pi, f(a_x)) = {d}, |x - a_x| = {r}", fr.x))
    });
    ledger.check_all(stage, "reference point annulus", annulus_items.collect::<Vec<_>>(), format!("{} endpoints", ends.len()))?;
    let clear_items = ends.iter().zip(&pi).map(|(fr, &v)| {
        let d = image.dist_image[v];
        (d > 0.0 && d >= xi * fr.anchor_distance() - h, format!("endpoint {}: dist(pi, f(A)) = {d}", fr.x))
    });
    ledger.check_all(stage, "reference point clearance", clear_items.collect::<Vec<_>>(), format!("xi = {xi}"))?;
    let mut sep_items = Vec::new();
    for i in 0..pi.len() {
        let row = space.distances_from_index(pi[i]);
        for j in i + 1..pi.len() {
            let need = xi * (ends[i].anchor_distance() + ends[j].anchor_distance()) - h;
            sep_items.push((row[pi[j]] > 0.0 && row[pi[j]] >= need, format!("endpoints {} and {}: {} < {need}", ends[i].x, ends[j].x, row[pi[j]])));
        }
    }
    ledger.check_all(stage, "reference point separation", sep_items, format!("{} pairs", pi.len() * pi.len().saturating_sub(1) / 2))?;
    let neighbor_items = dec.intervals.iter().map(|q| {
        let (w, z) = (endpoint_at(dec, q.lo), endpoint_at(dec, q.hi));
        let d = space.dist_idx(pi[w], pi[z]);
        let bound = 51.0 * problem.l_measured * q.diam() + h;
        (d <= bound, format!("interval [{}, {}]: {d} > {bound}", q.lo, q.hi))
    });
    ledger.check_all(stage, "neighbor reference points", neighbor_items.collect::<Vec<_>>(), "51 L diam Q".into())?;

    Ok(ReferencePoints { points: pi.iter().map(|&v| space.id(v)).collect(), filtration })
}

fn endpoint_at(dec: &Decomposition, x: f64) -> usize {
    dec.endpoint_index(x).expect("interval ends are endpoints")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiddleThirds {
    /// Free neighbor of each reference point, in endpoint order.
    pub ports: Vec<VertexId>,
    /// Per interval: from the port of its left end to the reference point of its right end.
    pub arcs: Vec<Path>,
    pub filtration: Filtration,
    /// Whether the straightened arc was kept, per interval.
    pub straightened: Vec<bool>,
}

/// Ports, then the arcs over all middle thirds in filtration order.
pub fn middle_third_embedding(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
    refs: &ReferencePoints,
) -> Result<MiddleThirds, ExtensionError> {
    let mut ledger = Ledger::default();
    let image = Image::new(problem)?;
    build_middle_thirds(problem, settings, dec, refs, &image, &mut ledger)
}

fn right_target(problem: &ExtensionProblem, dec: &Decomposition, pi: &[usize], image: &Image, e: usize) -> usize {
    let frame = &dec.endpoints[e];
    if let Some(q) = frame.right {
        return pi[endpoint_at(dec, dec.intervals[q].hi)];
    }
    // right side is a gap: its far end is a point of A or another endpoint
    let gap = dec.gaps.iter().find(|g| g.lo == frame.x).expect("endpoint without right interval borders a gap");
    match problem.a.iter().position(|&p| p == gap.hi) {
        Some(k) => image.f_idx[k],
        None => pi[endpoint_at(dec, gap.hi)],
    }
}

fn build_middle_thirds(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
    refs: &ReferencePoints,
    image: &Image,
    ledger: &mut Ledger,
) -> Result<MiddleThirds, ExtensionError> {
    let space = problem.space;
    let h = space.resolution();
    let n = space.len();
    let pi = space.indices(&refs.points)?;
    let mut used = image.in_image.clone();
    for &v in &pi {
        used[v] = true;
    }
    let mut ports = Vec::with_capacity(pi.len());
    for e in 0..pi.len() {
        let target = right_target(problem, dec, &pi, image, e);
        let row = space.distances_from_index(target);
        // ties go to the neighbor farthest from earlier ports, so that
        // consecutive arcs do not have to detour around each other
        let spread = if ports.is_empty() {
            vec![f64::INFINITY; n]
        } else {
            space.distances_to_set(&ports)
        };
        let port = space
            .neighbors(pi[e])
            .iter()
            .map(|&(v, _)| v)
            .filter(|&v| !used[v])
            .min_by(|&u, &v| {
                row[u].partial_cmp(&row[v]).unwrap().then(spread[v].partial_cmp(&spread[u]).unwrap()).then(u.cmp(&v))
            })
            .ok_or_else(|| ExtensionError::PlacementFailed {
                endpoint: dec.endpoints[e].x,
                constraint: "every neighbor of the reference point is taken".into(),
            })?;
        used[port] = true;
        ports.push(port);
    }

    let filtration = ds_filtration(dec, problem.l_measured, settings.lambda, settings.delta0)?;
    let mut order: Vec<usize> = (0..dec.intervals.len()).collect();
    order.sort_by_key(|&i| (filtration.colors[i], i));
    let mut arcs: Vec<Option<Path>> = vec![None; dec.intervals.len()];
    let mut straightened = vec![false; dec.intervals.len()];
    let mut obstacles: Vec<usize> = image.f_idx.clone();
    let params = ClearanceParams { lambda: settings.lambda, ..ClearanceParams::default() };
    let stage = Stage::MiddleThirds;

    for &i in &order {
        let q = dec.intervals[i];
        let (w, z) = (endpoint_at(dec, q.lo), endpoint_at(dec, q.hi));
        let (start, end) = (ports[w], pi[z]);
        let radius_base = space.dist_idx(pi[w], pi[z]);
        let reach = (4.0 * settings.lambda * radius_base).max(radius_base + 2.0 * h);
        let row_w = space.distances_from_index(pi[w]);
        let row_z = space.distances_from_index(pi[z]);
        let row_s = space.distances_from_index(start);
        let row_e = space.distances_from_index(end);
        let obstacle_distance = space.distances_to_set(&obstacles);
        let allowed: Vec<bool> = (0..n)
            .map(|v| row_w[v] <= reach && row_z[v] <= reach && (!used[v] || v == start || v == end))
            .collect();
        let exempt: Vec<bool> = (0..n).map(|v| row_s[v] < 2.0 * h || row_e[v] < 2.0 * h).collect();
        let target_clearance = settings.delta0 * q.diam();
        let budget = settings.ell0 * radius_base.max(q.diam()) + 2.0 * h;
        let search = ClearanceSearch { space, allowed: &allowed, obstacle_distance: &obstacle_distance, exempt: &exempt };
        let found = search.run(start, end, target_clearance, budget, &params).map_err(|err| ExtensionError::NoClearancePath {
            stage,
            detail: format!("interval [{}, {}]: {err}", q.lo, q.hi),
        })?;

        let clearance_of = |c: &Path| -> f64 {
            c.points()
                .iter()
                .map(|&p| space.index(p).unwrap())
                .filter(|&v| !exempt[v])
                .map(|v| obstacle_distance[v])
                .fold(f64::INFINITY, f64::min)
        };
        let level = found.clearance.min(target_clearance);
        let keep: Vec<bool> = (0..n).map(|v| allowed[v] && (exempt[v] || obstacle_distance[v] >= level)).collect();
        let mut arc = found.curve.clone();
        if arc.vertex_count() > 2 {
            let straight = space
                .induced(&keep)
                .ok()
                .and_then(|sub| straighten(&sub, &found.curve, &StraightenConfig::new(settings.straighten_eps)).ok());
            if let Some(s) = straight {
                let inside = s.points().iter().all(|&p| keep[space.index(p).unwrap()]);
                if inside && clearance_of(&s) >= level && s.length() <= found.curve.length() {
                    arc = s;
                    straightened[i] = true;
                }
            }
        }

        let arc_idx = space.indices(arc.points())?;
        let near = settings.xi * q.diam() / (256.0 * settings.lambda) + h;
        let (d0, d1) = (space.dist_idx(arc_idx[0], pi[w]), space.dist_idx(*arc_idx.last().unwrap(), pi[z]));
        ledger.check(stage, "arc endpoints near reference points", d0.max(d1) <= near, || {
            format!("interval [{}, {}]: ends at {d0}, {d1} from reference points, bound {near}", q.lo, q.hi)
        })?;
        let clearance = clearance_of(&arc);
        ledger.check(stage, "arc clearance", clearance >= target_clearance - h, || {
            format!("interval [{}, {}]: clearance {clearance} below {}", q.lo, q.hi, target_clearance - h)
        })?;
        let outside = arc_idx.iter().find(|&&v| row_w[v] > reach || row_z[v] > reach);
        ledger.check(stage, "arc inside the ball intersection", outside.is_none(), || {
            format!("interval [{}, {}]: vertex {:?} outside radius {reach}", q.lo, q.hi, outside.map(|&v| space.id(v)))
        })?;
        let diam = space.diameter_of(&arc_idx);
        let bound = (8.0 * settings.lambda + 1.0) * radius_base + h;
        ledger.check(stage, "arc diameter", diam <= bound, || {
            format!("interval [{}, {}]: diameter {diam} above {bound}", q.lo, q.hi)
        })?;

        for &v in &arc_idx {
            used[v] = true;
        }
        obstacles.extend(arc_idx.iter().copied());
        arcs[i] = Some(arc);
    }

    Ok(MiddleThirds {
        ports: ports.iter().map(|&v| space.id(v)).collect(),
        arcs: arcs.into_iter().map(|a| a.expect("every interval processed")).collect(),
        filtration,
        straightened,
    })
}

/// Shortest paths across the truncated gaps, avoiding everything placed so far.
pub fn gap_bridges(
    problem: &ExtensionProblem,
    dec: &Decomposition,
    refs: &ReferencePoints,
    mids: &MiddleThirds,
) -> Result<Vec<Path>, ExtensionError> {
    let space = problem.space;
    let image = Image::new(problem)?;
    let pi = space.indices(&refs.points)?;
    let ports = space.indices(&mids.ports)?;
    let mut used = image.in_image.clone();
    for v in pi.iter().chain(&ports) {
        used[*v] = true;
    }
    for arc in &mids.arcs {
        for v in space.indices(arc.points())? {
            used[v] = true;
        }
    }
    let mut out = Vec::with_capacity(dec.gaps.len());
    for g in &dec.gaps {
        let start = match problem.a.iter().position(|&p| p == g.lo) {
            Some(k) => image.f_idx[k],
            None => ports[endpoint_at(dec, g.lo)],
        };
        let end = match problem.a.iter().position(|&p| p == g.hi) {
            Some(k) => image.f_idx[k],
            None => pi[endpoint_at(dec, g.hi)],
        };
        let allowed: Vec<bool> = (0..space.len()).map(|v| !used[v] || v == start || v == end).collect();
        let (path, _) = masked_shortest_path(space, start, end, &allowed).ok_or_else(|| ExtensionError::NoClearancePath {
            stage: Stage::GapBridges,
            detail: format!("gap [{}, {}] from {} to {}", g.lo, g.hi, space.id(start), space.id(end)),
        })?;
        for &v in &path {
            used[v] = true;
        }
        out.push(space.curve_from_indices(&path));
    }
    Ok(out)
}

/// Glue data at one endpoint: the connector and the four cut parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalModification {
    pub x: f64,
    pub endpoint: usize,
    /// Member of the first alternating family.
    pub primary: bool,
    pub gamma: Path,
    pub tau: [f64; 4],
    pub t: [f64; 4],
    pub threshold: f64,
    /// Cut positions: left arc, connector (two), right arc.
    #[serde(skip)]
    cut: [usize; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceKind {
    Arc { interval: usize },
    Connector { endpoint: usize },
    Bridge { endpoint: usize, right: bool },
    Gap { gap: usize },
}

/// `F` on `[lo, hi]`: a curve parameterized proportionally to arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(flatten)]
    pub kind: PieceKind,
    pub lo: f64,
    pub hi: f64,
    pub curve: Path,
}

impl Piece {
    pub fn params(&self) -> Vec<f64> {
        params_over(&self.curve, self.lo, self.hi)
    }
}

fn params_over(c: &Path, lo: f64, hi: f64) -> Vec<f64> {
    let len = c.length();
    c.cum_length()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if i + 1 == c.vertex_count() {
                hi
            } else if len > 0.0 {
                lo + (hi - lo) * s / len
            } else {
                lo
            }
        })
        .collect()
}

/// One connector per endpoint: a clearance path from the reference point to
/// its port, kept away from the arcs not adjacent to the endpoint.
fn connectors(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
    refs: &ReferencePoints,
    mids: &MiddleThirds,
) -> Result<Vec<Path>, ExtensionError> {
    let space = problem.space;
    let h = space.resolution();
    let pi = space.indices(&refs.points)?;
    let ports = space.indices(&mids.ports)?;
    let arc_idx: Vec<Vec<usize>> = mids.arcs.iter().map(|a| space.indices(a.points())).collect::<Result<_, _>>()?;
    let image = Image::new(problem)?;
    // measured homogeneity of the arcs feeds the clearance exponent
    let all_arcs: Vec<VertexId> = mids.arcs.iter().flat_map(|a| a.points().iter().copied()).collect();
    let alpha = if all_arcs.len() >= 2 {
        assouad_estimate(space, &all_arcs, 4, settings.seed).map(|e| e.alpha_hat).unwrap_or(0.0)
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(pi.len());
    for (e, frame) in dec.endpoints.iter().enumerate() {
        let mut obstacles: Vec<usize> = image.f_idx.clone();
        let mut used = image.in_image.clone();
        for (i, arc) in arc_idx.iter().enumerate() {
            let adjacent = frame.left == Some(i) || frame.right == Some(i);
            for &v in arc {
                used[v] = true;
                if !adjacent {
                    obstacles.push(v);
                }
            }
        }
        for (k, (&p, &r)) in pi.iter().zip(&ports).enumerate() {
            if k != e {
                used[p] = true;
                used[r] = true;
            }
        }
        let (a, b) = (pi[e], ports[e]);
        let d = space.dist_idx(a, b);
        let dist_obs = space.distances_to_set(&obstacles);
        let s = dist_obs[a].min(dist_obs[b]).max(h);
        let params = ClearanceParams::from_exponents(settings.q, settings.p, alpha, d, s, settings.lambda);
        let row_a = space.distances_from_index(a);
        let row_b = space.distances_from_index(b);
        let reach = (2.0 * params.lambda * d).max(d + h);
        let allowed: Vec<bool> = (0..space.len()).map(|v| row_a[v] < reach && (!used[v] || v == a || v == b)).collect();
        let exempt: Vec<bool> = (0..space.len()).map(|v| row_a[v] < 2.0 * h || row_b[v] < 2.0 * h).collect();
        let search = ClearanceSearch { space, allowed: &allowed, obstacle_distance: &dist_obs, exempt: &exempt };
        let found = search
            .run(a, b, params.clearance_factor * d, params.length_factor * d, &params)
            .map_err(|err| ExtensionError::NoClearancePath { stage: Stage::LocalModifications, detail: format!("connector at {}: {err}", frame.x) })?;
        let curve = if found.curve.vertex_count() > 2 {
            straighten(space, &found.curve, &StraightenConfig::new(settings.straighten_eps))
                .ok()
                .filter(|c| c.points().iter().all(|&p| allowed[space.index(p).unwrap()]))
                .unwrap_or(found.curve)
        } else {
            found.curve
        };
        out.push(curve);
    }
    Ok(out)
}

enum ScanFailure {
    Threshold(f64),
    Collision(f64, String),
}

struct Glue<'p, 'a> {
    problem: &'p ExtensionProblem<'a>,
    dec: &'p Decomposition,
    arcs: Vec<Piece>,
    arc_idx: Vec<Vec<usize>>,
    arc_params: Vec<Vec<f64>>,
    gammas: Vec<Path>,
    gamma_idx: Vec<Vec<usize>>,
    gamma_dist: Vec<Vec<f64>>,
    gaps: Vec<Piece>,
    image: Image,
}

impl Glue<'_, '_> {
    fn tau(&self, e: usize) -> [f64; 4] {
        let frame = &self.dec.endpoints[e];
        let t = self.dec.tau(e).tau;
        [t[0].unwrap_or(frame.x), t[1].unwrap_or(frame.x), t[2].unwrap_or(frame.x), t[3].unwrap_or(frame.x)]
    }

    fn span(&self, e: usize) -> f64 {
        let frame = &self.dec.endpoints[e];
        frame.left.map_or(0.0, |i| self.dec.intervals[i].diam()) + frame.right.map_or(0.0, |i| self.dec.intervals[i].diam())
    }

    fn gamma_params(&self, e: usize) -> Vec<f64> {
        let tau = self.tau(e);
        params_over(&self.gammas[e], tau[1], tau[2])
    }

    fn scan(&self, e: usize, eps: f64, left_from: Option<f64>, right_to: Option<f64>, primary: bool) -> Result<LocalModification, ScanFailure> {
        let space = self.problem.space;
        let frame = &self.dec.endpoints[e];
        let tau = self.tau(e);
        let theta = eps * self.span(e);
        let gp = self.gamma_params(e);
        let gi = &self.gamma_idx[e];
        let near = &self.gamma_dist[e];
        let last = gi.len() - 1;
        let (mut t, mut cut) = ([frame.x; 4], [0usize, 0, last, 0]);
        match frame.left {
            Some(q) => {
                let (ps, vs) = (&self.arc_params[q], &self.arc_idx[q]);
                let from = left_from.unwrap_or(tau[0]);
                let k1 = (0..vs.len())
                    .find(|&k| ps[k] >= from && ps[k] <= tau[1] && near[vs[k]] <= theta)
                    .ok_or(ScanFailure::Threshold(frame.x))?;
                let row = space.distances_from_index(vs[k1]);
                let k2 = (0..gi.len()).rev().find(|&k| row[gi[k]] <= theta).ok_or(ScanFailure::Threshold(frame.x))?;
                t[0] = ps[k1];
                t[1] = gp[k2];
                cut[0] = k1;
                cut[1] = k2;
            }
            None => {
                t[0] = frame.x;
                t[1] = frame.x;
            }
        }
        match frame.right {
            Some(q) => {
                let (ps, vs) = (&self.arc_params[q], &self.arc_idx[q]);
                let to = right_to.unwrap_or(tau[3]);
                let k4 = (0..vs.len())
                    .rev()
                    .find(|&k| ps[k] >= tau[2] && ps[k] <= to && near[vs[k]] <= theta)
                    .ok_or(ScanFailure::Threshold(frame.x))?;
                let row = space.distances_from_index(vs[k4]);
                let k3 = (cut[1]..gi.len())
                    .find(|&k| gp[k] >= t[1] && row[gi[k]] <= theta)
                    .ok_or(ScanFailure::Threshold(frame.x))?;
                t[3] = ps[k4];
                t[2] = gp[k3];
                cut[3] = k4;
                cut[2] = k3;
            }
            None => {
                t[2] = frame.x;
                t[3] = frame.x;
                cut[2] = last;
            }
        }
        if !(t[2] > t[1]) || cut[2] < cut[1] {
            return Err(ScanFailure::Threshold(frame.x));
        }
        Ok(LocalModification { x: frame.x, endpoint: e, primary, gamma: self.gammas[e].clone(), tau, t, threshold: theta, cut })
    }

    /// Scans the first family with full ranges, then the second against the
    /// cuts already made.
    fn scan_all(&self, eps: f64) -> Result<Vec<LocalModification>, ScanFailure> {
        let n = self.dec.endpoints.len();
        let mut primary = vec![false; n];
        for (lo, hi) in self.dec.components() {
            let mut k = 0;
            for (e, frame) in self.dec.endpoints.iter().enumerate() {
                if frame.x > lo && frame.x < hi {
                    primary[e] = k % 2 == 0;
                    k += 1;
                }
            }
        }
        let mut mods: Vec<Option<LocalModification>> = vec![None; n];
        for e in (0..n).filter(|&e| primary[e]) {
            mods[e] = Some(self.scan(e, eps, None, None, true)?);
        }
        for e in (0..n).filter(|&e| !primary[e]) {
            let frame = &self.dec.endpoints[e];
            let neighbor_t = |q: Option<usize>, left: bool| {
                q.and_then(|q| {
                    let iv = self.dec.intervals[q];
                    let other = endpoint_at(self.dec, if left { iv.lo } else { iv.hi });
                    mods[other].as_ref().map(|m| if left { m.t[3] } else { m.t[0] })
                })
            };
            let from = neighbor_t(frame.left, true);
            let to = neighbor_t(frame.right, false);
            mods[e] = Some(self.scan(e, eps, from, to, false)?);
        }
        Ok(mods.into_iter().map(|m| m.unwrap()).collect())
    }

    /// Cuts the arcs and connectors, then joins them with bridges.
    fn assemble(&self, mods: &[LocalModification]) -> Result<Vec<Piece>, ScanFailure> {
        let space = self.problem.space;
        let mut pieces = Vec::new();
        for (i, q) in self.dec.intervals.iter().enumerate() {
            let (w, z) = (endpoint_at(self.dec, q.lo), endpoint_at(self.dec, q.hi));
            let (a, b) = (mods[w].cut[3], mods[z].cut[0]);
            if a > b {
                return Err(ScanFailure::Threshold(q.lo));
            }
            let ps = &self.arc_params[i];
            pieces.push(Piece { kind: PieceKind::Arc { interval: i }, lo: ps[a], hi: ps[b], curve: self.arcs[i].curve.slice(a, b) });
        }
        for m in mods {
            let curve = m.gamma.slice(m.cut[1], m.cut[2]);
            pieces.push(Piece { kind: PieceKind::Connector { endpoint: m.endpoint }, lo: m.t[1], hi: m.t[2], curve });
        }
        pieces.extend(self.gaps.iter().cloned());
        let mut used = self.image.in_image.clone();
        for p in &pieces {
            for v in space.indices(p.curve.points()).expect("known vertices") {
                used[v] = true;
            }
        }
        for m in mods {
            let frame = &self.dec.endpoints[m.endpoint];
            let gi = &self.gamma_idx[m.endpoint];
            let mut sides = Vec::new();
            if let Some(q) = frame.left {
                sides.push((false, self.arc_idx[q][m.cut[0]], gi[m.cut[1]], m.t[0], m.t[1]));
            }
            if let Some(q) = frame.right {
                sides.push((true, gi[m.cut[2]], self.arc_idx[q][m.cut[3]], m.t[2], m.t[3]));
            }
            for (right, from, to, lo, hi) in sides {
                if lo == hi {
                    if from != to {
                        return Err(ScanFailure::Threshold(m.x));
                    }
                    continue;
                }
                if from == to {
                    return Err(ScanFailure::Threshold(m.x));
                }
                let allowed: Vec<bool> = (0..space.len()).map(|v| !used[v] || v == from || v == to).collect();
                let (path, _) = masked_shortest_path(space, from, to, &allowed)
                    .ok_or_else(|| ScanFailure::Collision(m.x, format!("bridge from {} to {}", space.id(from), space.id(to))))?;
                for &v in &path {
                    used[v] = true;
                }
                pieces.push(Piece { kind: PieceKind::Bridge { endpoint: m.endpoint, right }, lo, hi, curve: space.curve_from_indices(&path) });
            }
        }
        pieces.sort_by(|x, y| (x.lo, x.hi).partial_cmp(&(y.lo, y.hi)).unwrap());
        Ok(pieces)
    }
}

/// Runs the threshold scans and bridges, halving the glue constant on failure.
pub fn local_modifications(
    problem: &ExtensionProblem,
    settings: &Settings,
    dec: &Decomposition,
    refs: &ReferencePoints,
    mids: &MiddleThirds,
    gaps: &[Path],
) -> Result<(Vec<LocalModification>, Vec<Piece>, f64, u32), ExtensionError> {
    let space = problem.space;
    let arcs: Vec<Piece> = mids
        .arcs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let m = dec.intervals[i].middle_third();
            Piece { kind: PieceKind::Arc { interval: i }, lo: m.lo, hi: m.hi, curve: c.clone() }
        })
        .collect();
    let gammas = connectors(problem, settings, dec, refs, mids)?;
    let gamma_idx: Vec<Vec<usize>> = gammas.iter().map(|g| space.indices(g.points())).collect::<Result<_, _>>()?;
    let glue = Glue {
        problem,
        dec,
        arc_idx: arcs.iter().map(|p| space.indices(p.curve.points())).collect::<Result<_, _>>()?,
        arc_params: arcs.iter().map(Piece::params).collect(),
        arcs,
        gamma_dist: gamma_idx.iter().map(|g| space.distances_to_set(g)).collect(),
        gammas,
        gamma_idx,
        gaps: dec
            .gaps
            .iter()
            .zip(gaps)
            .enumerate()
            .map(|(k, (g, c))| Piece { kind: PieceKind::Gap { gap: k }, lo: g.lo, hi: g.hi, curve: c.clone() })
            .collect(),
        image: Image::new(problem)?,
    };
    let mut eps = settings.eps_glue;
    for halvings in 0..=settings.max_halvings {
        let attempt = glue.scan_all(eps).and_then(|mods| glue.assemble(&mods).map(|p| (mods, p)));
        match attempt {
            Ok((mods, pieces)) => return Ok((mods, pieces, eps, halvings)),
            Err(fail) if halvings == settings.max_halvings => {
                return Err(match fail {
                    ScanFailure::Threshold(x) => ExtensionError::ThresholdNotCrossed { endpoint: x, eps_glue: eps },
                    ScanFailure::Collision(x, detail) => ExtensionError::NoClearancePath {
                        stage: Stage::LocalModifications,
                        detail: format!("endpoint {x}: {detail}"),
                    },
                })
            }
            Err(_) => eps /= 2.0,
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCertificate {
    pub lo: f64,
    pub hi: f64,
    pub diam: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub schema: u32,
    pub pieces: Vec<Piece>,
    pub reference_points: Vec<(f64, VertexId)>,
    pub ports: Vec<(f64, VertexId)>,
    pub modifications: Vec<LocalModification>,
    pub settings: Settings,
    pub eps_glue_used: f64,
    pub halvings: u32,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    /// Distortion of the arcs together with `f` on their union.
    #[serde(rename = "L_arcs")]
    pub l_arcs: f64,
    /// Largest distortion of a connector on its parameter window.
    #[serde(rename = "L_connectors")]
    pub l_connectors: f64,
    /// Distortion of `F` over pairs at least `r_min` apart, gaps excluded.
    pub report: Report,
    pub component_certificates: Vec<ComponentCertificate>,
    pub certificates: Vec<Certificate>,
    /// Pair counts per case of the distortion analysis.
    pub cases: BTreeMap<String, usize>,
    pub straightened_arcs: usize,
}

impl ExtensionResult {
    /// Vertices of `F` with their parameters, shared piece ends listed once.
    pub fn samples(&self) -> Vec<(f64, VertexId)> {
        let mut out = Vec::new();
        for (k, p) in self.pieces.iter().enumerate() {
            let skip = usize::from(k > 0);
            out.extend(p.params().into_iter().zip(p.curve.points().iter().copied()).skip(skip));
        }
        out
    }

    /// `F(t)`: the sample vertex closest in parameter.
    pub fn point_at(&self, t: f64) -> Option<VertexId> {
        self.samples()
            .into_iter()
            .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap())
            .map(|s| s.1)
    }

    pub fn all_passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed) && self.component_certificates.iter().all(|c| c.passed)
    }
}

/// The whole pipeline; returns only certified output.
pub fn extend(problem: &ExtensionProblem) -> Result<ExtensionResult, ExtensionError> {
    let space = problem.space;
    let h = space.resolution();
    let settings = problem.settings()?;
    let dec = problem.decompose(&settings)?;
    let image = Image::new(problem)?;
    let mut ledger = Ledger::default();
    if let Err(v) = dec.verify() {
        ledger.check(Stage::Setup, "Whitney decomposition", false, || v.0)?;
    }
    let refs = place_reference_points(problem, &settings, &dec, &image, &mut ledger)?;
    let mids = build_middle_thirds(problem, &settings, &dec, &refs, &image, &mut ledger)?;
    let gaps = gap_bridges(problem, &dec, &refs, &mids)?;
    let (mods, pieces, eps_used, halvings) = local_modifications(problem, &settings, &dec, &refs, &mids, &gaps)?;

    let stage = Stage::Assembly;
    let contiguous = pieces.windows(2).find(|w| w[0].hi != w[1].lo || w[0].curve.last() != w[1].curve.first());
    ledger.check(stage, "pieces join up", contiguous.is_none(), || {
        let w = contiguous.unwrap();
        format!("[{}, {}] then [{}, {}]", w[0].lo, w[0].hi, w[1].lo, w[1].hi)
    })?;
    let mut samples: Vec<(f64, usize, usize)> = Vec::new();
    for (k, p) in pieces.iter().enumerate() {
        let skip = usize::from(k > 0);
        for (t, &v) in p.params().into_iter().zip(p.curve.points()).skip(skip) {
            samples.push((t, space.index(v)?, k));
        }
    }
    let mut seen = vec![false; space.len()];
    let repeated = samples.iter().find(|s| std::mem::replace(&mut seen[s.1], true));
    ledger.check(stage, "F is injective", repeated.is_none(), || format!("vertex {} repeats", space.id(repeated.unwrap().1)))?;
    let mismatch = problem.a.iter().zip(&image.f_idx).find(|&(&a, &v)| !samples.iter().any(|s| s.0 == a && s.1 == v));
    ledger.check(stage, "F agrees with f on A", mismatch.is_none(), || format!("F({}) differs from f", mismatch.unwrap().0))?;
    let flat = pieces.iter().find(|p| p.lo < p.hi && p.curve.length() == 0.0);
    ledger.check(stage, "F is not constant on a piece", flat.is_none(), || format!("[{}, {}]", flat.unwrap().lo, flat.unwrap().hi))?;

    // arcs with f, and connectors, measured on their own
    let mut arc_samples: Vec<(f64, usize)> = problem.a.iter().copied().zip(image.f_idx.iter().copied()).collect();
    for (i, arc) in mids.arcs.iter().enumerate() {
        let m = dec.intervals[i].middle_third();
        arc_samples.extend(params_over(arc, m.lo, m.hi).into_iter().zip(space.indices(arc.points())?));
    }
    let l_arcs = BiLipschitzReport::from_samples(space, &arc_samples, 1.0, 0.0, settings.report_budget, REPORT_SEED)
        .map(|r| r.l_measured)
        .unwrap_or(1.0);
    let mut l_connectors: f64 = 1.0;
    for m in &mods {
        let ps = params_over(&m.gamma, m.tau[1], m.tau[2]);
        let cs: Vec<(f64, usize)> = ps.into_iter().zip(space.indices(m.gamma.points())?).collect();
        if let Ok(r) = BiLipschitzReport::from_samples(space, &cs, 1.0, 0.0, usize::MAX, REPORT_SEED) {
            l_connectors = l_connectors.max(r.l_measured);
        }
    }

    let spans: Vec<f64> = (0..dec.endpoints.len())
        .map(|e| {
            let fr = &dec.endpoints[e];
            fr.left.map_or(0.0, |i| dec.intervals[i].diam()) + fr.right.map_or(0.0, |i| dec.intervals[i].diam())
        })
        .collect();
    let order_items = mods.iter().map(|m| {
        let (tau, t) = (m.tau, m.t);
        let ok = tau[0] <= t[0] && t[0] <= tau[1] && tau[1] <= t[1] && t[1] <= t[2] && t[2] <= tau[2] && tau[2] <= t[3] && t[3] <= tau[3];
        (ok, format!("endpoint {}: tau {:?}, t {:?}", m.x, tau, t))
    });
    ledger.check_all(stage, "cut parameters ordered", order_items.collect::<Vec<_>>(), format!("{} endpoints", mods.len()))?;
    let floor_items = mods.iter().map(|m| {
        let floor = spans[m.endpoint] / (4.0 * l_arcs * l_connectors);
        (m.t[2] - m.t[1] >= floor * (1.0 - 1e-9), format!("endpoint {}: connector window {} below {floor}", m.x, m.t[2] - m.t[1]))
    });
    ledger.check_all(stage, "connector window floor", floor_items.collect::<Vec<_>>(), format!("L_arcs {l_arcs}, L_connectors {l_connectors}"))?;
    let mut sep_items = Vec::new();
    for (i, q) in dec.intervals.iter().enumerate() {
        let (w, z) = (endpoint_at(&dec, q.lo), endpoint_at(&dec, q.hi));
        let a = image_at(&mids, i, &dec, mods[w].t[3], space)?;
        let b = image_at(&mids, i, &dec, mods[z].t[0], space)?;
        let d = space.dist_idx(a, b);
        let need = 0.5 * settings.xi * q.diam() - h;
        sep_items.push((d >= need, format!("interval [{}, {}]: cut points {d} apart, need {need}", q.lo, q.hi)));
    }
    ledger.check_all(stage, "consecutive cut points apart", sep_items, format!("{} intervals", dec.intervals.len()))?;

    let mut component_certificates = Vec::new();
    for (k, (lo, hi)) in dec.components().into_iter().enumerate() {
        let members: Vec<usize> = samples.iter().filter(|s| s.0 >= lo && s.0 <= hi).map(|s| s.1).collect();
        let diam = space.diameter_of(&members);
        let d = space.dist_idx(image.f_idx[k], image.f_idx[k + 1]);
        let bound = settings.component_factor * (hi - lo).max(d) + h;
        component_certificates.push(ComponentCertificate { lo, hi, diam, bound, passed: diam <= bound });
    }
    let worst = component_certificates.iter().find(|c| !c.passed);
    ledger.check(stage, "component diameter", worst.is_none(), || {
        let c = worst.unwrap();
        format!("[{}, {}]: diameter {} above {}", c.lo, c.hi, c.diam, c.bound)
    })?;

    let inside_gap = |t: f64| dec.gaps.iter().any(|g| g.lo < t && t < g.hi);
    let mut report_samples: Vec<(f64, usize)> = samples.iter().filter(|s| !inside_gap(s.0)).map(|s| (s.0, s.1)).collect();
    if report_samples.len() < 2 {
        report_samples = samples.iter().map(|s| (s.0, s.1)).collect();
    }
    let report = BiLipschitzReport::from_samples(space, &report_samples, 1.0, settings.r_min, settings.report_budget, settings.seed)
        .or_else(|_| BiLipschitzReport::from_samples(space, &report_samples, 1.0, 0.0, settings.report_budget, settings.seed))?;
    ledger.check(stage, "distortion finite at scales above r_min", report.l_measured.is_finite(), || {
        format!("lower ratio {}", report.lower)
    })?;

    let params: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let cases = count_cases(&params, &dec, &mods);

    Ok(ExtensionResult {
        schema: SCHEMA,
        reference_points: dec.endpoints.iter().map(|e| e.x).zip(refs.points.iter().copied()).collect(),
        ports: dec.endpoints.iter().map(|e| e.x).zip(mids.ports.iter().copied()).collect(),
        pieces,
        modifications: mods,
        settings,
        eps_glue_used: eps_used,
        halvings,
        l_f: problem.l_measured,
        l_arcs,
        l_connectors,
        report,
        component_certificates,
        certificates: ledger.entries,
        cases,
        straightened_arcs: mids.straightened.iter().filter(|&&s| s).count(),
    })
}

/// Vertex of arc `i` at parameter `t` (an exact vertex parameter).
fn image_at(mids: &MiddleThirds, i: usize, dec: &Decomposition, t: f64, space: &Space) -> Result<usize, MetricError> {
    let m = dec.intervals[i].middle_third();
    let ps = params_over(&mids.arcs[i], m.lo, m.hi);
    let k = ps.iter().position(|&p| p == t).unwrap_or_else(|| mids.arcs[i].index_at((t - m.lo) / (m.hi - m.lo)));
    space.index(mids.arcs[i].points()[k])
}

/// Where a parameter sits relative to the glue windows `[t1, t4]`.
#[derive(Clone, Copy, PartialEq)]
enum Region {
    Kept,
    Terminal,
    Window(usize),
}

fn region(u: f64, dec: &Decomposition, mods: &[LocalModification]) -> Region {
    if dec.gaps.iter().any(|g| g.lo < u && u < g.hi) {
        return Region::Terminal;
    }
    match mods.iter().position(|m| m.t[0] <= u && u <= m.t[3]) {
        Some(k) => Region::Window(k),
        None => Region::Kept,
    }
}

/// Pair counts per case of the distortion analysis, over all sample pairs.
/// Window parts are closed intervals, so shared ends count for both sides.
fn count_cases(params: &[f64], dec: &Decomposition, mods: &[LocalModification]) -> BTreeMap<String, usize> {
    let regions: Vec<Region> = params.iter().map(|&u| region(u, dec, mods)).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..params.len() {
        for j in i + 1..params.len() {
            let label = classify(params[i], regions[i], params[j], regions[j], mods);
            *counts.entry(label.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

fn classify(s: f64, rs: Region, t: f64, rt: Region, mods: &[LocalModification]) -> &'static str {
    let within = |u: f64, lo: f64, hi: f64| lo <= u && u <= hi;
    match (rs, rt) {
        (Region::Terminal, _) | (_, Region::Terminal) => "terminal",
        (Region::Kept, Region::Kept) => "g",
        (Region::Window(a), Region::Window(b)) if a != b => "2",
        (Region::Window(k), Region::Window(_)) => {
            let t4 = mods[k].t;
            let (b1, c, b2) = ((t4[0], t4[1]), (t4[1], t4[2]), (t4[2], t4[3]));
            let both = |r: (f64, f64)| within(s, r.0, r.1) && within(t, r.0, r.1);
            if both(c) {
                "1.2"
            } else if both(b1) || both(b2) {
                "1.1"
            } else if (within(s, b1.0, b1.1) && within(t, b2.0, b2.1)) || (within(t, b1.0, b1.1) && within(s, b2.0, b2.1)) {
                "1.4"
            } else {
                "1.3"
            }
        }
        (Region::Kept, Region::Window(k)) | (Region::Window(k), Region::Kept) => {
            let (u, w) = if rs == Region::Kept { (s, t) } else { (t, s) };
            let m = &mods[k];
            let near_left = m.tau[0] < m.tau[1] && within(u, m.tau[0], m.t[0]);
            let near_right = m.tau[2] < m.tau[3] && within(u, m.t[3], m.tau[3]);
            let (near, far) = if near_left {
                ((m.t[0], m.t[1]), (m.t[2], m.t[3]))
            } else if near_right {
                ((m.t[2], m.t[3]), (m.t[0], m.t[1]))
            } else {
                return "3.2";
            };
            if near.0 < near.1 && within(w, near.0, near.1) {
                "3.1.1"
            } else if within(w, m.t[1], m.t[2]) {
                "3.1.2"
            } else if far.0 < far.1 && within(w, far.0, far.1) {
                "3.1.3"
            } else {
                "3.1.2"
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_gallery::{grid_id, grid_space};

    fn row_problem<'a>(space: &'a Space, a: &[f64], config: ExtensionConfig) -> ExtensionProblem<'a> {
        let pairs: Vec<(f64, VertexId)> = a.iter().map(|&t| (t, grid_id(&[t as usize, 4, 4], 9))).collect();
        ExtensionProblem::new(space, &pairs, config).unwrap()
    }

    #[test]
    fn straight_row_extends() {
        let g = grid_space(3, 9, 1.0).unwrap();
        let p = row_problem(&g, &[0.0, 8.0], ExtensionConfig::default());
        let res = extend(&p).unwrap();
        assert!(res.all_passed());
        assert_eq!(res.point_at(0.0), Some(p.f[0]));
        assert_eq!(res.point_at(8.0), Some(p.f[1]));
        assert!(res.report.l_measured <= 10.0 * p.l_measured, "L' {}", res.report.l_measured);
    }

    #[test]
    fn separated_reference_points() {
        let g = grid_space(3, 9, 1.0).unwrap();
        let p = row_problem(&g, &[0.0, 4.0, 8.0], ExtensionConfig::default());
        let s = p.settings().unwrap();
        let dec = p.decompose(&s).unwrap();
        let refs = reference_points(&p, &s, &dec).unwrap();
        for (i, a) in refs.points.iter().enumerate() {
            for (j, b) in refs.points.iter().enumerate().skip(i + 1) {
                let need = s.xi * (dec.endpoints[i].anchor_distance() + dec.endpoints[j].anchor_distance()) - 1.0;
                assert!(g.distance(*a, *b).unwrap() >= need.max(1.0));
            }
        }
    }

    #[test]
    fn adjacent_pair_is_a_geodesic() {
        let g = grid_space(3, 9, 1.0).unwrap();
        let p = row_problem(&g, &[3.0, 4.0], ExtensionConfig::default());
        let res = extend(&p).unwrap();
        assert_eq!(res.pieces.len(), 1);
        assert_eq!(res.report.l_measured, 1.0);
    }

    #[test]
    fn rejects_non_injective_map() {
        let g = grid_space(2, 4, 1.0).unwrap();
        let pairs = [(0.0, VertexId(0)), (1.0, VertexId(0))];
        assert!(matches!(ExtensionProblem::new(&g, &pairs, ExtensionConfig::default()), Err(ExtensionError::InvalidProblem(_))));
    }

    #[test]
    fn problem_file_round_trip() {
        let pairs = vec![(0.0, VertexId(3)), (0.5, VertexId(7)), (2.25, VertexId(1))];
        let file = ProblemFile::new(&pairs, ExtensionConfig::default());
        let text = serde_json::to_string(&file).unwrap();
        let back: ProblemFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.pairs().unwrap(), pairs);
    }
}
