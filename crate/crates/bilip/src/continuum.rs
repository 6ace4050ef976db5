//! Tracing a connected set by a bi-Lipschitz curve that passes near all of it.
//!
//! A separated net of `K` is joined by a proximity graph, reduced to a
//! minimum spanning tree and walked by a tour that uses every edge at most
//! twice. Repeated visits are moved to distinct nearby vertices, the walk is
//! laid out on an evenly spaced `A` on the line, and the extension pipeline
//! fills in the rest.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extension::{extend, ExtensionConfig, ExtensionError, ExtensionProblem, ExtensionResult};
use crate::metric_core::{MetricError, VertexId};
use crate::{Path, Space};

#[derive(Debug, Error)]
pub enum ContinuumError {
    #[error("edge list is not a tree on vertices 0..{n}: {detail}")]
    NotATree { n: usize, detail: String },
    #[error("tour endpoints coincide")]
    EqualEndpoints,
    #[error("K is not connected")]
    DisconnectedK,
    #[error("endpoints are {distance} apart, below eps * diam K = {needed}")]
    EndpointsTooClose { distance: f64, needed: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no free vertex within {radius} of net point {center} for a repeated visit")]
    PerturbationFailed { center: VertexId, radius: f64 },
    #[error("trace certificate '{clause}' failed: {detail}")]
    CertificationFailed { clause: String, detail: String },
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl ContinuumError {
    pub fn is_certified_failure(&self) -> bool {
        match self {
            Self::PerturbationFailed { .. } | Self::CertificationFailed { .. } => true,
            Self::Extension(e) => e.is_certified_failure(),
            _ => false,
        }
    }
}

/// Adjacency lists of a tree given by its edges, vertices `0..=edges.len()`.
fn tree_adjacency(edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>, ContinuumError> {
    let n = edges.len() + 1;
    let not_tree = |detail: String| ContinuumError::NotATree { n, detail };
    let mut adj = vec![Vec::new(); n];
    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], mut i: usize) -> usize {
        while root[i] != i {
            root[i] = root[root[i]];
            i = root[i];
        }
        i
    }
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(not_tree(format!("edge ({a},{b}) out of range")));
        }
        let (ra, rb) = (find(&mut root, a), find(&mut root, b));
        if ra == rb {
            return Err(not_tree(format!("edge ({a},{b}) closes a cycle")));
        }
        root[ra] = rb;
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(adj)
}

/// Walk from `start` to `end` through every vertex of the tree, using each
/// edge at most twice.
///
/// The walk follows the path from `start` to `end` and, at each vertex of
/// it, first tours the subtrees hanging off that vertex and returns. Edges
/// of the path are used once, all others twice, which is the shortest
/// possible covering walk.
pub fn euler_tour_2to1(edges: &[(usize, usize)], start: usize, end: usize) -> Result<Vec<usize>, ContinuumError> {
    let adj = tree_adjacency(edges)?;
    let n = adj.len();
    if start >= n || end >= n {
        return Err(ContinuumError::NotATree { n, detail: format!("endpoint {} out of range", start.max(end)) });
    }
    if start == end {
        return Err(ContinuumError::EqualEndpoints);
    }
    let mut parent = vec![usize::MAX; n];
    parent[end] = end;
    let mut queue = VecDeque::from([end]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if parent[w] == usize::MAX {
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    let mut spine = vec![start];
    while *spine.last().unwrap() != end {
        spine.push(parent[*spine.last().unwrap()]);
    }
    let mut on_spine = vec![false; n];
    for &s in &spine {
        on_spine[s] = true;
    }

    let mut tour = Vec::with_capacity(2 * n);
    for &s in &spine {
        tour.push(s);
        for &c in &adj[s] {
            if !on_spine[c] {
                // iterative depth-first walk of the hanging subtree
                let mut stack = vec![(c, s, 0usize)];
                tour.push(c);
                while let Some(top) = stack.last_mut() {
                    let (u, from, next) = *top;
                    match adj[u][next..].iter().position(|&w| w != from) {
                        Some(off) => {
                            let w = adj[u][next + off];
                            top.2 = next + off + 1;
                            tour.push(w);
                            stack.push((w, u, 0));
                        }
                        None => {
                            stack.pop();
                            tour.push(from);
                        }
                    }
                }
            }
        }
    }
    Ok(tour)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCount {
    pub a: usize,
    pub b: usize,
    pub count: usize,
}

/// Checks a walk against the tree: endpoints, adjacency, coverage and edge
/// multiplicities. Returns the multiplicity of every edge.
pub fn check_tour(
    edges: &[(usize, usize)],
    start: usize,
    end: usize,
    tour: &[usize],
) -> Result<Vec<EdgeCount>, String> {
    let n = edges.len() + 1;
    if tour.first() != Some(&start) || tour.last() != Some(&end) {
        return Err(format!("tour runs {:?}..{:?}, expected {start}..{end}", tour.first(), tour.last()));
    }
    let mut counts: BTreeMap<(usize, usize), usize> = edges.iter().map(|&(a, b)| ((a.min(b), a.max(b)), 0)).collect();
    let mut seen = vec![false; n];
    for &v in tour {
        *seen.get_mut(v).ok_or(format!("vertex {v} out of range"))? = true;
    }
    for w in tour.windows(2) {
        let key = (w[0].min(w[1]), w[0].max(w[1]));
        let c = counts.get_mut(&key).ok_or(format!("step {}-{} is not a tree edge", w[0], w[1]))?;
        *c += 1;
        if *c > 2 {
            return Err(format!("edge {}-{} used more than twice", key.0, key.1));
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(format!("vertex {v} never visited"));
    }
    Ok(counts.into_iter().map(|((a, b), count)| EdgeCount { a, b, count }).collect())
}

/// Everything decided before the extension runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TourPlan {
    pub net: Vec<VertexId>,
    /// Spanning tree of the proximity graph, as net indices.
    pub tree_edges: Vec<(usize, usize)>,
    /// Net indices in visiting order.
    pub tour: Vec<usize>,
    pub multiplicity: Vec<EdgeCount>,
    /// The vertex used for each tour position; distinct across positions.
    pub perturbed: Vec<VertexId>,
    pub perturb_radius: f64,
    /// Smallest distance between two perturbed points around one net point.
    pub min_separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub clause: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumTrace {
    pub curve: Path,
    pub plan: TourPlan,
    pub diam: f64,
    pub eps: f64,
    /// Smallest Whitney interval the extension ran with.
    pub r_min: f64,
    /// Distortion of the map from `A` onto the perturbed tour points.
    pub l_map: f64,
    pub hausdorff: f64,
    pub checks: Vec<TraceCheck>,
    pub extension: ExtensionResult,
}

fn component_count(space: &Space, members: &[usize]) -> usize {
    let mut inside = vec![false; space.len()];
    for &m in members {
        inside[m] = true;
    }
    let mut seen = vec![false; space.len()];
    let mut count = 0;
    for &m in members {
        if seen[m] {
            continue;
        }
        count += 1;
        seen[m] = true;
        let mut stack = vec![m];
        while let Some(u) = stack.pop() {
            for &(w, _) in space.neighbors(u) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// Kruskal on the complete proximity graph of `net`, ties broken by index.
fn proximity_tree(space: &Space, net: &[usize], reach: f64) -> Option<Vec<(usize, usize)>> {
    let mut cand = Vec::new();
    for i in 0..net.len() {
        let row = space.distances_from_index(net[i]);
        for j in i + 1..net.len() {
            let d = row[net[j]];
            if d < reach {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut root: Vec<usize> = (0..net.len()).collect();
    let find = |root: &mut Vec<usize>, mut i: usize| {
        while root[i] != i {
            root[i] = root[root[i]];
            i = root[i];
        }
        i
    };
    let mut tree = Vec::with_capacity(net.len().saturating_sub(1));
    for (_, i, j) in cand {
        let (ri, rj) = (find(&mut root, i), find(&mut root, j));
        if ri != rj {
            root[ri] = rj;
            tree.push((i, j));
        }
    }
    (tree.len() + 1 == net.len()).then_some(tree)
}

/// Assigns a distinct vertex to every tour position. The first visit of a
/// net point keeps the point itself (the last one, for the end point); the
/// others go to free vertices near it, chosen farthest-first.
fn perturb(
    space: &Space,
    net: &[usize],
    tour: &[usize],
    end: usize,
    radius: f64,
) -> Result<(Vec<VertexId>, f64), ContinuumError> {
    let mut visits: Vec<Vec<usize>> = vec![Vec::new(); net.len()];
    for (pos, &z) in tour.iter().enumerate() {
        visits[z].push(pos);
    }
    visits[end].reverse();

    let mut used = vec![false; space.len()];
    let mut chosen: Vec<usize> = net.to_vec();
    for &z in net {
        used[z] = true;
    }
    let mut slot = vec![usize::MAX; tour.len()];
    let mut min_sep = f64::INFINITY;
    for (z, positions) in visits.iter().enumerate() {
        let Some((&first, rest)) = positions.split_first() else { continue };
        slot[first] = net[z];
        if rest.is_empty() {
            continue;
        }
        let row = space.distances_from_index(net[z]);
        let ball: Vec<usize> = (0..space.len()).filter(|&v| row[v] < radius).collect();
        let mut local = vec![net[z]];
        // distance of each ball vertex to everything placed so far
        let mut near: Vec<f64> = ball
            .iter()
            .map(|&v| chosen.iter().map(|&c| space.dist_idx(v, c)).fold(f64::INFINITY, f64::min))
            .collect();
        for &pos in rest {
            let best = (0..ball.len())
                .filter(|&k| !used[ball[k]])
                .max_by(|&a, &b| near[a].total_cmp(&near[b]).then(b.cmp(&a)))
                .ok_or(ContinuumError::PerturbationFailed { center: space.id(net[z]), radius })?;
            let v = ball[best];
            used[v] = true;
            for &u in &local {
                min_sep = min_sep.min(space.dist_idx(u, v));
            }
            local.push(v);
            chosen.push(v);
            for (k, &w) in ball.iter().enumerate() {
                near[k] = near[k].min(space.dist_idx(w, v));
            }
            slot[pos] = v;
        }
    }
    Ok((slot.into_iter().map(|i| space.id(i)).collect(), min_sep))
}

/// Builds the net, tree, tour and perturbed points for `k`.
pub fn plan_tour(space: &Space, k: &[VertexId], eps: f64, x: VertexId, y: VertexId) -> Result<(TourPlan, f64), ContinuumError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ContinuumError::InvalidInput(format!("eps = {eps} must lie in (0,1)")));
    }
    let mut members = space.indices(k)?;
    members.sort_unstable();
    members.dedup();
    let (ix, iy) = (space.index(x)?, space.index(y)?);
    if members.binary_search(&ix).is_err() || members.binary_search(&iy).is_err() {
        return Err(ContinuumError::InvalidInput("x and y must lie in K".into()));
    }
    if component_count(space, &members) != 1 {
        return Err(ContinuumError::DisconnectedK);
    }
    let diam = space.diameter_of(&members);
    let dxy = space.dist_idx(ix, iy);
    if x == y || dxy < eps * diam {
        return Err(ContinuumError::EndpointsTooClose { distance: dxy, needed: eps * diam });
    }
    let h = space.resolution();

    let net_ids = space.separated_net(k, eps / 4.0 * diam, &[x, y])?;
    let net = space.indices(&net_ids)?;
    // adjacent vertices of K sit in net balls at most ε/2 + h apart
    let tree = proximity_tree(space, &net, eps / 2.0 * diam + h).ok_or(ContinuumError::DisconnectedK)?;
    let start = net_ids.iter().position(|&v| v == x).unwrap();
    let end = net_ids.iter().position(|&v| v == y).unwrap();
    let tour = euler_tour_2to1(&tree, start, end)?;
    let multiplicity = check_tour(&tree, start, end, &tour).map_err(|detail| ContinuumError::NotATree { n: net.len(), detail })?;

    let radius = (eps * diam / 16.0).max(2.0 * h);
    let (perturbed, min_separation) = perturb(space, &net, &tour, end, radius)?;
    let plan = TourPlan {
        net: net_ids,
        tree_edges: tree,
        tour,
        multiplicity,
        perturbed,
        perturb_radius: radius,
        min_separation,
    };
    Ok((plan, diam))
}

/// Traces `k` from `x` to `y` with tolerance `eps` relative to its diameter.
pub fn continuum_trace(
    space: &Space,
    k: &[VertexId],
    eps: f64,
    x: VertexId,
    y: VertexId,
    config: ExtensionConfig,
) -> Result<ContinuumTrace, ContinuumError> {
    let (plan, diam) = plan_tour(space, k, eps, x, y)?;
    let h = space.resolution();
    let step = eps * diam;
    let pairs: Vec<(f64, VertexId)> = plan.perturbed.iter().enumerate().map(|(i, &v)| (i as f64 * step, v)).collect();
    // Whitney intervals much finer than the spacing of A only crowd the
    // neighborhoods of f(A); start at a quarter of it and coarsen once.
    let ladder: Vec<f64> = match config.r_min {
        Some(r) => vec![r],
        None => vec![step / 4.0, step / 2.0],
    };
    let mut outcome = None;
    for (k, &r_min) in ladder.iter().enumerate() {
        let problem = ExtensionProblem::new(space, &pairs, ExtensionConfig { r_min: Some(r_min), ..config.clone() })?;
        match extend(&problem) {
            Ok(ext) => {
                outcome = Some((ext, problem.l_measured, r_min));
                break;
            }
            Err(e) if e.is_certified_failure() && k + 1 < ladder.len() => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let (extension, l_map, r_min) = outcome.expect("ladder ends in success or error");

    let points: Vec<VertexId> = extension.samples().into_iter().map(|s| s.1).collect();
    let curve = Path::from_vertices(space, &points)?;
    let hausdorff = space.hausdorff_distance(k, curve.points())?;

    let on_curve = space.indices(curve.points())?;
    let net_idx = space.indices(&plan.net)?;
    let net_reach = space.directed_hausdorff(&net_idx, &on_curve);
    let mut checks = vec![
        TraceCheck { clause: "Hausdorff distance to K".into(), value: hausdorff, bound: eps * diam + 2.0 * h, passed: false },
        TraceCheck { clause: "net points near the curve".into(), value: net_reach, bound: eps / 2.0 * diam + h, passed: false },
        TraceCheck {
            clause: "curve endpoints".into(),
            value: f64::from(u8::from(curve.first() != x) + u8::from(curve.last() != y)),
            bound: 0.0,
            passed: false,
        },
    ];
    for c in &mut checks {
        c.passed = c.value <= c.bound;
    }
    if let Some(c) = checks.iter().find(|c| !c.passed) {
        return Err(ContinuumError::CertificationFailed {
            clause: c.clause.clone(),
            detail: format!("{} > {}", c.value, c.bound),
        });
    }
    Ok(ContinuumTrace { curve, plan, diam, eps, r_min, l_map, hausdorff, checks, extension })
}
