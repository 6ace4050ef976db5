//! Finite geodesic metric measure spaces realized as weighted graphs.
//!
//! Distances are shortest-path lengths. Every shortest-path query breaks ties
//! by the smallest predecessor id, so geodesics are reproducible. Below
//! [`DEFAULT_CACHE_LIMIT`] vertices the single-source rows are memoized
//! lazily; the cache is write-once per row and invisible to callers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub const DEFAULT_CACHE_LIMIT: usize = 5000;
pub const REPORT_SEED: u64 = 0x5eed_b11e;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("must-include points {a} and {b} are only {distance} apart")]
    SeparationConflict { a: VertexId, b: VertexId, distance: f64 },
    #[error("empty point set")]
    EmptySet,
    #[error("curve has fewer than two distinct points")]
    DegenerateCurve,
    #[error("{a} and {b} are not adjacent")]
    NotAdjacent { a: VertexId, b: VertexId },
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

/// Vertex record used to build a space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct VertexRecord<S> {
    pub id: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<S>>,
    pub measure: S,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EdgeRecord<S> {
    pub u: VertexId,
    pub v: VertexId,
    pub len: S,
}

/// On-disk layout of a space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SpaceFile<S> {
    #[serde(default = "schema_one")]
    pub schema: u32,
    pub resolution: S,
    pub vertices: Vec<VertexRecord<S>>,
    pub edges: Vec<EdgeRecord<S>>,
}

fn schema_one() -> u32 {
    1
}

impl<S: Scalar> SpaceFile<S> {
    /// Converts every scalar to another precision.
    pub fn cast<T: Scalar>(&self) -> SpaceFile<T> {
        let c = |x: S| T::lit(x.to_f64_lossy());
        SpaceFile {
            schema: self.schema,
            resolution: c(self.resolution),
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id,
                    coords: v.coords.as_ref().map(|xs| xs.iter().map(|&x| c(x)).collect()),
                    measure: c(v.measure),
                })
                .collect(),
            edges: self.edges.iter().map(|e| EdgeRecord { u: e.u, v: e.v, len: c(e.len) }).collect(),
        }
    }
}

#[derive(Clone)]
pub struct MetricSpace<S> {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    coords: Vec<Option<Vec<S>>>,
    measure: Vec<S>,
    adjacency: Vec<Vec<(usize, S)>>,
    edges: Vec<(usize, usize, S)>,
    resolution: S,
    rows: Vec<OnceLock<Arc<Vec<S>>>>,
}

impl<S: Scalar> std::fmt::Debug for MetricSpace<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricSpace")
            .field("vertices", &self.ids.len())
            .field("edges", &self.edges.len())
            .field("resolution", &self.resolution)
            .finish()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry<S> {
    dist: S,
    node: usize,
}

impl<S: Scalar> Eq for HeapEntry<S> {}

impl<S: Scalar> Ord for HeapEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl<S: Scalar> PartialOrd for HeapEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> MetricSpace<S> {
    /// Builds a connected space. Edge lengths must lie in `(0, resolution]`.
    pub fn new(
        resolution: S,
        vertices: Vec<VertexRecord<S>>,
        edges: Vec<EdgeRecord<S>>,
    ) -> Result<Self, MetricError> {
        let space = Self::assemble(resolution, vertices, edges)?;
        if !space.is_connected() {
            return Err(MetricError::InvalidSpace("graph is disconnected".into()));
        }
        Ok(space)
    }

    fn assemble(
        resolution: S,
        mut vertices: Vec<VertexRecord<S>>,
        edges: Vec<EdgeRecord<S>>,
    ) -> Result<Self, MetricError> {
        if !(resolution > S::zero()) {
            return Err(MetricError::InvalidSpace("resolution must be positive".into()));
        }
        if vertices.is_empty() {
            return Err(MetricError::InvalidSpace("no vertices".into()));
        }
        vertices.sort_by_key(|v| v.id);
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.id, i).is_some() {
                return Err(MetricError::InvalidSpace(format!("duplicate vertex {}", v.id)));
            }
            if !(v.measure > S::zero()) {
                return Err(MetricError::InvalidSpace(format!("measure of {} not positive", v.id)));
            }
        }
        let n = vertices.len();
        let slack = resolution * S::lit(1e-9);
        let mut best: HashMap<(usize, usize), S> = HashMap::new();
        for e in &edges {
            let a = *index.get(&e.u).ok_or(MetricError::UnknownVertex(e.u))?;
            let b = *index.get(&e.v).ok_or(MetricError::UnknownVertex(e.v))?;
            if a == b {
                return Err(MetricError::InvalidSpace(format!("self loop at {}", e.u)));
            }
            if !(e.len > S::zero()) || e.len > resolution + slack {
                return Err(MetricError::InvalidSpace(format!(
                    "edge {}-{} has length {} outside (0, {}]",
                    e.u, e.v, e.len, resolution
                )));
            }
            let key = (a.min(b), a.max(b));
            let entry = best.entry(key).or_insert(e.len);
            if e.len < *entry {
                *entry = e.len;
            }
        }
        let mut edge_list: Vec<(usize, usize, S)> = best.into_iter().map(|((a, b), l)| (a, b, l)).collect();
        edge_list.sort_by_key(|x| (x.0, x.1));
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, l) in &edge_list {
            adjacency[a].push((b, l));
            adjacency[b].push((a, l));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(j, _)| j);
        }
        let rows = if n <= DEFAULT_CACHE_LIMIT {
            (0..n).map(|_| OnceLock::new()).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            ids: vertices.iter().map(|v| v.id).collect(),
            index,
            coords: vertices.iter().map(|v| v.coords.clone()).collect(),
            measure: vertices.iter().map(|v| v.measure).collect(),
            adjacency,
            edges: edge_list,
            resolution,
            rows,
        })
    }

    /// Induced subgraph on the vertices with `keep[i]`. The result may be
    /// disconnected; distances across components are infinite.
    pub fn induced(&self, keep: &[bool]) -> Result<Self, MetricError> {
        let vertices = (0..self.len())
            .filter(|&i| keep[i])
            .map(|i| VertexRecord { id: self.ids[i], coords: self.coords[i].clone(), measure: self.measure[i] })
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b, _)| keep[a] && keep[b])
            .map(|&(a, b, len)| EdgeRecord { u: self.ids[a], v: self.ids[b], len })
            .collect();
        Self::assemble(self.resolution, vertices, edges)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn resolution(&self) -> S {
        self.resolution
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> VertexId {
        self.ids[i]
    }

    pub fn index(&self, id: VertexId) -> Result<usize, MetricError> {
        self.index.get(&id).copied().ok_or(MetricError::UnknownVertex(id))
    }

    pub fn contains(&self, id: VertexId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn indices(&self, ids: &[VertexId]) -> Result<Vec<usize>, MetricError> {
        ids.iter().map(|&v| self.index(v)).collect()
    }

    pub fn coords(&self, id: VertexId) -> Option<&[S]> {
        self.index.get(&id).and_then(|&i| self.coords[i].as_deref())
    }

    pub fn coords_at(&self, i: usize) -> Option<&[S]> {
        self.coords[i].as_deref()
    }

    pub fn has_coords(&self) -> bool {
        self.coords.iter().all(Option::is_some)
    }

    pub fn measure_at(&self, i: usize) -> S {
        self.measure[i]
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, S)] {
        &self.adjacency[i]
    }

    pub fn edges(&self) -> &[(usize, usize, S)] {
        &self.edges
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<S> {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(j, _)| j)
            .ok()
            .map(|k| self.adjacency[a][k].1)
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from_index(0).iter().all(|d| d.is_finite())
    }

    fn run_dijkstra(&self, sources: &[usize]) -> Vec<S> {
        let n = self.len();
        let mut dist = vec![S::infinity(); n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if dist[s] > S::zero() {
                dist[s] = S::zero();
                heap.push(HeapEntry { dist: S::zero(), node: s });
            }
        }
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(next, len) in &self.adjacency[node] {
                let cand = d + len;
                if cand < dist[next] {
                    dist[next] = cand;
                    heap.push(HeapEntry { dist: cand, node: next });
                }
            }
        }
        dist
    }

    /// Single-source distances, index aligned.
    pub fn distances_from_index(&self, i: usize) -> Arc<Vec<S>> {
        match self.rows.get(i) {
            Some(cell) => cell.get_or_init(|| Arc::new(self.run_dijkstra(&[i]))).clone(),
            None => Arc::new(self.run_dijkstra(&[i])),
        }
    }

    pub fn distances_from(&self, id: VertexId) -> Result<Arc<Vec<S>>, MetricError> {
        Ok(self.distances_from_index(self.index(id)?))
    }

    /// Distance from every vertex to the nearest of `sources` (infinite if empty).
    pub fn distances_to_set(&self, sources: &[usize]) -> Vec<S> {
        if sources.len() == 1 {
            return self.distances_from_index(sources[0]).as_ref().clone();
        }
        self.run_dijkstra(sources)
    }

    pub fn dist_idx(&self, a: usize, b: usize) -> S {
        if a == b {
            return S::zero();
        }
        self.distances_from_index(a)[b]
    }

    pub fn distance(&self, u: VertexId, v: VertexId) -> Result<S, MetricError> {
        let a = self.index(u)?;
        let b = self.index(v)?;
        Ok(self.dist_idx(a, b))
    }

    fn tie_tolerance(d: S) -> S {
        S::epsilon() * S::lit(64.0) * (S::one() + d)
    }

    /// Vertex indices of the lexicographically smallest shortest path `a -> b`.
    /// Empty when `b` is unreachable.
    pub fn geodesic_indices(&self, a: usize, b: usize) -> Vec<usize> {
        if a == b {
            return vec![a];
        }
        let dist = self.distances_from_index(a);
        if !dist[b].is_finite() {
            return Vec::new();
        }
        let mut rev = vec![b];
        let mut cur = b;
        while cur != a {
            let target = dist[cur];
            let tol = Self::tie_tolerance(target);
            let pred = self.adjacency[cur]
                .iter()
                .find(|&&(u, len)| (dist[u] + len - target).abs() <= tol && dist[u] < target)
                .map(|&(u, _)| u)
                .expect("shortest path tree is consistent");
            rev.push(pred);
            cur = pred;
        }
        rev.reverse();
        rev
    }

    pub fn geodesic(&self, u: VertexId, v: VertexId) -> Result<Curve<S>, MetricError> {
        let a = self.index(u)?;
        let b = self.index(v)?;
        let path = self.geodesic_indices(a, b);
        if path.is_empty() {
            return Err(MetricError::InvalidSpace(format!("{v} unreachable from {u}")));
        }
        Ok(self.curve_from_indices(&path))
    }

    /// Builds a curve from a walk given by adjacent indices (consecutive repeats dropped).
    pub fn curve_from_indices(&self, path: &[usize]) -> Curve<S> {
        let mut points = Vec::with_capacity(path.len());
        let mut cum = Vec::with_capacity(path.len());
        for &i in path {
            match points.last() {
                None => {
                    points.push(self.ids[i]);
                    cum.push(S::zero());
                }
                Some(&last) => {
                    let li = self.index[&last];
                    if li == i {
                        continue;
                    }
                    let len = self.edge_length(li, i).expect("walk must follow edges");
                    let prev = *cum.last().unwrap();
                    points.push(self.ids[i]);
                    cum.push(prev + len);
                }
            }
        }
        Curve { points, cum_length: cum }
    }

    /// Vertices at distance strictly less than `r` from `center`.
    pub fn ball(&self, center: VertexId, r: S) -> Result<Vec<VertexId>, MetricError> {
        let dist = self.distances_from(center)?;
        Ok((0..self.len()).filter(|&i| dist[i] < r).map(|i| self.ids[i]).collect())
    }

    /// Greedy maximal `eps`-separated subset of `subset` containing `must_include`.
    pub fn separated_net(
        &self,
        subset: &[VertexId],
        eps: S,
        must_include: &[VertexId],
    ) -> Result<Vec<VertexId>, MetricError> {
        let mut members = self.indices(subset)?;
        members.sort_unstable();
        members.dedup();
        let forced = self.indices(must_include)?;
        let mut net: Vec<usize> = Vec::new();
        let mut nearest = vec![S::infinity(); self.len()];
        for &f in &forced {
            if net.contains(&f) {
                continue;
            }
            if let Some(&other) = net.iter().find(|&&g| self.dist_idx(f, g) < eps) {
                return Err(MetricError::SeparationConflict {
                    a: self.ids[other],
                    b: self.ids[f],
                    distance: self.dist_idx(f, other).to_f64_lossy(),
                });
            }
            self.absorb(&mut nearest, f);
            net.push(f);
        }
        for &m in &members {
            if nearest[m] >= eps {
                self.absorb(&mut nearest, m);
                net.push(m);
            }
        }
        let mut out: Vec<VertexId> = net.into_iter().map(|i| self.ids[i]).collect();
        out.sort_unstable();
        Ok(out)
    }

    fn absorb(&self, nearest: &mut [S], i: usize) {
        let row = self.distances_from_index(i);
        for (slot, &d) in nearest.iter_mut().zip(row.iter()) {
            if d < *slot {
                *slot = d;
            }
        }
    }

    pub fn hausdorff_distance(&self, s1: &[VertexId], s2: &[VertexId]) -> Result<S, MetricError> {
        if s1.is_empty() || s2.is_empty() {
            return Err(MetricError::EmptySet);
        }
        let a = self.indices(s1)?;
        let b = self.indices(s2)?;
        Ok(self.directed_hausdorff(&a, &b).max(self.directed_hausdorff(&b, &a)))
    }

    /// `sup_{x in from} dist(x, to)`.
    pub fn directed_hausdorff(&self, from: &[usize], to: &[usize]) -> S {
        let d = self.distances_to_set(to);
        from.iter().map(|&i| d[i]).fold(S::zero(), S::max)
    }

    pub fn diameter_of(&self, set: &[usize]) -> S {
        let mut best = S::zero();
        for (k, &i) in set.iter().enumerate() {
            let row = self.distances_from_index(i);
            for &j in &set[k + 1..] {
                best = best.max(row[j]);
            }
        }
        best
    }

    /// Distortion of `curve` under its arc-length parameter `t in [0,1]`.
    pub fn bilip_report(
        &self,
        curve: &Curve<S>,
        scale: S,
        sample_budget: usize,
    ) -> Result<BiLipschitzReport<S>, MetricError> {
        let total = curve.length();
        if curve.points.len() < 2 || !(total > S::zero()) {
            return Err(MetricError::DegenerateCurve);
        }
        let samples: Vec<(S, usize)> = curve
            .points
            .iter()
            .zip(&curve.cum_length)
            .map(|(&p, &c)| Ok((c / total, self.index(p)?)))
            .collect::<Result<_, MetricError>>()?;
        BiLipschitzReport::from_samples(self, &samples, scale, S::zero(), sample_budget, REPORT_SEED)
    }

    pub fn to_file(&self) -> SpaceFile<S> {
        SpaceFile {
            schema: 1,
            resolution: self.resolution,
            vertices: (0..self.len())
                .map(|i| VertexRecord { id: self.ids[i], coords: self.coords[i].clone(), measure: self.measure[i] })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b, len)| EdgeRecord { u: self.ids[a], v: self.ids[b], len })
                .collect(),
        }
    }

    pub fn from_file(file: SpaceFile<S>) -> Result<Self, MetricError> {
        Self::new(file.resolution, file.vertices, file.edges)
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, MetricError> {
        let file: SpaceFile<S> = serde_json::from_reader(reader).map_err(|e| MetricError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), MetricError> {
        serde_json::to_writer(writer, &self.to_file()).map_err(|e| MetricError::Parse(e.to_string()))
    }
}

/// Vertex sequence with cumulative arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve<S> {
    points: Vec<VertexId>,
    cum_length: Vec<S>,
}

impl<S: Scalar> Curve<S> {
    pub fn single(v: VertexId) -> Self {
        Self { points: vec![v], cum_length: vec![S::zero()] }
    }

    /// Validates adjacency; consecutive duplicates are collapsed.
    pub fn from_vertices(space: &MetricSpace<S>, points: &[VertexId]) -> Result<Self, MetricError> {
        if points.is_empty() {
            return Err(MetricError::EmptySet);
        }
        let idx = space.indices(points)?;
        for w in idx.windows(2) {
            if w[0] != w[1] && space.edge_length(w[0], w[1]).is_none() {
                return Err(MetricError::NotAdjacent { a: space.id(w[0]), b: space.id(w[1]) });
            }
        }
        Ok(space.curve_from_indices(&idx))
    }

    pub fn points(&self) -> &[VertexId] {
        &self.points
    }

    pub fn cum_length(&self) -> &[S] {
        &self.cum_length
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    pub fn length(&self) -> S {
        *self.cum_length.last().unwrap_or(&S::zero())
    }

    pub fn first(&self) -> VertexId {
        self.points[0]
    }

    pub fn last(&self) -> VertexId {
        *self.points.last().unwrap()
    }

    /// Normalized parameter of the `i`-th vertex.
    pub fn param(&self, i: usize) -> S {
        let total = self.length();
        if total > S::zero() {
            self.cum_length[i] / total
        } else {
            S::zero()
        }
    }

    /// Nearest curve vertex to parameter `t in [0,1]` (earlier vertex on ties).
    pub fn point_at(&self, t: S) -> VertexId {
        self.points[self.index_at(t)]
    }

    pub fn index_at(&self, t: S) -> usize {
        let target = t.max(S::zero()).min(S::one()) * self.length();
        let k = self.cum_length.partition_point(|&c| c < target);
        if k == 0 {
            return 0;
        }
        if k >= self.points.len() {
            return self.points.len() - 1;
        }
        if target - self.cum_length[k - 1] <= self.cum_length[k] - target {
            k - 1
        } else {
            k
        }
    }

    pub fn reversed(&self) -> Self {
        let total = self.length();
        Self {
            points: self.points.iter().rev().copied().collect(),
            cum_length: self.cum_length.iter().rev().map(|&c| total - c).collect(),
        }
    }

    /// Prefix ending at vertex `i` inclusive.
    pub fn truncated(&self, i: usize) -> Self {
        Self { points: self.points[..=i].to_vec(), cum_length: self.cum_length[..=i].to_vec() }
    }

    /// Sub-curve between vertex positions `i..=j`, re-based at zero.
    pub fn slice(&self, i: usize, j: usize) -> Self {
        let base = self.cum_length[i];
        Self {
            points: self.points[i..=j].to_vec(),
            cum_length: self.cum_length[i..=j].iter().map(|&c| c - base).collect(),
        }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &Curve<S>) -> Result<Self, MetricError> {
        if self.last() != other.first() {
            return Err(MetricError::NotAdjacent { a: self.last(), b: other.first() });
        }
        let offset = self.length();
        let mut out = self.clone();
        out.points.extend_from_slice(&other.points[1..]);
        out.cum_length.extend(other.cum_length[1..].iter().map(|&c| c + offset));
        Ok(out)
    }

    pub fn distinct_points(&self) -> Vec<VertexId> {
        let mut v = self.points.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// CSV with header `t,vertex_id,x0,..`; coordinates when the space has them.
    pub fn write_csv<W: Write>(&self, space: &MetricSpace<S>, writer: W) -> Result<(), MetricError> {
        let dim = self.points.iter().filter_map(|&p| space.coords(p)).map(<[S]>::len).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "vertex_id".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        w.write_record(&header).map_err(|e| MetricError::Parse(e.to_string()))?;
        for (i, &p) in self.points.iter().enumerate() {
            let mut row = vec![format!("{}", self.param(i)), p.0.to_string()];
            if let Some(c) = space.coords(p) {
                row.extend(c.iter().map(|x| format!("{x}")));
            }
            row.resize(dim + 2, String::new());
            w.write_record(&row).map_err(|e| MetricError::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| MetricError::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(space: &MetricSpace<S>, reader: R) -> Result<Self, MetricError> {
        let mut r = csv::Reader::from_reader(reader);
        let col = r
            .headers()
            .map_err(|e| MetricError::Parse(e.to_string()))?
            .iter()
            .position(|h| h == "vertex_id")
            .ok_or_else(|| MetricError::Parse("missing vertex_id column".into()))?;
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| MetricError::Parse(e.to_string()))?;
            let id: usize = rec[col].trim().parse().map_err(|_| MetricError::Parse(format!("bad vertex id {:?}", &rec[col])))?;
            points.push(VertexId(id));
        }
        Self::from_vertices(space, &points)
    }
}

/// Measured distortion of a parameterized point sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLipschitzReport<S> {
    pub lower: S,
    pub upper: S,
    #[serde(rename = "L_measured")]
    pub l_measured: S,
    pub scale: S,
    pub pairs: usize,
    pub exhaustive: bool,
}

impl<S: Scalar> BiLipschitzReport<S> {
    /// Ratios `d(x_i, x_j) / (|s_i - s_j| * scale)` over pairs whose parameter
    /// gap is positive and at least `min_gap`. All pairs are used when
    /// `count^2 <= budget`; otherwise `budget` seeded random pairs.
    pub fn from_samples(
        space: &MetricSpace<S>,
        samples: &[(S, usize)],
        scale: S,
        min_gap: S,
        budget: usize,
        seed: u64,
    ) -> Result<Self, MetricError> {
        let m = samples.len();
        if m < 2 || samples.iter().all(|s| s.1 == samples[0].1) {
            return Err(MetricError::DegenerateCurve);
        }
        let mut rows: HashMap<usize, Arc<Vec<S>>> = HashMap::new();
        let mut lower = S::infinity();
        let mut upper = S::zero();
        let mut pairs = 0usize;
        let mut visit = |i: usize, j: usize, rows: &mut HashMap<usize, Arc<Vec<S>>>| {
            let (si, vi) = samples[i];
            let (sj, vj) = samples[j];
            let gap = (si - sj).abs();
            if !(gap > S::zero()) || gap < min_gap {
                return;
            }
            let row = rows.entry(vi).or_insert_with(|| space.distances_from_index(vi)).clone();
            let ratio = row[vj] / (gap * scale);
            lower = lower.min(ratio);
            upper = upper.max(ratio);
            pairs += 1;
        };
        let exhaustive = m.saturating_mul(m) <= budget;
        if exhaustive {
            for i in 0..m {
                for j in i + 1..m {
                    visit(i, j, &mut rows);
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..budget {
                let (i, j) = if k + 1 < m { (k, k + 1) } else { (rng.gen_range(0..m), rng.gen_range(0..m)) };
                if i != j {
                    visit(i.min(j), i.max(j), &mut rows);
                }
            }
        }
        if pairs == 0 {
            return Err(MetricError::DegenerateCurve);
        }
        let l_measured = if lower > S::zero() { upper.max(S::one() / lower) } else { S::infinity() };
        Ok(Self { lower, upper, l_measured, scale, pairs, exhaustive })
    }
}
