//! Curve straightening: replace a curve by a bi-Lipschitz one with the same
//! endpoints that stays in a thin tube around it.
//!
//! The building block is [`concat_to_point`]: cut a curve at its point
//! nearest to a target and continue by a geodesic. The triangle inequality
//! only guarantees that this takes distortion `L` to `2L + 1`; in practice the
//! folded chains stay far below `2^(n-1)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_core::{BiLipschitzReport, Curve, MetricError, MetricSpace, VertexId};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum StraightenError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no chain of net points joins the endpoints at gap {gap}")]
    ChainNotFound { gap: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StraightenConfig<S> {
    /// Tube radius relative to the curve's diameter.
    pub eps: S,
    pub net_factor: S,
    pub chain_gap_factor: S,
}

impl<S: Scalar> StraightenConfig<S> {
    pub fn new(eps: S) -> Self {
        Self { eps, net_factor: S::lit(0.25), chain_gap_factor: S::lit(0.5) }
    }

    pub fn validate(&self) -> Result<(), StraightenError> {
        let unit = |x: S| x > S::zero() && x < S::one();
        if !unit(self.eps) || !unit(self.net_factor) || !unit(self.chain_gap_factor) {
            return Err(StraightenError::InvalidConfig(format!(
                "eps={}, net_factor={}, chain_gap_factor={} must lie in (0,1)",
                self.eps, self.net_factor, self.chain_gap_factor
            )));
        }
        Ok(())
    }
}

/// Truncates `f` at its first vertex nearest to `p` and appends the geodesic to `p`.
pub fn concat_to_point<S: Scalar>(space: &MetricSpace<S>, f: &Curve<S>, p: VertexId) -> Result<Curve<S>, MetricError> {
    let row = space.distances_from(p)?;
    let mut best = 0;
    let mut best_d = S::infinity();
    for (k, &v) in f.points().iter().enumerate() {
        let d = row[space.index(v)?];
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    let head = f.truncated(best);
    let tail = space.geodesic(head.last(), p)?;
    head.concat(&tail)
}

/// One folding step of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FoldStep<S> {
    pub target: VertexId,
    pub length: S,
    /// Distortion of the partial curve; `None` while it is a single point.
    pub l_measured: Option<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StraightenTrace<S> {
    pub curve: Curve<S>,
    /// Whether the endpoints were close enough to take the plain geodesic.
    pub shortcut: bool,
    pub chain: Vec<VertexId>,
    pub steps: Vec<FoldStep<S>>,
    pub diam: S,
}

impl<S: Scalar> StraightenTrace<S> {
    /// Number of hops in the chain; zero for the shortcut branch.
    pub fn hops(&self) -> usize {
        self.chain.len().saturating_sub(1)
    }
}

pub fn straighten<S: Scalar>(
    space: &MetricSpace<S>,
    sigma: &Curve<S>,
    config: &StraightenConfig<S>,
) -> Result<Curve<S>, StraightenError> {
    Ok(straighten_traced(space, sigma, config, false)?.curve)
}

/// Same as [`straighten`], also returning the chain and, when `report_steps`
/// is set, the distortion after every fold.
pub fn straighten_traced<S: Scalar>(
    space: &MetricSpace<S>,
    sigma: &Curve<S>,
    config: &StraightenConfig<S>,
    report_steps: bool,
) -> Result<StraightenTrace<S>, StraightenError> {
    config.validate()?;
    let pts = sigma.distinct_points();
    if sigma.vertex_count() < 2 || pts.len() < 2 {
        return Err(MetricError::DegenerateCurve.into());
    }
    let idx = space.indices(&pts)?;
    let diam = space.diameter_of(&idx);
    let (start, end) = (sigma.first(), sigma.last());
    if space.distance(start, end)? < S::lit(2.0) * config.eps * diam {
        let curve = space.geodesic(start, end)?;
        return Ok(StraightenTrace { curve, shortcut: true, chain: vec![start, end], steps: Vec::new(), diam });
    }

    let spacing = config.eps * config.net_factor * diam;
    let net = space.separated_net(&pts, spacing, &[start, end])?;
    // consecutive curve vertices are up to one resolution step apart
    let gap = config.eps * config.chain_gap_factor * diam + space.resolution();
    let chain = shortest_chain(space, &net, start, end, gap)
        .ok_or(StraightenError::ChainNotFound { gap: gap.to_f64_lossy() })?;

    let mut curve = Curve::single(start);
    let mut steps = Vec::with_capacity(chain.len() - 1);
    for &target in &chain[1..] {
        curve = concat_to_point(space, &curve, target)?;
        let l_measured = if report_steps && curve.length() > S::zero() {
            Some(space.bilip_report(&curve, curve.length(), usize::MAX)?.l_measured)
        } else {
            None
        };
        steps.push(FoldStep { target, length: curve.length(), l_measured });
    }
    Ok(StraightenTrace { curve, shortcut: false, chain, steps, diam })
}

/// Fewest-hop chain through `net` from `start` to `end` with hops shorter than `gap`.
fn shortest_chain<S: Scalar>(
    space: &MetricSpace<S>,
    net: &[VertexId],
    start: VertexId,
    end: VertexId,
    gap: S,
) -> Option<Vec<VertexId>> {
    let idx: Vec<usize> = net.iter().map(|&v| space.index(v).ok()).collect::<Option<_>>()?;
    let s = net.iter().position(|&v| v == start)?;
    let t = net.iter().position(|&v| v == end)?;
    let mut prev = vec![usize::MAX; net.len()];
    prev[s] = s;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        if u == t {
            break;
        }
        let row = space.distances_from_index(idx[u]);
        for w in 0..net.len() {
            if prev[w] == usize::MAX && row[idx[w]] < gap {
                prev[w] = u;
                queue.push_back(w);
            }
        }
    }
    if prev[t] == usize::MAX {
        return None;
    }
    let mut chain = vec![net[t]];
    let mut cur = t;
    while cur != s {
        cur = prev[cur];
        chain.push(net[cur]);
    }
    chain.reverse();
    Some(chain)
}

/// Distortion of a curve with respect to its own arc length.
pub fn curve_distortion<S: Scalar>(space: &MetricSpace<S>, c: &Curve<S>) -> Result<BiLipschitzReport<S>, MetricError> {
    space.bilip_report(c, c.length(), 250_000)
}
