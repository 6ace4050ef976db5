//! Dyadic Whitney decomposition of `I \ A` for finite `A`, with endpoint
//! frames (anchors, neighboring intervals, middle thirds) and the two greedy
//! filtrations used to order the extension stages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum WhitneyError {
    #[error("need at least two distinct points, got {0}")]
    DegenerateA(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Interval<S> {
    pub fn new(lo: S, hi: S) -> Self {
        Self { lo, hi }
    }

    pub fn diam(&self) -> S {
        self.hi - self.lo
    }

    pub fn middle_third(&self) -> Interval<S> {
        let third = self.diam() / S::lit(3.0);
        Interval { lo: self.lo + third, hi: self.hi - third }
    }

    pub fn contains(&self, x: S) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Gap between two intervals (zero when they touch or overlap).
    pub fn dist(&self, other: &Interval<S>) -> S {
        (other.lo - self.hi).max(self.lo - other.hi).max(S::zero())
    }

    /// Distance to a sorted point set.
    pub fn dist_to_points(&self, sorted: &[S]) -> S {
        let k = sorted.partition_point(|&a| a < self.lo);
        let mut best = S::infinity();
        if k < sorted.len() {
            best = best.min((sorted[k] - self.hi).max(S::zero()));
        }
        if k > 0 {
            best = best.min(self.lo - sorted[k - 1]);
        }
        best
    }
}

/// Per-endpoint data: nearest point of `A` and the intervals meeting at `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointFrame<S> {
    pub x: S,
    pub anchor: S,
    /// Interval whose right end is `x`.
    pub left: Option<usize>,
    /// Interval whose left end is `x`.
    pub right: Option<usize>,
}

impl<S: Scalar> EndpointFrame<S> {
    pub fn anchor_distance(&self) -> S {
        (self.x - self.anchor).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyDecomposition<S> {
    pub a: Vec<S>,
    pub span: (S, S),
    pub r_min: S,
    pub intervals: Vec<Interval<S>>,
    pub endpoints: Vec<EndpointFrame<S>>,
    /// Uncovered pieces of `I \ A` left by truncation.
    pub gaps: Vec<Interval<S>>,
}

/// `(tau1, tau2, tau3, tau4)`: middle third of the left interval and of the right one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauTuple<S> {
    pub tau: [Option<S>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhitneyViolation(pub String);

pub fn whitney_decompose<S: Scalar>(a: &[S], r_min: S) -> Result<WhitneyDecomposition<S>, WhitneyError> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(WhitneyError::InvalidInput("non-finite point".into()));
    }
    if !(r_min > S::zero()) {
        return Err(WhitneyError::InvalidInput("r_min must be positive".into()));
    }
    let mut pts = a.to_vec();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    if pts.len() < 2 {
        return Err(WhitneyError::DegenerateA(pts.len()));
    }
    let lo = pts[0];
    let hi = *pts.last().unwrap();
    let two = S::lit(2.0);
    let width = hi - lo;
    let mut scale = two.powi(width.log2().ceil().to_i32().unwrap_or(0));
    while scale < width {
        scale *= two;
    }
    let first = (lo / scale).floor().to_i64().unwrap_or(0);
    let last = (hi / scale).ceil().to_i64().unwrap_or(0);
    let mut stack: Vec<Interval<S>> = (first..last)
        .rev()
        .map(|k| {
            let kk = S::from_i64(k).unwrap();
            Interval::new(kk * scale, (kk + S::one()) * scale)
        })
        .collect();
    let mut intervals = Vec::new();
    while let Some(d) = stack.pop() {
        if d.hi <= lo || d.lo >= hi {
            continue;
        }
        let inside = d.lo >= lo && d.hi <= hi;
        if inside && d.diam() <= d.dist_to_points(&pts) {
            intervals.push(d);
            continue;
        }
        let half = d.diam() / two;
        if half < r_min {
            continue;
        }
        let mid = d.lo + half;
        stack.push(Interval::new(mid, d.hi));
        stack.push(Interval::new(d.lo, mid));
    }
    intervals.sort_by(|x, y| x.lo.partial_cmp(&y.lo).unwrap());

    let mut xs: Vec<S> = intervals.iter().flat_map(|q| [q.lo, q.hi]).collect();
    xs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    xs.dedup();
    let endpoints = xs
        .iter()
        .map(|&x| {
            let k = pts.partition_point(|&p| p < x);
            let mut anchor = pts[k.min(pts.len() - 1)];
            if k > 0 && (x - pts[k - 1]) <= (anchor - x).abs() {
                anchor = pts[k - 1];
            }
            let left = intervals.iter().position(|q| q.hi == x);
            let right = intervals.iter().position(|q| q.lo == x);
            EndpointFrame { x, anchor, left, right }
        })
        .collect();

    let mut gaps = Vec::new();
    let mut cursor = lo;
    let push_gap = |from: S, to: S, gaps: &mut Vec<Interval<S>>| {
        // split at points of A so every piece is a single component piece
        let mut start = from;
        for &p in pts.iter().filter(|&&p| p > from && p < to) {
            gaps.push(Interval::new(start, p));
            start = p;
        }
        if to > start {
            gaps.push(Interval::new(start, to));
        }
    };
    for q in &intervals {
        if q.lo > cursor {
            push_gap(cursor, q.lo, &mut gaps);
        }
        cursor = cursor.max(q.hi);
    }
    if hi > cursor {
        push_gap(cursor, hi, &mut gaps);
    }

    Ok(WhitneyDecomposition { a: pts, span: (lo, hi), r_min, intervals, endpoints, gaps })
}

impl<S: Scalar> WhitneyDecomposition<S> {
    pub fn middle_thirds(&self) -> Vec<Interval<S>> {
        self.intervals.iter().map(Interval::middle_third).collect()
    }

    pub fn tau(&self, endpoint: usize) -> TauTuple<S> {
        let e = &self.endpoints[endpoint];
        let l = e.left.map(|i| self.intervals[i].middle_third());
        let r = e.right.map(|i| self.intervals[i].middle_third());
        TauTuple { tau: [l.map(|m| m.lo), l.map(|m| m.hi), r.map(|m| m.lo), r.map(|m| m.hi)] }
    }

    pub fn endpoint_index(&self, x: S) -> Option<usize> {
        self.endpoints.iter().position(|e| e.x == x)
    }

    /// Components `(a_k, a_{k+1})` of `I \ A`.
    pub fn components(&self) -> Vec<(S, S)> {
        self.a.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Distance from each uncovered point to `A` is below this bound.
    pub fn gap_reach(&self) -> S {
        S::lit(4.0) * self.r_min
    }

    /// Checks every structural property exactly.
    pub fn verify(&self) -> Result<(), WhitneyViolation> {
        let four = S::lit(4.0);
        for (i, q) in self.intervals.iter().enumerate() {
            if !(q.lo >= self.span.0 && q.hi <= self.span.1 && q.lo < q.hi) {
                return Err(WhitneyViolation(format!("interval {i} not inside I")));
            }
            if q.diam() < self.r_min {
                return Err(WhitneyViolation(format!("interval {i} below r_min")));
            }
            let d = q.dist_to_points(&self.a);
            if !(q.diam() <= d && d <= four * q.diam()) {
                return Err(WhitneyViolation(format!(
                    "interval [{}, {}]: diam {} dist {} breaks diam <= dist <= 4 diam",
                    q.lo,
                    q.hi,
                    q.diam(),
                    d
                )));
            }
        }
        for (i, w) in self.intervals.windows(2).enumerate() {
            if w[1].lo < w[0].hi {
                return Err(WhitneyViolation(format!("intervals {i} and {} overlap", i + 1)));
            }
            if w[1].lo == w[0].hi {
                let (a, b) = (w[0].diam(), w[1].diam());
                if a > four * b || b > four * a {
                    return Err(WhitneyViolation(format!("neighbors {i},{} ratio exceeds 4", i + 1)));
                }
            }
        }
        let reach = self.gap_reach();
        for g in &self.gaps {
            let touches = self.a.iter().any(|&p| p == g.lo || p == g.hi);
            if !touches {
                return Err(WhitneyViolation(format!("gap [{}, {}] is not adjacent to A", g.lo, g.hi)));
            }
            // the farthest gap point from A is its midpoint or an end not in A
            let far = [g.lo, g.hi, (g.lo + g.hi) / S::lit(2.0)]
                .iter()
                .map(|&z| Interval::new(z, z).dist_to_points(&self.a))
                .fold(S::zero(), S::max);
            if far >= reach {
                return Err(WhitneyViolation(format!("gap [{}, {}] reaches {} from A", g.lo, g.hi, far)));
            }
        }
        let covered: S = self.intervals.iter().map(Interval::diam).fold(S::zero(), |s, d| s + d)
            + self.gaps.iter().map(Interval::diam).fold(S::zero(), |s, d| s + d);
        let total = self.span.1 - self.span.0;
        if (covered - total).abs() > total * S::epsilon() * S::lit(64.0) {
            return Err(WhitneyViolation(format!("intervals and gaps cover {covered} of {total}")));
        }
        for e in &self.endpoints {
            let d = Interval::new(e.x, e.x).dist_to_points(&self.a);
            if e.anchor_distance() != d {
                return Err(WhitneyViolation(format!("anchor of {} is not a nearest point", e.x)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationKind {
    Endpoint,
    Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    pub kind: FiltrationKind,
    /// Class index (from 0) per endpoint or per interval.
    pub colors: Vec<usize>,
    pub class_count: usize,
    /// Counting bound the class count must respect.
    pub packing_bound: f64,
    /// `(near, band)` factors of the conflict relation.
    pub factors: (f64, f64),
}

impl Filtration {
    pub fn class_members(&self, class: usize) -> Vec<usize> {
        (0..self.colors.len()).filter(|&i| self.colors[i] == class).collect()
    }
}

fn check_constants(values: &[(&str, f64)]) -> Result<(), WhitneyError> {
    for &(name, v) in values {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(WhitneyError::InvalidInput(format!("{name} must be >= 1")));
        }
    }
    Ok(())
}

/// First-fit coloring over `items` sorted by `key`; `near(i, j)` must imply
/// `|key_i - key_j| <= reach(i)`.
fn first_fit<S: Scalar>(
    keys: &[S],
    reach: impl Fn(usize) -> S,
    conflict: impl Fn(usize, usize) -> bool,
) -> (Vec<usize>, usize) {
    let n = keys.len();
    let mut colors = vec![usize::MAX; n];
    let mut used = Vec::new();
    let mut count = 0;
    for i in 0..n {
        used.clear();
        let r = reach(i);
        let from = keys.partition_point(|&k| k < keys[i] - r);
        for j in from..i {
            if conflict(i, j) {
                used.push(colors[j]);
            }
        }
        used.sort_unstable();
        used.dedup();
        let mut c = 0;
        for &u in &used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        colors[i] = c;
        count = count.max(c + 1);
    }
    (colors, count)
}

/// Pairs of endpoints that may not share a class.
pub fn endpoints_conflict<S: Scalar>(x: &EndpointFrame<S>, y: &EndpointFrame<S>, l: f64, p0: f64) -> bool {
    let (dx, dy) = (x.anchor_distance().to_f64_lossy(), y.anchor_distance().to_f64_lossy());
    let sep = (x.x - y.x).abs().to_f64_lossy();
    let band = 8.0 * p0;
    sep <= 12.0 * l * dx.max(dy) && dy >= dx / band && dy <= band * dx
}

pub fn filter_endpoints<S: Scalar>(
    dec: &WhitneyDecomposition<S>,
    l: f64,
    p0: f64,
) -> Result<Filtration, WhitneyError> {
    check_constants(&[("L", l), ("p0", p0)])?;
    let e = &dec.endpoints;
    let keys: Vec<S> = e.iter().map(|f| f.x).collect();
    let reach = |i: usize| S::lit(12.0 * l * 8.0 * p0) * e[i].anchor_distance();
    let (colors, class_count) = first_fit(&keys, reach, |i, j| endpoints_conflict(&e[i], &e[j], l, p0));
    Ok(Filtration {
        kind: FiltrationKind::Endpoint,
        colors,
        class_count,
        packing_bound: 192.0 * l * (8.0 * p0).powi(2),
        factors: (12.0 * l, 8.0 * p0),
    })
}

pub fn intervals_conflict<S: Scalar>(qi: &Interval<S>, qj: &Interval<S>, near: f64, band: f64) -> bool {
    let (di, dj) = (qi.diam().to_f64_lossy(), qj.diam().to_f64_lossy());
    let (big, small) = (di.max(dj), di.min(dj));
    qi.dist(qj).to_f64_lossy() <= near * big && big <= band * small
}

pub fn ds_filtration<S: Scalar>(
    dec: &WhitneyDecomposition<S>,
    l: f64,
    lambda: f64,
    delta0: f64,
) -> Result<Filtration, WhitneyError> {
    check_constants(&[("L", l), ("lambda", lambda)])?;
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(WhitneyError::InvalidInput("delta0 must lie in (0,1)".into()));
    }
    let near = 800.0 * l * l * lambda;
    let band = 800.0 * lambda * l / delta0;
    let q = &dec.intervals;
    let keys: Vec<S> = q.iter().map(|i| i.lo).collect();
    let reach = |i: usize| S::lit((near + 1.0) * band + 1.0) * q[i].diam();
    let (colors, class_count) = first_fit(&keys, reach, |i, j| intervals_conflict(&q[i], &q[j], near, band));
    Ok(Filtration {
        kind: FiltrationKind::Interval,
        colors,
        class_count,
        packing_bound: band * (2.0 * near * band + 2.0 * band + 1.0) + 2.0,
        factors: (near, band),
    })
}

/// Exhaustive same-class check plus the class-count bound.
pub fn verify_filtration<S: Scalar>(dec: &WhitneyDecomposition<S>, f: &Filtration) -> Result<(), WhitneyViolation> {
    if (f.class_count as f64) > f.packing_bound {
        return Err(WhitneyViolation(format!(
            "{} classes exceed the packing bound {}",
            f.class_count, f.packing_bound
        )));
    }
    let (near, band) = f.factors;
    for class in 0..f.class_count {
        let members = f.class_members(class);
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                let clash = match f.kind {
                    FiltrationKind::Endpoint => {
                        let (x, y) = (&dec.endpoints[i], &dec.endpoints[j]);
                        let (dx, dy) = (x.anchor_distance().to_f64_lossy(), y.anchor_distance().to_f64_lossy());
                        let sep = (x.x - y.x).abs().to_f64_lossy();
                        !(sep > near * dx.max(dy) || dx.max(dy) > band * dx.min(dy))
                    }
                    FiltrationKind::Interval => {
                        let (qi, qj) = (&dec.intervals[i], &dec.intervals[j]);
                        let (di, dj) = (qi.diam().to_f64_lossy(), qj.diam().to_f64_lossy());
                        !(qi.dist(qj).to_f64_lossy() > near * di.max(dj) || di.max(dj) > band * di.min(dj))
                    }
                };
                if clash {
                    return Err(WhitneyViolation(format!("class {class} holds conflicting {i} and {j}")));
                }
            }
        }
    }
    Ok(())
}
