//! Helpers shared by the integration tests: brute-force oracles and corpora.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bilip::extension::ExtensionConfig;
use bilip::space_gallery::{grid_id, plane_pair_space, PlanePair};
use bilip::{Path, Space, VertexId, WhitneyDecomposition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tree on `0..n` from a Prüfer sequence of length `n - 2`.
pub fn prufer_tree(n: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Every labeled tree on `n >= 2` vertices.
pub fn all_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let seq: Vec<usize> = (0..len)
                .map(|_| {
                    let d = code % n;
                    code /= n;
                    d
                })
                .collect();
            prufer_tree(n, &seq)
        })
        .collect()
}

/// Rooted encoding at `s` with `t` marked; equal for trees isomorphic by a
/// map fixing both endpoints.
pub fn canonical(edges: &[(usize, usize)], s: usize, t: usize) -> String {
    let n = edges.len() + 1;
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    fn enc(u: usize, from: usize, t: usize, adj: &[Vec<usize>]) -> String {
        let mut kids: Vec<String> = adj[u].iter().filter(|&&w| w != from).map(|&w| enc(w, u, t, adj)).collect();
        kids.sort();
        format!("({}{})", if u == t { "*" } else { "" }, kids.concat())
    }
    enc(s, usize::MAX, t, &adj)
}

/// Count and minimum length of all walks from `s` that end at `t` after
/// visiting every vertex, using each edge at most twice.
pub fn brute_force_tours(edges: &[(usize, usize)], s: usize, t: usize) -> (usize, Option<usize>) {
    let n = edges.len() + 1;
    let mut adj = vec![Vec::new(); n];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    struct State<'a> {
        adj: &'a [Vec<(usize, usize)>],
        used: Vec<u8>,
        visits: Vec<usize>,
        seen: usize,
        t: usize,
        count: usize,
        best: Option<usize>,
    }
    fn walk(st: &mut State, u: usize, len: usize) {
        if u == st.t && st.seen == st.visits.len() {
            st.count += 1;
            st.best = Some(st.best.map_or(len, |b| b.min(len)));
        }
        for i in 0..st.adj[u].len() {
            let (w, e) = st.adj[u][i];
            if st.used[e] < 2 {
                st.used[e] += 1;
                st.visits[w] += 1;
                if st.visits[w] == 1 {
                    st.seen += 1;
                }
                walk(st, w, len + 1);
                if st.visits[w] == 1 {
                    st.seen -= 1;
                }
                st.visits[w] -= 1;
                st.used[e] -= 1;
            }
        }
    }
    let mut st = State { adj: &adj, used: vec![0; edges.len()], visits: vec![0; n], seen: 1, t, count: 0, best: None };
    st.visits[s] = 1;
    walk(&mut st, s, 0);
    (st.count, st.best)
}

/// Edge multiplicities of a walk, recomputed without the library.
pub fn walk_multiplicities(tour: &[usize]) -> BTreeMap<(usize, usize), usize> {
    let mut m = BTreeMap::new();
    for w in tour.windows(2) {
        *m.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0) += 1;
    }
    m
}

/// Random finite subsets of `[0, 100]` with 2 to 50 points.
pub fn random_sets(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(2..=50);
            let mut a: Vec<f64> = (0..k).map(|_| (rng.gen_range(0.0..100.0f64) * 1e4).round() / 1e4).collect();
            a.sort_by(f64::total_cmp);
            a.dedup();
            a
        })
        .filter(|a| a.len() >= 2)
        .collect()
}

/// Direct check of the decomposition: size against distance to `A`, size
/// ratio of neighbors, disjoint interiors, and coverage up to terminal gaps
/// that touch `A` and stay within `4 r_min` of it.
pub fn whitney_oracle(dec: &WhitneyDecomposition<f64>, a: &[f64], r_min: f64) -> Result<(), String> {
    let dist_to_a = |lo: f64, hi: f64| {
        a.iter()
            .map(|&x| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    };
    let mut qs: Vec<(f64, f64)> = dec.intervals.iter().map(|q| (q.lo, q.hi)).collect();
    qs.sort_by(|x, y| x.0.total_cmp(&y.0));
    for &(lo, hi) in &qs {
        let (diam, dist) = (hi - lo, dist_to_a(lo, hi));
        if !(diam <= dist && dist <= 4.0 * diam) {
            return Err(format!("[{lo}, {hi}]: diam {diam}, dist {dist}"));
        }
    }
    for w in qs.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(format!("overlap at {}", w[1].0));
        }
        if w[1].0 == w[0].1 {
            let (d0, d1) = (w[0].1 - w[0].0, w[1].1 - w[1].0);
            if d0 > 4.0 * d1 || d1 > 4.0 * d0 {
                return Err(format!("neighbors at {} have sizes {d0} and {d1}", w[0].1));
            }
        }
    }
    // walk [min A, max A] and account for every piece
    let mut pieces: Vec<(f64, f64, bool)> = qs.iter().map(|&(lo, hi)| (lo, hi, false)).collect();
    pieces.extend(dec.gaps.iter().map(|g| (g.lo, g.hi, true)));
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut at = a[0];
    for &(lo, hi, gap) in &pieces {
        if lo > at && !a.contains(&at) {
            return Err(format!("uncovered [{at}, {lo}]"));
        }
        if gap {
            let touches = a.contains(&lo) || a.contains(&hi);
            let far = [lo, hi, 0.5 * (lo + hi)].iter().map(|&z| dist_to_a(z, z)).fold(0.0, f64::max);
            if !touches || far >= 4.0 * r_min {
                return Err(format!("gap [{lo}, {hi}] is not terminal"));
            }
        }
        at = at.max(hi);
    }
    if at < *a.last().unwrap() {
        return Err(format!("uncovered tail from {at}"));
    }
    Ok(())
}

pub fn grid_curve(space: &Space, pts: &[VertexId]) -> Path {
    Path::from_vertices(space, pts).unwrap()
}

/// Seeded wiggly walks on the `side^3` grid: runs in a random direction
/// interrupted by sideways steps, never stepping straight back.
pub fn wiggly_curves(side: usize, count: usize, seed: u64) -> Vec<Vec<VertexId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: [(usize, i64); 6] = [(0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut c = [rng.gen_range(0..side) as i64, rng.gen_range(0..side) as i64, rng.gen_range(0..side) as i64];
        let steps = rng.gen_range(20..70);
        let mut pts = vec![grid_id(&[c[0] as usize, c[1] as usize, c[2] as usize], side)];
        let mut last: Option<usize> = None;
        let mut heading = rng.gen_range(0..6);
        for _ in 0..steps {
            if rng.gen_bool(0.35) {
                heading = rng.gen_range(0..6);
            }
            let (axis, sign) = dirs[heading];
            let next = c[axis] + sign;
            let back = last.is_some_and(|l| dirs[l].0 == axis && dirs[l].1 == -sign);
            if next < 0 || next >= side as i64 || back {
                heading = rng.gen_range(0..6);
                continue;
            }
            c[axis] = next;
            last = Some(heading);
            pts.push(grid_id(&[c[0] as usize, c[1] as usize, c[2] as usize], side));
        }
        if pts.len() > 8 && pts.first() != pts.last() {
            out.push(pts);
        }
    }
    out
}

/// Monotone staircase through the 9^3 grid from the origin, cycling axes.
pub fn staircase(len: usize) -> Vec<VertexId> {
    let mut c = [0usize; 3];
    let mut pts = vec![grid_id(&c, 9)];
    for k in 0..len {
        c[k % 3] += 1;
        pts.push(grid_id(&c, 9));
    }
    pts
}

pub struct CorpusProblem {
    pub name: String,
    pub pairs: Vec<(f64, VertexId)>,
    pub config: ExtensionConfig,
}

/// Twenty extension problems on the 9^3 grid with `p = 1.5`.
pub fn extension_corpus() -> Vec<CorpusProblem> {
    let v = |x: usize, y: usize, z: usize| grid_id(&[x, y, z], 9);
    let base = ExtensionConfig { p: 1.5, ..ExtensionConfig::default() };
    let mut out = Vec::new();
    let mut add = |name: &str, pairs: Vec<(f64, VertexId)>, config: ExtensionConfig| {
        out.push(CorpusProblem { name: name.to_string(), pairs, config });
    };
    for (name, a) in [
        ("row 0-8", vec![0, 8]),
        ("row 0-4-8", vec![0, 4, 8]),
        ("row 0-2-5-8", vec![0, 2, 5, 8]),
        ("row 1-7", vec![1, 7]),
    ] {
        add(name, a.iter().map(|&t| (t as f64, v(t, 4, 4))).collect(), base.clone());
    }
    add("row 0-3-8 low", [0, 3, 8].iter().map(|&t| (t as f64, v(t, 2, 6))).collect(), base.clone());

    add("L 4+4", vec![(0.0, v(0, 0, 4)), (4.0, v(4, 0, 4)), (8.0, v(4, 4, 4))], base.clone());
    add("L 6+6", vec![(0.0, v(0, 2, 2)), (6.0, v(6, 2, 2)), (12.0, v(6, 8, 2))], base.clone());
    add("L 8+8", vec![(0.0, v(0, 0, 4)), (8.0, v(8, 0, 4)), (16.0, v(8, 8, 4))], base.clone());
    add("L 4+4 vertical", vec![(0.0, v(2, 6, 0)), (4.0, v(2, 6, 4)), (8.0, v(6, 6, 4))], base.clone());

    for (name, a) in [
        ("geometric 0-1-2-4-8", vec![0, 1, 2, 4, 8]),
        ("geometric 0-4-6-7-8", vec![0, 4, 6, 7, 8]),
        ("geometric 0-1-3-7", vec![0, 1, 3, 7]),
    ] {
        add(name, a.iter().map(|&t| (t as f64, v(t, 4, 4))).collect(), base.clone());
    }
    let stairs = staircase(24);
    for (name, a) in [
        ("geometric stairs 3", vec![0usize, 8, 24]),
        ("geometric stairs 6", vec![0, 1, 2, 4, 8, 16]),
        ("geometric stairs 7", vec![0, 1, 2, 4, 8, 16, 24]),
        ("geometric stairs 8", vec![0, 1, 2, 3, 6, 12, 18, 24]),
    ] {
        add(name, a.iter().map(|&t| (t as f64, stairs[t])).collect(), base.clone());
    }

    // diagonal targets with a large glue constant force the local modifications
    let glue = |eps: f64| ExtensionConfig { xi: Some(0.3), eps_glue: Some(eps), ..base.clone() };
    add("glue diagonal", vec![(0.0, v(0, 0, 0)), (24.0, v(8, 8, 8))], glue(0.2));
    add("glue L", vec![(0.0, v(0, 0, 4)), (8.0, v(8, 0, 4)), (16.0, v(8, 8, 4))], glue(0.25));
    add("glue planar diagonal", vec![(0.0, v(0, 0, 0)), (16.0, v(8, 8, 0))], glue(0.2));
    add("glue tilted", vec![(0.0, v(0, 4, 0)), (16.0, v(8, 4, 8))], glue(0.25));
    out
}

/// Two planes through a shared line with a hole around its middle; `f` maps
/// the surviving line isometrically and sends `-R/2` and `R/2` into
/// different sheets off the line, so any extension must cross `f(A)`.
pub fn plane_pair_control() -> (PlanePair, Vec<(f64, VertexId)>) {
    let hole = 2.0;
    let pp = plane_pair_space(2, 9, 1.0, hole).unwrap();
    let mid = pp.center_position as f64;
    let mut pairs: Vec<(f64, VertexId)> =
        pp.line.iter().zip(&pp.line_positions).map(|(&v, &x)| (x as f64 - mid, v)).collect();
    let c = pp.center_position;
    pairs.push((-hole / 2.0, pp.vertex(0, &[c, c + 2]).unwrap()));
    pairs.push((hole / 2.0, pp.vertex(1, &[c, c + 2]).unwrap()));
    (pp, pairs)
}
