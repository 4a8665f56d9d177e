//! Best-effort subgraph matching driven by RWR proximity.
//!
//! A match is grown from a seed vertex. Every further query vertex is bound
//! to the data vertex with the highest proximity from the data vertices
//! already bound to its query neighbors, and every query edge is realized by
//! the most proximate path of at most `max_hops` data edges between its
//! endpoints. When every such path is a single edge the match is exact.
//!
//! Goodness functions:
//!
//! * seed: `g(v) = sum of r_{v,u}` over `u` within the query radius of `v`
//!   whose label appears in the pattern;
//! * expansion: `g(u) = prod_a r_{a,u}` over the data vertices `a` bound to
//!   already-matched query neighbors (one anchor gives `r_{anchor,u}`);
//! * path: product of per-hop proximities `r_{a,b}`, searched as a
//!   hop-bounded shortest path on `-ln r_{a,b}`;
//! * result: number of query edges realized by a direct edge plus the
//!   geometric mean of path proximities, so exact results rank first.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{Label, TemporalGraph, VertexId};
use crate::pattern::{PatternError, QueryPattern};
use crate::proximity::{ProximityError, ProximityStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub max_hops: usize,
    /// Results requested from a batch match.
    pub k: usize,
    /// Keep results with unbridgeable query edges (empty path) instead of
    /// dropping them.
    pub allow_partial: bool,
    /// Search nodes spent per seed looking for an exact completion before
    /// falling back to greedy expansion. Zero disables the search.
    pub exact_budget: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { max_hops: 3, k: 10, allow_partial: false, exact_budget: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("no data vertex can seed the pattern")]
    NoSeed,
    #[error("no candidate for query vertex {0}")]
    NoCandidate(usize),
    #[error("no path of at most {max_hops} hops from {src} to {dst}")]
    NoBridge { src: VertexId, dst: VertexId, max_hops: usize },
    #[error("vertex {0} cannot seed this pattern")]
    IncompatibleSeed(VertexId),
    #[error("bridge endpoints must differ")]
    SameEndpoints,
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// One best-effort embedding of a pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `mapping[q]` is the data vertex bound to query vertex `q`.
    pub mapping: Vec<VertexId>,
    /// `bridges[i]` realizes `pattern.edges[i]` as a vertex path from
    /// `mapping[a]` to `mapping[b]`. Empty when the edge could not be bridged
    /// (partial results only).
    pub bridges: Vec<Vec<VertexId>>,
    pub goodness: f64,
    pub exact: bool,
    pub seed: VertexId,
}

/// Identity of a match up to pattern automorphisms: its vertex set and the
/// set of data pairs its query edges land on.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchKey {
    pub vertices: Vec<VertexId>,
    pub pairs: Vec<(VertexId, VertexId)>,
}

impl MatchKey {
    pub fn of(pattern: &QueryPattern, mapping: &[VertexId]) -> Self {
        let mut vertices = mapping.to_vec();
        vertices.sort_unstable();
        let mut pairs: Vec<(VertexId, VertexId)> = pattern
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (mapping[a], mapping[b]);
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect();
        pairs.sort_unstable();
        MatchKey { vertices, pairs }
    }
}

impl MatchResult {
    pub fn key(&self, pattern: &QueryPattern) -> MatchKey {
        MatchKey::of(pattern, &self.mapping)
    }

    /// Fraction of query edges realized by a direct data edge.
    pub fn similarity(&self) -> f64 {
        if self.bridges.is_empty() {
            return 0.0;
        }
        self.direct_edges() as f64 / self.bridges.len() as f64
    }

    pub fn direct_edges(&self) -> usize {
        self.bridges.iter().filter(|p| p.len() == 2).count()
    }

    /// Every data edge used by a bridge path, as consecutive vertex pairs.
    pub fn path_edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.bridges.iter().flat_map(|p| p.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn path_vertices(&self) -> BTreeSet<VertexId> {
        self.bridges.iter().flatten().copied().collect()
    }

    pub fn is_partial(&self) -> bool {
        self.bridges.iter().any(Vec::is_empty)
    }
}

/// Checks a result against the graph: injective mapping, matching labels,
/// bridges that exist edge by edge within `max_hops`, and a correct `exact`
/// flag.
pub fn check_result(
    graph: &TemporalGraph,
    pattern: &QueryPattern,
    result: &MatchResult,
    max_hops: usize,
) -> Result<(), &'static str> {
    if result.mapping.len() != pattern.vertex_count() || result.bridges.len() != pattern.edge_count() {
        return Err("shape does not fit the pattern");
    }
    let distinct: BTreeSet<_> = result.mapping.iter().collect();
    if distinct.len() != result.mapping.len() {
        return Err("mapping is not injective");
    }
    for (q, &v) in result.mapping.iter().enumerate() {
        if graph.label(v) != Some(&pattern.labels[q]) {
            return Err("label mismatch");
        }
    }
    for (i, path) in result.bridges.iter().enumerate() {
        if path.is_empty() {
            continue;
        }
        let (a, b) = pattern.edges[i];
        if path[0] != result.mapping[a] || *path.last().unwrap() != result.mapping[b] {
            return Err("bridge does not connect its query edge endpoints");
        }
        if path.len() < 2 || path.len() - 1 > max_hops {
            return Err("bridge length out of range");
        }
        if path.windows(2).any(|w| !graph.has_edge(w[0], w[1])) {
            return Err("bridge uses a missing edge");
        }
    }
    let exact = result.bridges.iter().all(|p| p.len() == 2);
    if exact != result.exact {
        return Err("exact flag is wrong");
    }
    Ok(())
}

/// Query vertex used as the seed: highest degree, lowest id on ties.
pub fn seed_query_vertex(pattern: &QueryPattern) -> usize {
    (0..pattern.vertex_count()).max_by(|&a, &b| pattern.degree(a).cmp(&pattern.degree(b)).then(b.cmp(&a))).unwrap_or(0)
}

/// Query vertex a data vertex with `label` seeds, if any.
pub fn seed_slot_for(pattern: &QueryPattern, label: &Label) -> Option<usize> {
    let preferred = seed_query_vertex(pattern);
    if &pattern.labels[preferred] == label {
        return Some(preferred);
    }
    pattern.vertices_with_label(label).next()
}

fn ball(graph: &TemporalGraph, center: VertexId, radius: usize) -> Vec<VertexId> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    dist.insert(center, 0usize);
    queue.push_back(center);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        for &u in graph.neighbors(v) {
            if let alloc::collections::btree_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist.into_keys().collect()
}

/// Seed goodness of `v` for matching `pattern` from query vertex `qseed`.
pub fn seed_goodness(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    qseed: usize,
    v: VertexId,
) -> Result<f64, MatchError> {
    let radius = pattern.eccentricity(qseed).max(1);
    let members = ball(graph, v, radius);
    let r = store.vector(graph, v)?;
    let mut g = 0.0;
    for u in &members {
        if graph.label(*u).is_some_and(|l| pattern.has_label(l)) {
            g += r.get(*u);
        }
    }
    store.add_work(members.len() as u64);
    Ok(g)
}

/// Candidates for `qseed` ordered best first: goodness descending, then
/// vertex id ascending.
pub fn rank_seeds(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    qseed: usize,
    excluded: &BTreeSet<VertexId>,
) -> Result<Vec<(VertexId, f64)>, MatchError> {
    let label = &pattern.labels[qseed];
    let candidates: Vec<VertexId> =
        graph.vertices().filter(|v| !excluded.contains(v) && graph.label(*v) == Some(label)).collect();
    store.prefetch(graph, &candidates)?;
    let mut ranked = Vec::with_capacity(candidates.len());
    for v in candidates {
        ranked.push((v, seed_goodness(graph, store, pattern, qseed, v)?));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// The best non-excluded seed for query vertex `qseed`.
pub fn seed_finder(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    qseed: usize,
    excluded: &BTreeSet<VertexId>,
) -> Result<(VertexId, f64), MatchError> {
    let label = &pattern.labels[qseed];
    let candidates: Vec<VertexId> =
        graph.vertices().filter(|v| !excluded.contains(v) && graph.label(*v) == Some(label)).collect();
    // A lone candidate wins whatever its score.
    if let [only] = candidates[..] {
        let g = seed_goodness(graph, store, pattern, qseed, only)?;
        return Ok((only, g));
    }
    rank_seeds(graph, store, pattern, qseed, excluded)?.into_iter().next().ok_or(MatchError::NoSeed)
}

/// Best unused vertex labeled `target_label` as seen from `anchor`.
pub fn neighbor_expander(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    anchor: VertexId,
    target_label: &Label,
    used: &BTreeSet<VertexId>,
) -> Result<(VertexId, f64), MatchError> {
    expand_from(graph, store, &[anchor], target_label, used).ok_or(MatchError::NoCandidate(0))?
}

/// Best unused vertex labeled `target_label` by the product of proximities
/// from every anchor. `None` when nothing qualifies.
pub fn expand_from(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    anchors: &[VertexId],
    target_label: &Label,
    used: &BTreeSet<VertexId>,
) -> Option<Result<(VertexId, f64), MatchError>> {
    let (&first, rest) = anchors.split_first()?;
    for &a in rest {
        if let Err(e) = store.vector(graph, a) {
            return Some(Err(e.into()));
        }
    }
    let candidates: Vec<(VertexId, f64)> = match store.vector(graph, first) {
        Ok(r) => {
            r.iter().filter(|(u, s)| *s > 0.0 && !used.contains(u) && graph.label(*u) == Some(target_label)).collect()
        }
        Err(e) => return Some(Err(e.into())),
    };
    store.add_work((candidates.len() * anchors.len()) as u64);
    let mut best: Option<(VertexId, f64)> = None;
    for (u, s) in candidates {
        let mut g = s;
        for &a in rest {
            g *= store.get(a).expect("solved above").get(u);
        }
        if g <= 0.0 {
            continue;
        }
        // candidates arrive in ascending id order, so strict > keeps the smaller id on ties
        if best.is_none_or(|(_, bg)| g > bg) {
            best = Some((u, g));
        }
    }
    best.map(Ok)
}

/// Most proximate path of at most `max_hops` edges from `src` to `dst`.
///
/// Path cost is `sum -ln r_{a,b}` over its hops. Ties go to fewer hops, then
/// to the lexicographically smaller vertex sequence.
pub fn bridge(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    src: VertexId,
    dst: VertexId,
    max_hops: usize,
) -> Result<Vec<VertexId>, MatchError> {
    Ok(bridge_scored(graph, store, src, dst, max_hops)?.0)
}

/// [`bridge`] plus the path's proximity product.
pub fn bridge_scored(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    src: VertexId,
    dst: VertexId,
    max_hops: usize,
) -> Result<(Vec<VertexId>, f64), MatchError> {
    if src == dst {
        return Err(MatchError::SameEndpoints);
    }
    for v in [src, dst] {
        if !graph.contains(v) {
            return Err(ProximityError::UnknownVertex(v).into());
        }
    }
    let no_bridge = MatchError::NoBridge { src, dst, max_hops };
    // hop distance to dst, walking edges backwards
    let mut to_dst: BTreeMap<VertexId, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    to_dst.insert(dst, 0);
    queue.push_back(dst);
    while let Some(v) = queue.pop_front() {
        let d = to_dst[&v];
        if d == max_hops {
            continue;
        }
        for &u in graph.predecessors(v) {
            if let alloc::collections::btree_map::Entry::Vacant(e) = to_dst.entry(u) {
                e.insert(d + 1);
                queue.push_back(u);
            }
        }
    }
    if to_dst.get(&src).is_none_or(|&d| d > max_hops) {
        return Err(no_bridge);
    }

    // best[v] over paths with exactly h hops; layers are kept for reconstruction
    let mut layers: Vec<BTreeMap<VertexId, (f64, Vec<VertexId>)>> = Vec::with_capacity(max_hops + 1);
    let mut start = BTreeMap::new();
    start.insert(src, (0.0, vec![src]));
    layers.push(start);
    let mut best: Option<(f64, Vec<VertexId>)> = None;
    // r_{a,b} <= 1 - c for b != a, so every further hop costs at least this
    let hop_floor = -libm::log(1.0 - store.params().restart_prob);
    for h in 1..=max_hops {
        let mut next: BTreeMap<VertexId, (f64, Vec<VertexId>)> = BTreeMap::new();
        let frontier: Vec<(VertexId, f64, Vec<VertexId>)> =
            layers[h - 1].iter().map(|(&v, (c, p))| (v, *c, p.clone())).collect();
        for (a, cost, path) in frontier {
            if a == dst {
                continue;
            }
            if let Some((bc, _)) = &best {
                if cost + hop_floor * to_dst[&a] as f64 > *bc {
                    continue;
                }
            }
            let r = store.vector(graph, a)?;
            let mut relaxed = 0u64;
            for &b in graph.neighbors(a) {
                let remaining = max_hops - h;
                if to_dst.get(&b).is_none_or(|&d| d > remaining) || path.contains(&b) {
                    continue;
                }
                let rab = r.get(b);
                if rab <= 0.0 {
                    continue;
                }
                relaxed += 1;
                let c = cost - libm::log(rab);
                let mut p = path.clone();
                p.push(b);
                let better = match next.get(&b) {
                    None => true,
                    Some((bc, bp)) => c < *bc || (c == *bc && p < *bp),
                };
                if better {
                    next.insert(b, (c, p));
                }
            }
            store.add_work(relaxed + 1);
        }
        if let Some((c, p)) = next.get(&dst) {
            let improves = match &best {
                None => true,
                Some((bc, _)) => *c < *bc,
            };
            if improves {
                best = Some((*c, p.clone()));
            }
        }
        layers.push(next);
    }
    let (cost, path) = best.ok_or(no_bridge)?;
    Ok((path, libm::exp(-cost)))
}

fn finish(mapping: Vec<VertexId>, bridges: Vec<Vec<VertexId>>, scores: &[f64], seed: VertexId) -> MatchResult {
    let exact = bridges.iter().all(|p| p.len() == 2);
    let direct = bridges.iter().filter(|p| p.len() == 2).count();
    let bridged: Vec<f64> = scores.iter().copied().filter(|s| *s > 0.0).collect();
    let gm = if bridged.is_empty() {
        0.0
    } else {
        libm::exp(bridged.iter().map(|s| libm::log(*s)).sum::<f64>() / bridged.len() as f64)
    };
    MatchResult { mapping, bridges, goodness: direct as f64 + gm, exact, seed }
}

/// Recomputes `exact` and `goodness` of `result` from fresh path scores.
pub fn rescore(graph: &TemporalGraph, store: &mut ProximityStore, result: &mut MatchResult) -> Result<(), MatchError> {
    let mut scores = Vec::with_capacity(result.bridges.len());
    for path in &result.bridges {
        let mut s = if path.is_empty() { 0.0 } else { 1.0 };
        for w in path.windows(2) {
            s *= store.score(graph, w[0], w[1])?;
        }
        scores.push(s);
    }
    let updated =
        finish(core::mem::take(&mut result.mapping), core::mem::take(&mut result.bridges), &scores, result.seed);
    *result = updated;
    Ok(())
}

/// Bridges query edge `i` of `pattern` under `mapping`.
pub fn bridge_query_edge(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    mapping: &[VertexId],
    i: usize,
    max_hops: usize,
) -> Result<(Vec<VertexId>, f64), MatchError> {
    let (a, b) = pattern.edges[i];
    bridge_scored(graph, store, mapping[a], mapping[b], max_hops)
}

struct ExactSearch<'a> {
    graph: &'a TemporalGraph,
    pattern: &'a QueryPattern,
    order: Vec<usize>,
    bound: Vec<Option<VertexId>>,
    budget: usize,
}

impl ExactSearch<'_> {
    /// Depth-first over `order`, candidates adjacent to every bound query
    /// neighbor, best proximity first.
    fn run(&mut self, store: &mut ProximityStore, depth: usize) -> Result<bool, MatchError> {
        if depth == self.order.len() {
            return Ok(true);
        }
        if self.budget == 0 {
            return Ok(false);
        }
        self.budget -= 1;
        let q = self.order[depth];
        let anchors: Vec<VertexId> = self.pattern.neighbors(q).into_iter().filter_map(|p| self.bound[p]).collect();
        let (&first, rest) = anchors.split_first().expect("BFS order binds a neighbor first");
        let label = &self.pattern.labels[q];
        let mut cands: Vec<(VertexId, f64)> = Vec::new();
        for &u in self.graph.neighbors(first) {
            if self.bound.contains(&Some(u))
                || self.graph.label(u) != Some(label)
                || !rest.iter().all(|&a| self.graph.has_edge(a, u))
                || !self.edges_back_ok(q, u)
            {
                continue;
            }
            let mut g = 1.0;
            for &a in &anchors {
                g *= store.score(self.graph, a, u)?;
            }
            cands.push((u, g));
        }
        store.add_work(cands.len() as u64 + 1);
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (u, _) in cands {
            self.bound[q] = Some(u);
            if self.run(store, depth + 1)? {
                return Ok(true);
            }
            self.bound[q] = None;
            if self.budget == 0 {
                break;
            }
        }
        Ok(false)
    }

    /// Directed view: bound query edges touching `q` must exist with the
    /// query's orientation.
    fn edges_back_ok(&self, q: usize, u: VertexId) -> bool {
        self.pattern.edges.iter().all(|&(a, b)| {
            if a == q {
                self.bound[b].is_none_or(|w| self.graph.has_edge(u, w))
            } else if b == q {
                self.bound[a].is_none_or(|w| self.graph.has_edge(w, u))
            } else {
                true
            }
        })
    }
}

fn exact_from_seed(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    qseed: usize,
    seed: VertexId,
    budget: usize,
) -> Result<Option<MatchResult>, MatchError> {
    let mut bound = vec![None; pattern.vertex_count()];
    bound[qseed] = Some(seed);
    let mut order = pattern.bfs_order(qseed);
    order.remove(0);
    let mut search = ExactSearch { graph, pattern, order, bound, budget };
    if !search.run(store, 0)? {
        return Ok(None);
    }
    let mapping: Vec<VertexId> = search.bound.into_iter().map(|v| v.expect("complete")).collect();
    let mut bridges = Vec::with_capacity(pattern.edge_count());
    let mut scores = Vec::with_capacity(pattern.edge_count());
    for &(a, b) in &pattern.edges {
        bridges.push(vec![mapping[a], mapping[b]]);
        scores.push(store.score(graph, mapping[a], mapping[b])?);
    }
    Ok(Some(finish(mapping, bridges, &scores, seed)))
}

/// Grows one match with `seed` bound to query vertex `qseed`.
///
/// An exact completion is searched first within `config.exact_budget`
/// nodes. Otherwise query edges are processed in BFS order from `qseed`,
/// binding each new query vertex by proximity and bridging each edge.
pub fn expand_seed(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    qseed: usize,
    seed: VertexId,
    config: &MatchConfig,
) -> Result<MatchResult, MatchError> {
    if graph.label(seed) != Some(&pattern.labels[qseed]) {
        return Err(MatchError::IncompatibleSeed(seed));
    }
    if config.exact_budget > 0 {
        if let Some(r) = exact_from_seed(graph, store, pattern, qseed, seed, config.exact_budget)? {
            return Ok(r);
        }
    }
    let n = pattern.vertex_count();
    let mut bound: Vec<Option<VertexId>> = vec![None; n];
    bound[qseed] = Some(seed);
    let mut used = BTreeSet::new();
    used.insert(seed);
    let mut bridges = vec![Vec::new(); pattern.edge_count()];
    let mut scores = vec![0.0; pattern.edge_count()];

    for i in pattern.edge_order(qseed) {
        let (a, b) = pattern.edges[i];
        for q in [a, b] {
            if bound[q].is_some() {
                continue;
            }
            let anchors: Vec<VertexId> = pattern.neighbors(q).into_iter().filter_map(|p| bound[p]).collect();
            let (u, _) =
                expand_from(graph, store, &anchors, &pattern.labels[q], &used).ok_or(MatchError::NoCandidate(q))??;
            bound[q] = Some(u);
            used.insert(u);
        }
        let (src, dst) = (bound[a].expect("bound"), bound[b].expect("bound"));
        match bridge_scored(graph, store, src, dst, config.max_hops) {
            Ok((path, s)) => {
                bridges[i] = path;
                scores[i] = s;
            }
            Err(MatchError::NoBridge { .. }) if config.allow_partial => {}
            Err(e) => return Err(e),
        }
    }
    let mapping = bound.into_iter().map(|v| v.expect("pattern is connected")).collect();
    Ok(finish(mapping, bridges, &scores, seed))
}

/// Orders results by goodness (descending), then seed id.
pub fn sort_results(results: &mut [MatchResult]) {
    results.sort_by(|a, b| b.goodness.total_cmp(&a.goodness).then(a.seed.cmp(&b.seed)));
}

/// Up to `config.k` distinct best-effort matches, best first.
///
/// Seeds are tried in seed-goodness order; each seed is used once, and a
/// result identical (up to automorphism) to an earlier one is skipped.
/// Once `k` results exist, the remaining seeds are only searched for exact
/// completions, which outrank every inexact result. Scanning stops when `k`
/// exact results are held.
pub fn gray_match(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    config: &MatchConfig,
) -> Result<Vec<MatchResult>, MatchError> {
    pattern.validate()?;
    let qseed = seed_query_vertex(pattern);
    let ranked = rank_seeds(graph, store, pattern, qseed, &BTreeSet::new())?;
    let mut seen = BTreeSet::new();
    let mut results = Vec::new();
    let mut exact = 0;
    for (seed, _) in ranked {
        if exact >= config.k {
            break;
        }
        let found = if results.len() < config.k {
            match expand_seed(graph, store, pattern, qseed, seed, config) {
                Ok(r) => Some(r),
                Err(MatchError::NoCandidate(_) | MatchError::NoBridge { .. }) => None,
                Err(e) => return Err(e),
            }
        } else if config.exact_budget > 0 {
            exact_from_seed(graph, store, pattern, qseed, seed, config.exact_budget)?
        } else {
            None
        };
        if let Some(r) = found {
            if seen.insert(r.key(pattern)) {
                exact += usize::from(r.exact);
                results.push(r);
            }
        }
    }
    sort_results(&mut results);
    results.truncate(config.k);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{make_pattern, PatternKind};
    use crate::proximity::{rwr_batch, RwrParams};

    fn store() -> ProximityStore {
        ProximityStore::new(RwrParams::default()).unwrap()
    }

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    #[test]
    fn unique_label_candidate_wins() {
        let mut g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0), (2, 3)]);
        g.insert_vertex(v(9), Some(Label::new("X")));
        let p = QueryPattern::new("x", vec![Label::new("X"), Label::new("V")], vec![(0, 1)]).unwrap();
        let (s, _) = seed_finder(&g, &mut store(), &p, 0, &BTreeSet::new()).unwrap();
        assert_eq!(s, v(9));
    }

    #[test]
    fn star_hub_is_seed() {
        let g = TemporalGraph::from_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let p = make_pattern(PatternKind::Star5);
        let mut st = store();
        let (s, g_hub) = seed_finder(&g, &mut st, &p, 0, &BTreeSet::new()).unwrap();
        assert_eq!(s, v(0));
        for leaf in 1..5 {
            assert!(seed_goodness(&g, &mut st, &p, 0, v(leaf)).unwrap() < g_hub);
        }
    }

    #[test]
    fn all_excluded_is_no_seed() {
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2)]);
        let p = make_pattern(PatternKind::Triangle);
        let excluded: BTreeSet<_> = g.vertices().collect();
        assert_eq!(seed_finder(&g, &mut store(), &p, 0, &excluded), Err(MatchError::NoSeed));
    }

    #[test]
    fn expander_single_and_tie() {
        let g = TemporalGraph::from_edges(&[(0, 1)]);
        let (u, _) = neighbor_expander(&g, &mut store(), v(0), &Label::new("V"), &[v(0)].into()).unwrap();
        assert_eq!(u, v(1));
        let g = TemporalGraph::from_edges(&[(0, 5), (0, 3)]);
        let (u, _) = neighbor_expander(&g, &mut store(), v(0), &Label::new("V"), &[v(0)].into()).unwrap();
        assert_eq!(u, v(3));
        let lone = TemporalGraph::from_edges(&[(0, 1)]);
        assert!(neighbor_expander(&lone, &mut store(), v(0), &Label::new("V"), &[v(0), v(1)].into()).is_err());
    }

    #[test]
    fn expander_prefers_nearer_match() {
        // path 0-1-2-3 with label X on 1 and 3: the nearer X wins
        let mut g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 3)]);
        let out = g
            .apply_batch(&crate::graph::UpdateBatch::new(
                1,
                vec![crate::graph::UpdateEvent::relabel(1, "X"), crate::graph::UpdateEvent::relabel(3, "X")],
            ))
            .unwrap();
        assert_eq!(out.relabeled.len(), 2);
        let r = rwr_batch(&g, v(0), &RwrParams::default()).unwrap();
        assert!(r.get(v(1)) > r.get(v(3)));
        let (u, _) = neighbor_expander(&g, &mut store(), v(0), &Label::new("X"), &[v(0)].into()).unwrap();
        assert_eq!(u, v(1));
    }

    #[test]
    fn bridge_direct_and_two_hop() {
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2)]);
        let mut st = store();
        assert_eq!(bridge(&g, &mut st, v(0), v(1), 1).unwrap(), vec![v(0), v(1)]);
        assert_eq!(bridge(&g, &mut st, v(0), v(2), 3).unwrap(), vec![v(0), v(1), v(2)]);
        assert!(matches!(bridge(&g, &mut st, v(0), v(2), 1), Err(MatchError::NoBridge { .. })));
        assert_eq!(bridge(&g, &mut st, v(0), v(0), 3), Err(MatchError::SameEndpoints));
    }

    #[test]
    fn triangle_on_triangle_is_exact() {
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0)]);
        let p = make_pattern(PatternKind::Triangle);
        let res = gray_match(&g, &mut store(), &p, &MatchConfig::default()).unwrap();
        assert_eq!(res.len(), 1);
        assert!(res[0].exact);
        let mut m = res[0].mapping.clone();
        m.sort();
        assert_eq!(m, vec![v(0), v(1), v(2)]);
        check_result(&g, &p, &res[0], 3).unwrap();
    }

    #[test]
    fn triangle_on_path_is_best_effort() {
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2)]);
        let p = make_pattern(PatternKind::Triangle);
        let res = gray_match(&g, &mut store(), &p, &MatchConfig::default()).unwrap();
        assert_eq!(res.len(), 1);
        assert!(!res[0].exact);
        assert_eq!(res[0].direct_edges(), 2);
        assert!(res[0].bridges.iter().any(|b| b.len() == 3));
        check_result(&g, &p, &res[0], 3).unwrap();
    }

    #[test]
    fn two_disjoint_squares() {
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4)]);
        let p = make_pattern(PatternKind::Square);
        let cfg = MatchConfig { k: 3, ..MatchConfig::default() };
        let res = gray_match(&g, &mut store(), &p, &cfg).unwrap();
        assert_eq!(res.len(), 2);
        assert!(res.iter().all(|r| r.exact));
        for r in &res {
            check_result(&g, &p, r, 3).unwrap();
        }
    }

    #[test]
    fn partial_results_kept_only_when_asked() {
        // two components: a triangle query cannot connect across them
        let g = TemporalGraph::from_edges(&[(0, 1), (2, 3)]);
        let p = make_pattern(PatternKind::Triangle);
        let strict = gray_match(&g, &mut store(), &p, &MatchConfig::default()).unwrap();
        assert!(strict.is_empty());
    }
}
