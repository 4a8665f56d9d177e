//! Incremental matching: repair stored results after graph updates and
//! re-run the matcher from the vertices chosen for re-computation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{BatchOutcome, Label, TemporalGraph, VertexId, View, ViewEdge};
use crate::matcher::{
    bridge_scored, expand_from, expand_seed, gray_match, rescore, seed_slot_for, sort_results, MatchConfig, MatchError,
    MatchKey, MatchResult,
};
use crate::pattern::QueryPattern;
use crate::proximity::{ProximityError, ProximityStore, RwrParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResultId(pub u64);

impl fmt::Display for ResultId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Stored results plus inverted indexes over the data they use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchIndex {
    view: View,
    next_id: u64,
    results: BTreeMap<ResultId, MatchResult>,
    by_edge: BTreeMap<ViewEdge, BTreeSet<ResultId>>,
    by_vertex: BTreeMap<VertexId, BTreeSet<ResultId>>,
    by_path_vertex: BTreeMap<VertexId, BTreeSet<ResultId>>,
    by_key: BTreeMap<MatchKey, ResultId>,
    tombstones: Option<Vec<MatchResult>>,
}

/// The derived indexes, for consistency checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexSnapshot {
    pub by_edge: BTreeMap<ViewEdge, BTreeSet<ResultId>>,
    pub by_vertex: BTreeMap<VertexId, BTreeSet<ResultId>>,
    pub by_path_vertex: BTreeMap<VertexId, BTreeSet<ResultId>>,
    pub by_key: BTreeMap<MatchKey, ResultId>,
}

fn link<K: Ord>(map: &mut BTreeMap<K, BTreeSet<ResultId>>, key: K, id: ResultId) {
    map.entry(key).or_default().insert(id);
}

fn unlink<K: Ord>(map: &mut BTreeMap<K, BTreeSet<ResultId>>, key: K, id: ResultId) {
    if let Some(set) = map.get_mut(&key) {
        set.remove(&id);
        if set.is_empty() {
            map.remove(&key);
        }
    }
}

fn normalize(view: View, a: VertexId, b: VertexId) -> ViewEdge {
    if view == View::Undirected && b < a {
        (b, a)
    } else {
        (a, b)
    }
}

impl MatchIndex {
    pub fn new(view: View) -> Self {
        MatchIndex { view, ..MatchIndex::default() }
    }

    /// Keep removed results instead of dropping them.
    pub fn with_tombstones(mut self) -> Self {
        self.tombstones = Some(Vec::new());
        self
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn get(&self, id: ResultId) -> Option<&MatchResult> {
        self.results.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ResultId, &MatchResult)> + '_ {
        self.results.iter().map(|(&id, r)| (id, r))
    }

    pub fn exact_count(&self) -> usize {
        self.results.values().filter(|r| r.exact).count()
    }

    pub fn tombstones(&self) -> &[MatchResult] {
        self.tombstones.as_deref().unwrap_or(&[])
    }

    pub fn contains_key(&self, key: &MatchKey) -> bool {
        self.by_key.contains_key(key)
    }

    pub fn using_edge(&self, a: VertexId, b: VertexId) -> Vec<ResultId> {
        self.by_edge.get(&normalize(self.view, a, b)).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    pub fn mapping_vertex(&self, v: VertexId) -> Vec<ResultId> {
        self.by_vertex.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    pub fn on_path(&self, v: VertexId) -> Vec<ResultId> {
        self.by_path_vertex.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default()
    }

    fn link_all(&mut self, id: ResultId, r: &MatchResult, key: MatchKey) {
        for &v in &r.mapping {
            link(&mut self.by_vertex, v, id);
        }
        for (a, b) in r.path_edges() {
            link(&mut self.by_edge, normalize(self.view, a, b), id);
        }
        for v in r.path_vertices() {
            link(&mut self.by_path_vertex, v, id);
        }
        self.by_key.insert(key, id);
    }

    fn unlink_all(&mut self, id: ResultId, r: &MatchResult, key: &MatchKey) {
        for &v in &r.mapping {
            unlink(&mut self.by_vertex, v, id);
        }
        for (a, b) in r.path_edges() {
            unlink(&mut self.by_edge, normalize(self.view, a, b), id);
        }
        for v in r.path_vertices() {
            unlink(&mut self.by_path_vertex, v, id);
        }
        if self.by_key.get(key) == Some(&id) {
            self.by_key.remove(key);
        }
    }

    /// Stores `result` unless an equivalent one is already stored.
    pub fn insert(&mut self, pattern: &QueryPattern, result: MatchResult) -> Option<ResultId> {
        let key = result.key(pattern);
        if self.by_key.contains_key(&key) {
            return None;
        }
        let id = ResultId(self.next_id);
        self.next_id += 1;
        self.link_all(id, &result, key);
        self.results.insert(id, result);
        Some(id)
    }

    pub fn remove(&mut self, pattern: &QueryPattern, id: ResultId) -> Option<MatchResult> {
        let r = self.results.remove(&id)?;
        self.unlink_all(id, &r, &r.key(pattern));
        if let Some(t) = self.tombstones.as_mut() {
            t.push(r.clone());
        }
        Some(r)
    }

    /// Swaps in an updated version of a stored result. When the update makes
    /// it equivalent to another stored result it is removed instead and
    /// `false` is returned.
    pub fn replace(&mut self, pattern: &QueryPattern, id: ResultId, updated: MatchResult) -> bool {
        let Some(old) = self.results.remove(&id) else {
            return false;
        };
        self.unlink_all(id, &old, &old.key(pattern));
        let key = updated.key(pattern);
        if self.by_key.contains_key(&key) {
            if let Some(t) = self.tombstones.as_mut() {
                t.push(old);
            }
            return false;
        }
        self.link_all(id, &updated, key);
        self.results.insert(id, updated);
        true
    }

    pub fn clear(&mut self) -> usize {
        let n = self.results.len();
        self.results.clear();
        self.by_edge.clear();
        self.by_vertex.clear();
        self.by_path_vertex.clear();
        self.by_key.clear();
        n
    }

    /// Indexes recomputed from the stored results alone.
    pub fn rebuild(&self, pattern: &QueryPattern) -> IndexSnapshot {
        let mut fresh = MatchIndex::new(self.view);
        for (&id, r) in &self.results {
            fresh.link_all(id, r, r.key(pattern));
        }
        fresh.snapshot()
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        IndexSnapshot {
            by_edge: self.by_edge.clone(),
            by_vertex: self.by_vertex.clone(),
            by_path_vertex: self.by_path_vertex.clone(),
            by_key: self.by_key.clone(),
        }
    }

    pub fn is_consistent(&self, pattern: &QueryPattern) -> bool {
        self.rebuild(pattern) == self.snapshot()
    }

    /// Stored results, best first.
    pub fn sorted(&self) -> Vec<MatchResult> {
        let mut v: Vec<MatchResult> = self.results.values().cloned().collect();
        sort_results(&mut v);
        v
    }
}

/// What the repairs of one step did to the stored results.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    /// Results whose bridge paths were recomputed and changed.
    pub rebridged: Vec<ResultId>,
    /// Results that had a query vertex rebound after a label change.
    pub remapped: Vec<ResultId>,
    /// Results removed: unrepairable, or equivalent to another result after
    /// repair.
    pub invalidated: Vec<ResultId>,
}

impl RepairReport {
    pub fn is_empty(&self) -> bool {
        self.rebridged.is_empty() && self.remapped.is_empty() && self.invalidated.is_empty()
    }

    fn merge(&mut self, other: RepairReport) {
        self.rebridged.extend(other.rebridged);
        self.remapped.extend(other.remapped);
        self.invalidated.extend(other.invalidated);
    }
}

enum Fix {
    Unchanged,
    Changed(MatchResult),
    Dead,
}

/// Re-bridges query edges `edges` of `result`; `Dead` when one cannot be
/// bridged and partial results are off.
fn rebridge(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    pattern: &QueryPattern,
    result: &MatchResult,
    edges: &[usize],
    config: &MatchConfig,
) -> Result<Fix, ProximityError> {
    let mut updated = result.clone();
    for &i in edges {
        let (a, b) = pattern.edges[i];
        match bridge_scored(graph, store, updated.mapping[a], updated.mapping[b], config.max_hops) {
            Ok((path, _)) => updated.bridges[i] = path,
            Err(MatchError::NoBridge { .. }) if config.allow_partial => updated.bridges[i].clear(),
            Err(MatchError::NoBridge { .. }) => return Ok(Fix::Dead),
            Err(MatchError::Proximity(e)) => return Err(e),
            Err(_) => return Ok(Fix::Dead),
        }
    }
    match rescore(graph, store, &mut updated) {
        Ok(()) => {}
        Err(MatchError::Proximity(e)) => return Err(e),
        Err(_) => return Ok(Fix::Dead),
    }
    if updated.bridges == result.bridges {
        Ok(Fix::Unchanged)
    } else {
        Ok(Fix::Changed(updated))
    }
}

fn settle(index: &mut MatchIndex, pattern: &QueryPattern, id: ResultId, fix: Fix, report: &mut RepairReport) {
    match fix {
        Fix::Unchanged => {}
        Fix::Changed(r) => {
            if index.replace(pattern, id, r) {
                report.rebridged.push(id);
            } else {
                report.invalidated.push(id);
            }
        }
        Fix::Dead => {
            index.remove(pattern, id);
            report.invalidated.push(id);
        }
    }
}

/// After edge `a`-`b` appeared: re-bridges every query edge whose path
/// passes `a` or `b` and keeps the new path when it differs.
pub fn repair_on_edge_add(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    index: &mut MatchIndex,
    pattern: &QueryPattern,
    edge: (VertexId, VertexId),
    config: &MatchConfig,
) -> Result<RepairReport, ProximityError> {
    let (a, b) = edge;
    let mut ids: BTreeSet<ResultId> = index.on_path(a).into_iter().collect();
    ids.extend(index.on_path(b));
    let mut report = RepairReport::default();
    for id in ids {
        let Some(r) = index.get(id).cloned() else { continue };
        let affected: Vec<usize> = r
            .bridges
            .iter()
            .enumerate()
            .filter(|(_, p)| p.len() > 2 && (p.contains(&a) || p.contains(&b)))
            .map(|(i, _)| i)
            .collect();
        if affected.is_empty() {
            continue;
        }
        let fix = rebridge(graph, store, pattern, &r, &affected, config)?;
        settle(index, pattern, id, fix, &mut report);
    }
    Ok(report)
}

/// After edge `a`-`b` disappeared: re-bridges every query edge whose path
/// used it; results with an unbridgeable edge are removed.
pub fn repair_on_edge_remove(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    index: &mut MatchIndex,
    pattern: &QueryPattern,
    edge: (VertexId, VertexId),
    config: &MatchConfig,
) -> Result<RepairReport, ProximityError> {
    let (a, b) = edge;
    let key = normalize(graph.view(), a, b);
    let mut report = RepairReport::default();
    for id in index.using_edge(a, b) {
        let Some(r) = index.get(id).cloned() else { continue };
        let affected: Vec<usize> = r
            .bridges
            .iter()
            .enumerate()
            .filter(|(_, p)| p.windows(2).any(|w| normalize(graph.view(), w[0], w[1]) == key))
            .map(|(i, _)| i)
            .collect();
        let fix = rebridge(graph, store, pattern, &r, &affected, config)?;
        settle(index, pattern, id, fix, &mut report);
    }
    Ok(report)
}

/// After `v` was relabeled: every result binding `v` to a query vertex whose
/// label no longer matches gets that slot re-expanded from its bound query
/// neighbors and the incident query edges re-bridged.
pub fn repair_on_label_update(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    index: &mut MatchIndex,
    pattern: &QueryPattern,
    v: VertexId,
    new_label: &Label,
    config: &MatchConfig,
) -> Result<RepairReport, ProximityError> {
    let mut report = RepairReport::default();
    for id in index.mapping_vertex(v) {
        let Some(r) = index.get(id).cloned() else { continue };
        let Some(q) = r.mapping.iter().position(|&m| m == v) else { continue };
        if &pattern.labels[q] == new_label {
            continue;
        }
        let anchors: Vec<VertexId> = pattern.neighbors(q).into_iter().map(|p| r.mapping[p]).collect();
        let used: BTreeSet<VertexId> = r.mapping.iter().copied().collect();
        let replacement = match expand_from(graph, store, &anchors, &pattern.labels[q], &used) {
            Some(Ok((u, _))) => Some(u),
            Some(Err(MatchError::Proximity(e))) => return Err(e),
            _ => None,
        };
        let Some(u) = replacement else {
            index.remove(pattern, id);
            report.invalidated.push(id);
            continue;
        };
        let mut patched = r.clone();
        patched.mapping[q] = u;
        if patched.seed == v {
            patched.seed = u;
        }
        let incident: Vec<usize> =
            (0..pattern.edge_count()).filter(|&i| pattern.edges[i].0 == q || pattern.edges[i].1 == q).collect();
        match rebridge(graph, store, pattern, &patched, &incident, config)? {
            Fix::Dead => {
                index.remove(pattern, id);
                report.invalidated.push(id);
            }
            Fix::Unchanged => unreachable!("rebound endpoints change every incident bridge"),
            Fix::Changed(updated) => {
                if index.replace(pattern, id, updated) {
                    report.remapped.push(id);
                } else {
                    report.invalidated.push(id);
                }
            }
        }
    }
    Ok(report)
}

/// Runs every repair `outcome` calls for: removals, then relabels, then
/// additions.
pub fn repair_all(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    index: &mut MatchIndex,
    pattern: &QueryPattern,
    outcome: &BatchOutcome,
    config: &MatchConfig,
) -> Result<RepairReport, ProximityError> {
    let mut report = RepairReport::default();
    for &e in &outcome.edges_removed {
        report.merge(repair_on_edge_remove(graph, store, index, pattern, e, config)?);
    }
    for rl in &outcome.relabeled {
        report.merge(repair_on_label_update(graph, store, index, pattern, rl.vertex, &rl.new, config)?);
    }
    for &e in &outcome.edges_added {
        report.merge(repair_on_edge_add(graph, store, index, pattern, e, config)?);
    }
    Ok(report)
}

/// Counters for one [`igpm_step`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgpmStepStats {
    pub recomputed: usize,
    pub new_patterns: usize,
    /// Recompute-set vertices that were absent or whose label occurs nowhere
    /// in the pattern.
    pub skipped: usize,
    /// Seeds whose expansion failed.
    pub failed: usize,
    pub new_ids: Vec<ResultId>,
}

/// Expands the pattern once from every vertex of `recompute_set` as seed and
/// stores up to `config.k` of the best distinct new results.
pub fn igpm_step(
    graph: &TemporalGraph,
    store: &mut ProximityStore,
    index: &mut MatchIndex,
    pattern: &QueryPattern,
    recompute_set: &BTreeSet<VertexId>,
    config: &MatchConfig,
) -> Result<IgpmStepStats, MatchError> {
    let mut stats = IgpmStepStats { recomputed: recompute_set.len(), ..IgpmStepStats::default() };
    let mut found = Vec::new();
    let mut keys = BTreeSet::new();
    let seeds: Vec<VertexId> = recompute_set
        .iter()
        .copied()
        .filter(|&v| graph.label(v).is_some_and(|l| seed_slot_for(pattern, l).is_some()))
        .collect();
    store.prefetch(graph, &seeds)?;
    for &v in recompute_set {
        let Some(qseed) = graph.label(v).and_then(|l| seed_slot_for(pattern, l)) else {
            stats.skipped += 1;
            continue;
        };
        match expand_seed(graph, store, pattern, qseed, v, config) {
            Ok(r) => {
                let key = r.key(pattern);
                if !index.contains_key(&key) && keys.insert(key) {
                    found.push(r);
                }
            }
            Err(MatchError::NoCandidate(_) | MatchError::NoBridge { .. }) => stats.failed += 1,
            Err(e) => return Err(e),
        }
    }
    sort_results(&mut found);
    for r in found.into_iter().take(config.k) {
        if let Some(id) = index.insert(pattern, r) {
            stats.new_ids.push(id);
        }
    }
    stats.new_patterns = stats.new_ids.len();
    Ok(stats)
}

/// Matching from scratch: a fresh proximity store and a full batch match.
/// Also returns the work the fresh store performed.
pub fn batch_rematch(
    graph: &TemporalGraph,
    pattern: &QueryPattern,
    params: &RwrParams,
    config: &MatchConfig,
) -> Result<(Vec<MatchResult>, u64), MatchError> {
    let mut store = ProximityStore::new(*params)?;
    let results = gray_match(graph, &mut store, pattern, config)?;
    Ok((results, store.work()))
}
