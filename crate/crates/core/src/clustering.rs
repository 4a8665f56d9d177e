//! Louvain community detection and its recursive size-bounded variant.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{TemporalGraph, VertexId, View};

/// Passes stop once a full sweep gains less modularity than this.
pub const MIN_GAIN: f64 = 1e-7;

/// Gains at or below this are treated as rounding noise.
const MOVE_EPS: f64 = 1e-12;

/// A partition of the graph's vertices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    pub assignment: BTreeMap<VertexId, usize>,
    /// Members per community id, ascending. Ids are dense and ordered by
    /// smallest member.
    pub communities: Vec<Vec<VertexId>>,
    pub modularity: f64,
    /// Communities larger than the requested maximum that Louvain would not
    /// split further.
    pub indivisible: BTreeSet<usize>,
    /// Modularity after each local-move sweep, across all levels.
    pub trace: Vec<f64>,
}

impl CommunityAssignment {
    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn community_of(&self, v: VertexId) -> Option<usize> {
        self.assignment.get(&v).copied()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.communities.iter().map(Vec::len).collect()
    }

    pub fn max_size(&self) -> usize {
        self.communities.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Builds an assignment from arbitrary labels, renumbering them densely.
    pub fn from_labels(graph: &TemporalGraph, labels: &BTreeMap<VertexId, usize>) -> Self {
        let mut groups: BTreeMap<usize, Vec<VertexId>> = BTreeMap::new();
        for (&v, &c) in labels {
            groups.entry(c).or_default().push(v);
        }
        let mut communities: Vec<Vec<VertexId>> = groups.into_values().collect();
        communities.sort_by_key(|m| m[0]);
        let mut assignment = BTreeMap::new();
        for (id, members) in communities.iter().enumerate() {
            for &v in members {
                assignment.insert(v, id);
            }
        }
        let mut out = CommunityAssignment { assignment, communities, ..Default::default() };
        out.modularity = modularity(graph, &out.assignment);
        out
    }
}

/// Neighbors of `v` ignoring direction.
fn sym_neighbors(graph: &TemporalGraph, v: VertexId) -> BTreeSet<VertexId> {
    match graph.view() {
        View::Undirected => graph.neighbors(v).clone(),
        View::Directed => graph.neighbors(v).union(graph.predecessors(v)).copied().collect(),
    }
}

/// Standard modularity of a partition of the undirected, unweighted graph.
/// Vertices missing from `assignment` count as singletons.
pub fn modularity(graph: &TemporalGraph, assignment: &BTreeMap<VertexId, usize>) -> f64 {
    let mut m2 = 0.0;
    let mut internal: BTreeMap<(bool, usize), f64> = BTreeMap::new();
    let mut tot: BTreeMap<(bool, usize), f64> = BTreeMap::new();
    let key = |v: VertexId| match assignment.get(&v) {
        Some(&c) => (true, c),
        None => (false, v.index()),
    };
    for v in graph.vertices() {
        let nb = sym_neighbors(graph, v);
        let k = nb.len() as f64;
        m2 += k;
        *tot.entry(key(v)).or_default() += k;
        for u in nb {
            if key(u) == key(v) {
                *internal.entry(key(v)).or_default() += 1.0;
            }
        }
    }
    if m2 == 0.0 {
        return 0.0;
    }
    // internal counts each edge twice, matching m2
    let mut q = 0.0;
    for (c, t) in &tot {
        let inside = internal.get(c).copied().unwrap_or(0.0);
        q += inside / m2 - (t / m2) * (t / m2);
    }
    q
}

/// Weighted graph on dense ids; `loops[i]` is twice the weight inside node i.
struct Level {
    adj: Vec<BTreeMap<usize, f64>>,
    loops: Vec<f64>,
    degree: Vec<f64>,
    m2: f64,
}

impl Level {
    fn from_graph(graph: &TemporalGraph, ids: &[VertexId]) -> Self {
        let pos: BTreeMap<VertexId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let n = ids.len();
        let mut adj = vec![BTreeMap::new(); n];
        for (i, &v) in ids.iter().enumerate() {
            for u in sym_neighbors(graph, v) {
                if let Some(&j) = pos.get(&u) {
                    adj[i].insert(j, 1.0);
                }
            }
        }
        let degree: Vec<f64> = adj.iter().map(|a| a.values().sum()).collect();
        let m2 = degree.iter().sum();
        Level { adj, loops: vec![0.0; n], degree, m2 }
    }

    fn modularity(&self, comm: &[usize]) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        let k = comm.iter().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for i in 0..self.adj.len() {
            let c = comm[i];
            tot[c] += self.degree[i];
            inside[c] += self.loops[i];
            for (&j, &w) in &self.adj[i] {
                if comm[j] == c {
                    inside[c] += w;
                }
            }
        }
        (0..k).map(|c| inside[c] / self.m2 - (tot[c] / self.m2) * (tot[c] / self.m2)).sum()
    }

    /// Local moves in ascending node order until a sweep gains less than
    /// `min_gain`. Returns whether any node moved.
    fn local_moves(&self, comm: &mut [usize], min_gain: f64, trace: &mut Vec<f64>) -> bool {
        let n = self.adj.len();
        let mut tot = vec![0.0; n];
        for i in 0..n {
            tot[comm[i]] += self.degree[i];
        }
        let mut moved_any = false;
        let mut q = self.modularity(comm);
        loop {
            let mut moved = false;
            for i in 0..n {
                let ki = self.degree[i];
                if ki == 0.0 {
                    continue;
                }
                let own = comm[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for (&j, &w) in &self.adj[i] {
                    if j != i {
                        *links.entry(comm[j]).or_default() += w;
                    }
                }
                tot[own] -= ki;
                // gain of joining c, up to a factor shared by all choices
                let gain = |c: usize, l: f64| l - tot[c] * ki / self.m2;
                let mut best = own;
                let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
                for (&c, &l) in &links {
                    let g = gain(c, l);
                    if g > best_gain + MOVE_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                if best != own {
                    comm[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            let nq = self.modularity(comm);
            trace.push(nq);
            let gained = nq - q;
            q = nq;
            if !moved || gained < min_gain {
                break;
            }
        }
        moved_any
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> Level {
        let mut adj = vec![BTreeMap::new(); k];
        let mut loops = vec![0.0; k];
        let mut degree = vec![0.0; k];
        for i in 0..self.adj.len() {
            let a = comm[i];
            degree[a] += self.degree[i];
            loops[a] += self.loops[i];
            for (&j, &w) in &self.adj[i] {
                let b = comm[j];
                if a == b {
                    loops[a] += w;
                } else {
                    *adj[a].entry(b).or_insert(0.0) += w;
                }
            }
        }
        Level { adj, loops, degree, m2: self.m2 }
    }
}

/// Renumbers community ids densely in order of first appearance.
fn compact(comm: &mut [usize]) -> usize {
    let mut map = BTreeMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LouvainConfig {
    pub min_gain: f64,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig { min_gain: MIN_GAIN }
    }
}

/// Two-phase Louvain: local moves, then aggregation, repeated until a level
/// gains less than `min_gain`. Deterministic.
pub fn louvain(graph: &TemporalGraph) -> CommunityAssignment {
    louvain_with(graph, &LouvainConfig::default(), None)
}

/// [`louvain`] with explicit settings, optionally starting from `initial`
/// (vertices it does not cover start as singletons).
pub fn louvain_with(
    graph: &TemporalGraph,
    config: &LouvainConfig,
    initial: Option<&CommunityAssignment>,
) -> CommunityAssignment {
    let ids: Vec<VertexId> = graph.vertices().collect();
    louvain_on(graph, &ids, config, initial)
}

fn louvain_on(
    graph: &TemporalGraph,
    ids: &[VertexId],
    config: &LouvainConfig,
    initial: Option<&CommunityAssignment>,
) -> CommunityAssignment {
    let n = ids.len();
    let mut level = Level::from_graph(graph, ids);
    // membership of every original vertex in current-level nodes
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut comm: Vec<usize> = match initial {
        Some(init) => {
            let offset = init.len();
            ids.iter().enumerate().map(|(i, v)| init.community_of(*v).unwrap_or(offset + i)).collect()
        }
        None => (0..n).collect(),
    };
    if initial.is_some() {
        compact(&mut comm);
    }
    let mut trace = Vec::new();
    if level.m2 > 0.0 {
        trace.push(level.modularity(&comm));
        loop {
            let before = level.modularity(&comm);
            let moved = level.local_moves(&mut comm, config.min_gain, &mut trace);
            let k = compact(&mut comm);
            for x in node_of.iter_mut() {
                *x = comm[*x];
            }
            let after = level.modularity(&comm);
            if !moved || after - before < config.min_gain || k == level.adj.len() {
                break;
            }
            level = level.aggregate(&comm, k);
            comm = (0..k).collect();
        }
    } else {
        compact(&mut comm);
        for x in node_of.iter_mut() {
            *x = comm[*x];
        }
    }
    let labels: BTreeMap<VertexId, usize> = ids.iter().zip(&node_of).map(|(&v, &c)| (v, c)).collect();
    let mut out = CommunityAssignment::from_labels(graph, &labels);
    out.trace = trace;
    out
}

/// Louvain, then Louvain again inside every community larger than
/// `max_size` until each is small enough or cannot be split.
pub fn recursive_louvain(graph: &TemporalGraph, max_size: usize) -> CommunityAssignment {
    recursive_louvain_with(graph, max_size, &LouvainConfig::default(), None)
}

pub fn recursive_louvain_with(
    graph: &TemporalGraph,
    max_size: usize,
    config: &LouvainConfig,
    initial: Option<&CommunityAssignment>,
) -> CommunityAssignment {
    let max_size = max_size.max(1);
    let top = louvain_with(graph, config, initial);
    let mut trace = top.trace.clone();
    let mut done: Vec<(Vec<VertexId>, bool)> = Vec::new();
    let mut work: Vec<Vec<VertexId>> = top.communities;
    while let Some(members) = work.pop() {
        if members.len() <= max_size {
            done.push((members, false));
            continue;
        }
        let keep: BTreeSet<VertexId> = members.iter().copied().collect();
        let sub = graph.induced(&keep);
        let split = louvain_on(&sub, &members, config, None);
        if split.len() <= 1 {
            done.push((members, true));
        } else {
            work.extend(split.communities);
        }
    }
    done.sort_by_key(|(m, _)| m[0]);
    let mut labels = BTreeMap::new();
    let mut flagged = BTreeSet::new();
    for (id, (members, stuck)) in done.iter().enumerate() {
        if *stuck {
            flagged.insert(id);
        }
        for &v in members {
            labels.insert(v, id);
        }
    }
    let mut out = CommunityAssignment::from_labels(graph, &labels);
    out.indivisible = flagged;
    trace.push(out.modularity);
    out.trace = trace;
    out
}

/// Union of every community that contains a touched vertex. Touched
/// vertices without a community are passed through.
pub fn recompute_set_from_communities(
    assignment: &CommunityAssignment,
    touched: &BTreeSet<VertexId>,
) -> BTreeSet<VertexId> {
    let mut hit = BTreeSet::new();
    let mut out = BTreeSet::new();
    for &v in touched {
        match assignment.community_of(v) {
            Some(c) => {
                hit.insert(c);
            }
            None => {
                out.insert(v);
            }
        }
    }
    for c in hit {
        out.extend(assignment.communities[c].iter().copied());
    }
    out
}

/// Fraction of communities containing at least one touched vertex.
pub fn affected_fraction(assignment: &CommunityAssignment, touched: &BTreeSet<VertexId>) -> f64 {
    if assignment.is_empty() {
        return 0.0;
    }
    let hit: BTreeSet<usize> = touched.iter().filter_map(|v| assignment.community_of(*v)).collect();
    (hit.len() as f64 / assignment.len() as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    fn two_triangles() -> TemporalGraph {
        TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    }

    #[test]
    fn disjoint_triangles() {
        let a = louvain(&two_triangles());
        assert_eq!(a.sizes(), vec![3, 3]);
        assert!((a.modularity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clique_is_one_community() {
        let mut e = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                e.push((i, j));
            }
        }
        let a = louvain(&TemporalGraph::from_edges(&e));
        assert_eq!(a.sizes(), vec![5]);
    }

    #[test]
    fn edgeless_gives_singletons() {
        let mut g = TemporalGraph::new();
        for i in 0..4 {
            g.insert_vertex(v(i), None);
        }
        let a = louvain(&g);
        assert_eq!(a.len(), 4);
        assert_eq!(a.modularity, 0.0);
    }

    #[test]
    fn modularity_matches_direct_formula() {
        // two triangles joined by 2-3: m = 7
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]);
        let part: BTreeMap<VertexId, usize> = (0..6).map(|i| (v(i), (i / 3) as usize)).collect();
        // each side: 3 internal edges, degree sum 7
        let expected = 2.0 * (3.0 / 7.0 - (7.0 / 14.0) * (7.0 / 14.0));
        assert!((modularity(&g, &part) - expected).abs() < 1e-12);
        let a = recursive_louvain(&g, 3);
        assert_eq!(a.sizes(), vec![3, 3]);
        assert!((a.modularity - expected).abs() < 1e-12);
    }

    #[test]
    fn recursive_bounds() {
        let g = two_triangles();
        assert_eq!(recursive_louvain(&g, 6).assignment, louvain(&g).assignment);
        let a = recursive_louvain(&g, 1);
        for (id, size) in a.sizes().into_iter().enumerate() {
            assert!(size <= 1 || a.indivisible.contains(&id));
        }
    }

    #[test]
    fn recompute_sets() {
        // three triangles
        let g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (6, 7), (7, 8), (8, 6)]);
        let a = louvain(&g);
        assert_eq!(a.len(), 3);
        assert!(recompute_set_from_communities(&a, &BTreeSet::new()).is_empty());
        let one = recompute_set_from_communities(&a, &[v(4)].into());
        assert_eq!(one, [v(3), v(4), v(5)].into());
        let two = recompute_set_from_communities(&a, &[v(0), v(7), v(99)].into());
        assert_eq!(two, [v(0), v(1), v(2), v(6), v(7), v(8), v(99)].into());
        assert!((affected_fraction(&a, &[v(0), v(7)].into()) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_keeps_good_partition() {
        let g = two_triangles();
        let first = louvain(&g);
        let again = louvain_with(&g, &LouvainConfig::default(), Some(&first));
        assert_eq!(again.assignment, first.assignment);
    }
}
