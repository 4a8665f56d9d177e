//! Exhaustive subgraph-isomorphism enumeration for validating matches.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{TemporalGraph, VertexId, View};
use crate::matcher::{MatchKey, MatchResult};
use crate::pattern::QueryPattern;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_data_vertices: usize,
    pub max_pattern_vertices: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_data_vertices: 2000, max_pattern_vertices: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("graph has {0} vertices, above the oracle cap of {1}")]
    GraphTooLarge(usize, usize),
    #[error("pattern has {0} vertices, above the oracle cap of {1}")]
    PatternTooLarge(usize, usize),
}

/// Every exact embedding of a pattern, one representative mapping per
/// automorphism class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleResult {
    pub embeddings: BTreeMap<MatchKey, Vec<VertexId>>,
}

impl OracleResult {
    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn contains(&self, key: &MatchKey) -> bool {
        self.embeddings.contains_key(key)
    }

    /// True when `result` is exact and its embedding is in the set.
    pub fn admits(&self, pattern: &QueryPattern, result: &MatchResult) -> bool {
        result.exact && self.contains(&result.key(pattern))
    }
}

/// All label-consistent injective mappings realizing every query edge as a
/// direct data edge, deduplicated modulo pattern automorphisms.
pub fn brute_force_embeddings(
    graph: &TemporalGraph,
    pattern: &QueryPattern,
    limits: &OracleLimits,
) -> Result<OracleResult, OracleError> {
    if graph.vertex_count() > limits.max_data_vertices {
        return Err(OracleError::GraphTooLarge(graph.vertex_count(), limits.max_data_vertices));
    }
    if pattern.vertex_count() > limits.max_pattern_vertices {
        return Err(OracleError::PatternTooLarge(pattern.vertex_count(), limits.max_pattern_vertices));
    }
    // most constrained first: BFS from the highest-degree query vertex keeps
    // every later vertex adjacent to a bound one
    let start = (0..pattern.vertex_count()).max_by_key(|&q| (pattern.degree(q), usize::MAX - q)).unwrap_or(0);
    let order = pattern.bfs_order(start);
    let mut out = OracleResult::default();
    let mut bound = vec![None; pattern.vertex_count()];
    let data: Vec<VertexId> = graph.vertices().collect();
    extend(graph, pattern, &order, 0, &data, &mut bound, &mut out);
    Ok(out)
}

/// Distinct vertices adjacent to `v` in either direction.
fn total_degree(graph: &TemporalGraph, v: VertexId) -> usize {
    match graph.view() {
        View::Undirected => graph.neighbors(v).len(),
        View::Directed => graph.neighbors(v).union(graph.predecessors(v)).count(),
    }
}

fn fits(graph: &TemporalGraph, pattern: &QueryPattern, bound: &[Option<VertexId>], q: usize, v: VertexId) -> bool {
    if bound.contains(&Some(v)) || graph.label(v) != Some(&pattern.labels[q]) {
        return false;
    }
    if total_degree(graph, v) < pattern.degree(q) {
        return false;
    }
    pattern.edges.iter().all(|&(a, b)| {
        if a == q {
            bound[b].is_none_or(|w| graph.has_edge(v, w))
        } else if b == q {
            bound[a].is_none_or(|w| graph.has_edge(w, v))
        } else {
            true
        }
    })
}

fn extend(
    graph: &TemporalGraph,
    pattern: &QueryPattern,
    order: &[usize],
    depth: usize,
    data: &[VertexId],
    bound: &mut Vec<Option<VertexId>>,
    out: &mut OracleResult,
) {
    if depth == order.len() {
        let mapping: Vec<VertexId> = bound.iter().map(|v| v.expect("complete")).collect();
        out.embeddings.entry(MatchKey::of(pattern, &mapping)).or_insert(mapping);
        return;
    }
    let q = order[depth];
    let anchor = pattern.neighbors(q).into_iter().find_map(|p| bound[p]);
    let candidates: Vec<VertexId> = match anchor {
        Some(a) => {
            let mut c: BTreeSet<VertexId> = graph.neighbors(a).clone();
            c.extend(graph.predecessors(a).iter().copied());
            c.into_iter().collect()
        }
        None => data.to_vec(),
    };
    for v in candidates {
        if fits(graph, pattern, bound, q, v) {
            bound[q] = Some(v);
            extend(graph, pattern, order, depth + 1, data, bound, out);
            bound[q] = None;
        }
    }
}

/// Reference enumeration over every injective tuple, for cross-checking
/// [`brute_force_embeddings`] on tiny graphs.
pub fn naive_embeddings(graph: &TemporalGraph, pattern: &QueryPattern) -> BTreeSet<MatchKey> {
    let data: Vec<VertexId> = graph.vertices().collect();
    let n = pattern.vertex_count();
    let mut out = BTreeSet::new();
    if data.len() < n {
        return out;
    }
    let mut idx = vec![0usize; n];
    loop {
        let mapping: Vec<VertexId> = idx.iter().map(|&i| data[i]).collect();
        let distinct: BTreeSet<_> = mapping.iter().collect();
        if distinct.len() == n
            && (0..n).all(|q| graph.label(mapping[q]) == Some(&pattern.labels[q]))
            && pattern.edges.iter().all(|&(a, b)| graph.has_edge(mapping[a], mapping[b]))
        {
            out.insert(MatchKey::of(pattern, &mapping));
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < data.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
