//! Synthetic edge streams.
//!
//! Every generator is a pure function of its [`Workload`]; edge timestamps
//! are step numbers, so a generated file ingests with raw granularity.

use std::collections::BTreeSet;
use std::io::{self, Write};

use igpm_core::graph::{UpdateBatch, UpdateEvent, VertexId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    /// `edges_per_step` uniformly random new edges per step.
    ErdosRenyi { n: u32, steps: u32, edges_per_step: u32 },
    /// Step 1 holds a Barabasi-Albert graph on `n` vertices with `m` edges
    /// per arriving vertex; each later step adds `edges_per_step` new edges
    /// whose endpoints are drawn in proportion to degree.
    PreferentialAttachment { n: u32, steps: u32, edges_per_step: u32, m: u32 },
    /// Random background edges plus `triangles` vertex-disjoint triangles
    /// whose last edge arrives at a recorded step.
    PlantedPatterns { n: u32, steps: u32, edges_per_step: u32, triangles: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub seed: u64,
    #[serde(flatten)]
    pub model: Model,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTriangle {
    pub vertices: [u32; 3],
    pub completion_step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub workload: Workload,
    pub triangles: Vec<PlantedTriangle>,
}

/// A generated stream: `(src, dst, step)` in step order.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub workload: Workload,
    pub edges: Vec<(u32, u32, u64)>,
    pub ground_truth: Option<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid workload: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> GenerateError {
    GenerateError::Invalid(msg.into())
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Draws a new undirected edge with `pick` for each endpoint; falls back to
/// uniform pairs after repeated collisions. `None` when the graph is full.
fn fresh_edge(
    rng: &mut ChaCha8Rng,
    n: u32,
    present: &BTreeSet<(u32, u32)>,
    forbidden: &dyn Fn(u32, u32) -> bool,
    pick: &mut dyn FnMut(&mut ChaCha8Rng) -> u32,
) -> Option<(u32, u32)> {
    for attempt in 0..1000 {
        let (a, b) =
            if attempt < 100 { (pick(rng), pick(rng)) } else { (rng.random_range(0..n), rng.random_range(0..n)) };
        if a != b && !present.contains(&key(a, b)) && !forbidden(a, b) {
            return Some((a, b));
        }
    }
    None
}

pub fn generate(workload: &Workload) -> Result<Generated, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed);
    let mut edges = Vec::new();
    let mut present = BTreeSet::new();
    let mut ground_truth = None;
    match workload.model {
        Model::ErdosRenyi { n, steps, edges_per_step } => {
            let total = steps as u64 * edges_per_step as u64;
            if n < 2 || total > n as u64 * (n as u64 - 1) / 2 {
                return Err(invalid("erdos-renyi needs n >= 2 and at most n(n-1)/2 edges"));
            }
            for step in 1..=steps as u64 {
                for _ in 0..edges_per_step {
                    let (a, b) = fresh_edge(&mut rng, n, &present, &|_, _| false, &mut |r| r.random_range(0..n))
                        .ok_or_else(|| invalid("could not place an edge"))?;
                    present.insert(key(a, b));
                    edges.push((a, b, step));
                }
            }
        }
        Model::PreferentialAttachment { n, steps, edges_per_step, m } => {
            if m == 0 || n <= m || steps == 0 {
                return Err(invalid("preferential attachment needs 1 <= m < n and steps >= 1"));
            }
            // endpoint list: every vertex appears once per incident edge
            let mut ends: Vec<u32> = Vec::new();
            for a in 0..=m {
                for b in a + 1..=m {
                    present.insert((a, b));
                    edges.push((a, b, 1));
                    ends.extend([a, b]);
                }
            }
            for v in m + 1..n {
                let mut targets = BTreeSet::new();
                while targets.len() < m as usize {
                    targets.insert(*ends.choose(&mut rng).expect("seed clique has edges"));
                }
                for t in targets {
                    present.insert(key(v, t));
                    edges.push((t, v, 1));
                    ends.extend([t, v]);
                }
            }
            for step in 2..=steps as u64 {
                for _ in 0..edges_per_step {
                    let snapshot = ends.clone();
                    let (a, b) = fresh_edge(&mut rng, n, &present, &|_, _| false, &mut |r| {
                        *snapshot.choose(r).expect("non-empty")
                    })
                    .ok_or_else(|| invalid("graph is complete"))?;
                    present.insert(key(a, b));
                    edges.push((a, b, step));
                    ends.extend([a, b]);
                }
            }
        }
        Model::PlantedPatterns { n, steps, edges_per_step, triangles } => {
            if triangles as u64 * 3 > n as u64 || steps < 2 {
                return Err(invalid("planted patterns need 3 * triangles <= n and steps >= 2"));
            }
            let mut pool: Vec<u32> = (0..n).collect();
            let mut tri = Vec::new();
            for _ in 0..triangles {
                let mut vs = [0u32; 3];
                for slot in &mut vs {
                    let i = rng.random_range(0..pool.len());
                    *slot = pool.swap_remove(i);
                }
                vs.sort_unstable();
                let completion = rng.random_range(2..=steps as u64);
                let first = rng.random_range(1..completion);
                let second = rng.random_range(1..completion);
                tri.push((vs, [first, second, completion]));
            }
            let mut member = vec![usize::MAX; n as usize];
            for (i, (vs, _)) in tri.iter().enumerate() {
                for &v in vs {
                    member[v as usize] = i;
                }
            }
            // planted edges are reserved so background never closes a triangle early
            let reserved: BTreeSet<(u32, u32)> =
                tri.iter().flat_map(|(v, _)| [key(v[0], v[1]), key(v[1], v[2]), key(v[0], v[2])]).collect();
            let same = |a: u32, b: u32| member[a as usize] != usize::MAX && member[a as usize] == member[b as usize];
            for step in 1..=steps as u64 {
                for (vs, when) in &tri {
                    let pairs = [(vs[0], vs[1]), (vs[1], vs[2]), (vs[0], vs[2])];
                    for (pair, &at) in pairs.iter().zip(when) {
                        if at == step {
                            present.insert(key(pair.0, pair.1));
                            edges.push((pair.0, pair.1, step));
                        }
                    }
                }
                for _ in 0..edges_per_step {
                    let blocked = |a: u32, b: u32| same(a, b) || reserved.contains(&key(a, b));
                    let (a, b) = fresh_edge(&mut rng, n, &present, &blocked, &mut |r| r.random_range(0..n))
                        .ok_or_else(|| invalid("could not place a background edge"))?;
                    present.insert(key(a, b));
                    edges.push((a, b, step));
                }
            }
            ground_truth = Some(GroundTruth {
                workload: workload.clone(),
                triangles: tri
                    .into_iter()
                    .map(|(vertices, when)| PlantedTriangle { vertices, completion_step: when[2] })
                    .collect(),
            });
        }
    }
    Ok(Generated { workload: workload.clone(), edges, ground_truth })
}

impl Generated {
    /// Batches with the generator's own vertex ids, one per step.
    pub fn to_batches(&self) -> Vec<UpdateBatch> {
        let last = self.edges.last().map_or(0, |e| e.2);
        let mut batches: Vec<UpdateBatch> = (1..=last).map(|s| UpdateBatch::new(s, Vec::new())).collect();
        for &(a, b, s) in &self.edges {
            batches[s as usize - 1].events.push(UpdateEvent::EdgeAdd { src: VertexId(a), dst: VertexId(b) });
        }
        batches
    }

    /// Edge-list file: a comment line holding the workload as JSON, then
    /// `src dst step` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# workload {}", serde_json::to_string(&self.workload).map_err(io::Error::other)?)?;
        for (a, b, s) in &self.edges {
            writeln!(w, "{a} {b} {s}")?;
        }
        w.flush()
    }
}

/// Extra removals and relabels mixed into an existing stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChurnConfig {
    /// Chance per step of removing one random existing edge.
    pub remove_prob: f64,
    /// Chance per step of relabeling one random existing vertex.
    pub relabel_prob: f64,
    pub labels: Vec<String>,
    pub seed: u64,
}

/// Appends removal and relabel events to the batches of `stream`. Removals
/// always name an edge that exists at that point of the replay.
pub fn inject_churn(stream: &[UpdateBatch], churn: &ChurnConfig) -> Vec<UpdateBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(churn.seed);
    let mut stored: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
    let mut vertices: BTreeSet<VertexId> = BTreeSet::new();
    let mut out = Vec::with_capacity(stream.len());
    for batch in stream {
        let mut b = batch.clone();
        for ev in &batch.events {
            match *ev {
                UpdateEvent::EdgeAdd { src, dst } => {
                    vertices.extend([src, dst]);
                    if src != dst {
                        stored.insert((src, dst));
                    }
                }
                UpdateEvent::EdgeRemove { src, dst } => {
                    stored.remove(&(src, dst));
                }
                UpdateEvent::VertexLabelUpdate { vertex, .. } => {
                    vertices.insert(vertex);
                }
            }
        }
        if !stored.is_empty() && rng.random_bool(churn.remove_prob.clamp(0.0, 1.0)) {
            let i = rng.random_range(0..stored.len());
            let e = *stored.iter().nth(i).expect("in range");
            stored.remove(&e);
            b.events.push(UpdateEvent::EdgeRemove { src: e.0, dst: e.1 });
        }
        if !vertices.is_empty() && !churn.labels.is_empty() && rng.random_bool(churn.relabel_prob.clamp(0.0, 1.0)) {
            let i = rng.random_range(0..vertices.len());
            let v = *vertices.iter().nth(i).expect("in range");
            let label = churn.labels.choose(&mut rng).expect("non-empty");
            b.events.push(UpdateEvent::VertexLabelUpdate { vertex: v, label: label.as_str().into() });
        }
        out.push(b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wl(model: Model) -> Workload {
        Workload { name: "t".into(), seed: 3, model }
    }

    #[test]
    fn erdos_renyi_counts() {
        let g = generate(&wl(Model::ErdosRenyi { n: 100, steps: 10, edges_per_step: 20 })).unwrap();
        assert_eq!(g.edges.len(), 200);
        let pairs: BTreeSet<_> = g.edges.iter().map(|e| key(e.0, e.1)).collect();
        assert_eq!(pairs.len(), 200);
        assert_eq!(g.to_batches().len(), 10);
    }

    #[test]
    fn planted_sidecar_lists_triangles() {
        let g = generate(&wl(Model::PlantedPatterns { n: 30, steps: 10, edges_per_step: 2, triangles: 5 })).unwrap();
        let truth = g.ground_truth.unwrap();
        assert_eq!(truth.triangles.len(), 5);
        for t in &truth.triangles {
            let [a, b, c] = t.vertices;
            for (x, y) in [(a, b), (b, c), (a, c)] {
                let at = g.edges.iter().find(|e| key(e.0, e.1) == key(x, y)).unwrap().2;
                assert!(at <= t.completion_step);
            }
        }
    }

    #[test]
    fn same_seed_same_file() {
        let w = wl(Model::PreferentialAttachment { n: 50, steps: 5, edges_per_step: 5, m: 2 });
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate(&w).unwrap().write_edge_list(&mut a).unwrap();
        generate(&w).unwrap().write_edge_list(&mut b).unwrap();
        assert_eq!(a, b);
        let g = generate(&w).unwrap();
        // base: 3 clique edges plus 2 per later vertex
        assert_eq!(g.edges.iter().filter(|e| e.2 == 1).count(), 3 + 2 * 47);
        assert_eq!(g.edges.len(), 3 + 2 * 47 + 4 * 5);
    }

    #[test]
    fn rejects_impossible() {
        assert!(generate(&wl(Model::ErdosRenyi { n: 3, steps: 2, edges_per_step: 2 })).is_err());
        assert!(generate(&wl(Model::PlantedPatterns { n: 5, steps: 3, edges_per_step: 1, triangles: 2 })).is_err());
    }

    #[test]
    fn churn_removals_are_valid() {
        let g = generate(&wl(Model::ErdosRenyi { n: 20, steps: 30, edges_per_step: 2 })).unwrap();
        let churn = ChurnConfig { remove_prob: 0.8, relabel_prob: 0.5, labels: vec!["A".into(), "V".into()], seed: 1 };
        let stream = inject_churn(&g.to_batches(), &churn);
        let mut graph = igpm_core::graph::TemporalGraph::new();
        for b in &stream {
            graph.apply_batch(b).unwrap();
        }
        assert!(stream.iter().any(|b| b.events.iter().any(|e| matches!(e, UpdateEvent::EdgeRemove { .. }))));
    }
}
