//! Random walk with restart (RWR) proximity.
//!
//! A proximity vector `r` from source `s` is the fixed point of
//! `r = c * e_s + (1 - c) * P^T r`, where `P` is the row-normalized adjacency
//! of the graph view and `c` the restart probability. Dangling vertices send
//! their mass back to the source, so `r` sums to one on the source's
//! component.
//!
//! Cached vectors are kept together with their residual
//! `c * e_s + (1 - c) * P^T p - p`. A graph update changes `P` only on the
//! rows of its endpoints, so the residual can be corrected locally and the
//! estimate repaired with signed forward pushes instead of a fresh solve.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{BatchOutcome, TemporalGraph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RwrParams {
    /// Restart probability `c`.
    pub restart_prob: f64,
    /// L1 change between power iterations at which a batch solve stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual magnitude below which a vertex is not pushed.
    pub push_tol: f64,
    /// Bound on the L1 error of a repaired vector. Pushing continues with a
    /// finer threshold until `||residual||_1 <= restart_prob * repair_error`.
    pub repair_error: f64,
}

impl Default for RwrParams {
    fn default() -> Self {
        RwrParams { restart_prob: 0.15, tol: 1e-6, max_iter: 200, push_tol: 1e-5, repair_error: 2e-5 }
    }
}

impl RwrParams {
    pub fn validate(&self) -> Result<(), ProximityError> {
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return Err(ProximityError::InvalidParameter("restart_prob must lie in (0, 1)"));
        }
        if [self.tol, self.push_tol, self.repair_error]
            .iter()
            .any(|x| x.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater))
        {
            return Err(ProximityError::InvalidParameter("tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(ProximityError::InvalidParameter("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProximityError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Proximity scores from one source, indexed by vertex slot. Vertices the
/// source cannot reach score zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityVector {
    pub source: VertexId,
    pub scores: Vec<f64>,
}

impl ProximityVector {
    pub fn get(&self, v: VertexId) -> f64 {
        self.scores.get(v.index()).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Vertices with a nonzero score, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.scores.iter().enumerate().filter(|(_, &s)| s != 0.0).map(|(i, &s)| (VertexId(i as u32), s))
    }

    pub fn support(&self) -> usize {
        self.scores.iter().filter(|&&s| s != 0.0).count()
    }

    pub fn l1_distance(&self, other: &ProximityVector) -> f64 {
        let n = self.scores.len().max(other.scores.len());
        (0..n)
            .map(|i| {
                let v = VertexId(i as u32);
                (self.get(v) - other.get(v)).abs()
            })
            .sum()
    }
}

/// Vertices reachable from `source` through the view, in BFS order.
fn reachable(graph: &TemporalGraph, source: VertexId) -> Vec<VertexId> {
    let mut seen = vec![false; graph.capacity().max(source.index() + 1)];
    let mut order = vec![source];
    seen[source.index()] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &u in graph.neighbors(v) {
            if !seen[u.index()] {
                seen[u.index()] = true;
                order.push(u);
            }
        }
    }
    order
}

/// Columns solved together by [`solve_many`].
const BLOCK: usize = 32;

/// CSR rows of one connected component, vertices in ascending id order.
struct LocalSystem {
    ids: Vec<VertexId>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl LocalSystem {
    fn build(graph: &TemporalGraph, source: VertexId) -> Self {
        let mut ids = reachable(graph, source);
        ids.sort_unstable();
        let mut index = vec![usize::MAX; graph.capacity().max(source.index() + 1)];
        for (i, v) in ids.iter().enumerate() {
            index[v.index()] = i;
        }
        let mut offsets = Vec::with_capacity(ids.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for &v in &ids {
            targets.extend(graph.neighbors(v).iter().map(|u| index[u.index()]));
            offsets.push(targets.len());
        }
        LocalSystem { ids, offsets, targets }
    }

    fn local(&self, v: VertexId) -> usize {
        self.ids.binary_search(&v).expect("vertex in component")
    }

    /// `c * e_s + (1 - c) * P^T x` for every column of the row-major
    /// `n x b` block `x`, where column `j` restarts at `src[j]`.
    fn apply(&self, c: f64, src: &[usize], x: &[f64], out: &mut [f64], shares: &mut [f64]) {
        let b = src.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &s) in src.iter().enumerate() {
            out[s * b + j] = c;
        }
        for u in 0..self.ids.len() {
            let row = &self.targets[self.offsets[u]..self.offsets[u + 1]];
            let xu = &x[u * b..(u + 1) * b];
            if row.is_empty() {
                for (j, &s) in src.iter().enumerate() {
                    out[s * b + j] += (1.0 - c) * xu[j];
                }
            } else {
                let len = row.len() as f64;
                for (sh, &xj) in shares.iter_mut().zip(xu) {
                    *sh = (1.0 - c) * xj / len;
                }
                for &w in row {
                    for (o, sh) in out[w * b..(w + 1) * b].iter_mut().zip(&*shares) {
                        *o += *sh;
                    }
                }
            }
        }
    }
}

struct Solved {
    vector: ProximityVector,
    residual: Vec<f64>,
    work: u64,
}

/// Power iteration for every source in `sources`, which must lie in the
/// component `sys` describes. Each column follows exactly the arithmetic of
/// a single-source solve and stops on its own L1 change.
fn solve_block(graph: &TemporalGraph, sys: &LocalSystem, sources: &[VertexId], params: &RwrParams) -> Vec<Solved> {
    let n = sys.ids.len();
    let c = params.restart_prob;
    let per_iter = (n + sys.targets.len()) as u64;
    let slots = graph.capacity();
    let mut cols: Vec<VertexId> = sources.to_vec();
    let mut src: Vec<usize> = cols.iter().map(|&v| sys.local(v)).collect();
    let mut b = cols.len();
    let mut x = vec![0.0; n * b];
    for (j, &s) in src.iter().enumerate() {
        x[s * b + j] = 1.0;
    }
    let mut next = vec![0.0; n * b];
    let mut shares = vec![0.0; b];
    let mut delta = vec![0.0; b];
    let mut finished = vec![false; b];
    let mut iterations = 0u64;
    let mut out = Vec::with_capacity(b);
    loop {
        sys.apply(c, &src, &x, &mut next, &mut shares[..b]);
        if finished.iter().any(|&f| f) {
            // `next` holds one more application: the residual of finished columns
            let keep: Vec<usize> = (0..b).filter(|&j| !finished[j]).collect();
            for j in (0..b).filter(|&j| finished[j]) {
                let mut scores = vec![0.0; slots];
                let mut residual = vec![0.0; slots];
                for i in 0..n {
                    let v = sys.ids[i].index();
                    scores[v] = x[i * b + j];
                    residual[v] = next[i * b + j] - x[i * b + j];
                }
                out.push(Solved {
                    vector: ProximityVector { source: cols[j], scores },
                    residual,
                    work: iterations * per_iter,
                });
            }
            if keep.is_empty() {
                break;
            }
            let nb = keep.len();
            let compact = |m: &[f64]| -> Vec<f64> {
                let mut r = Vec::with_capacity(n * nb);
                for i in 0..n {
                    r.extend(keep.iter().map(|&j| m[i * b + j]));
                }
                r
            };
            x = compact(&x);
            next = compact(&next);
            cols = keep.iter().map(|&j| cols[j]).collect();
            src = keep.iter().map(|&j| src[j]).collect();
            b = nb;
            finished = vec![false; b];
        }
        delta[..b].iter_mut().for_each(|d| *d = 0.0);
        for i in 0..n {
            for (d, (a, bb)) in delta[..b].iter_mut().zip(x[i * b..(i + 1) * b].iter().zip(&next[i * b..(i + 1) * b])) {
                *d += (a - bb).abs();
            }
        }
        core::mem::swap(&mut x, &mut next);
        iterations += 1;
        for j in 0..b {
            finished[j] = delta[j] < params.tol || iterations == params.max_iter as u64;
        }
    }
    out
}

fn solve(graph: &TemporalGraph, source: VertexId, params: &RwrParams) -> Solved {
    let sys = LocalSystem::build(graph, source);
    solve_block(graph, &sys, &[source], params).pop().expect("one column")
}

/// Solves every source, grouped by component in blocks of [`BLOCK`].
fn solve_many(graph: &TemporalGraph, sources: &[VertexId], params: &RwrParams) -> Vec<Solved> {
    let mut pending: BTreeSet<VertexId> = sources.iter().copied().collect();
    let mut out = Vec::with_capacity(pending.len());
    while let Some(&first) = pending.iter().next() {
        let sys = LocalSystem::build(graph, first);
        let members: Vec<VertexId> = sys.ids.iter().copied().filter(|v| pending.contains(v)).collect();
        for chunk in members.chunks(BLOCK) {
            out.extend(solve_block(graph, &sys, chunk, params));
        }
        for v in members {
            pending.remove(&v);
        }
    }
    out
}

/// Batch RWR solve by power iteration.
pub fn rwr_batch(
    graph: &TemporalGraph,
    source: VertexId,
    params: &RwrParams,
) -> Result<ProximityVector, ProximityError> {
    params.validate()?;
    if !graph.contains(source) {
        return Err(ProximityError::UnknownVertex(source));
    }
    Ok(solve(graph, source, params).vector)
}

/// Flat adjacency of the view, rebuilt when the graph's stamp changes.
#[derive(Clone, Debug, Default)]
struct Csr {
    stamp: u64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn of(graph: &TemporalGraph) -> Self {
        let n = graph.capacity();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for i in 0..n {
            targets.extend(graph.neighbors(VertexId(i as u32)).iter().map(|w| w.0));
            offsets.push(targets.len());
        }
        Csr { stamp: graph.stamp(), offsets, targets }
    }

    fn row(&self, u: usize) -> &[u32] {
        match (self.offsets.get(u), self.offsets.get(u + 1)) {
            (Some(&a), Some(&b)) => &self.targets[a..b],
            _ => &[],
        }
    }
}

#[derive(Clone, Debug)]
struct Entry {
    vector: ProximityVector,
    residual: Vec<f64>,
    /// Residual corrected since the last settle.
    stale: bool,
    /// An edge was removed since the last settle.
    lost_edges: bool,
}

impl Entry {
    fn grow(&mut self, slots: usize) {
        if self.residual.len() < slots {
            self.residual.resize(slots, 0.0);
            self.vector.scores.resize(slots, 0.0);
        }
    }

    /// Moves `amount` from the residual at `u` into the estimate and spreads
    /// `(1 - c) * amount` over `u`'s row. Returns the row length touched.
    fn push(&mut self, csr: &Csr, c: f64, u: usize, amount: f64) -> usize {
        self.residual[u] -= amount;
        self.vector.scores[u] += amount;
        let row = csr.row(u);
        if row.is_empty() {
            self.residual[self.vector.source.index()] += (1.0 - c) * amount;
            1
        } else {
            let share = (1.0 - c) * amount / row.len() as f64;
            for &w in row {
                self.residual[w as usize] += share;
            }
            row.len()
        }
    }

    /// Drops mass stranded on vertices the source can no longer reach. Their
    /// true score is zero; only dangling rows feed back into the source.
    fn prune_unreachable(&mut self, graph: &TemporalGraph, c: f64) -> u64 {
        let mut reach = vec![false; self.residual.len()];
        for v in reachable(graph, self.vector.source) {
            reach[v.index()] = true;
        }
        let source = self.vector.source.index();
        for (u, &reached) in reach.iter().enumerate() {
            if reached {
                continue;
            }
            let p = self.vector.scores[u];
            if p != 0.0 {
                if graph.neighbors(VertexId(u as u32)).is_empty() {
                    self.residual[source] -= (1.0 - c) * p;
                }
                self.vector.scores[u] = 0.0;
            }
            self.residual[u] = 0.0;
        }
        reach.len() as u64
    }

    /// Signed forward push until the error bound holds. Returns work units.
    fn settle(&mut self, csr: &Csr, params: &RwrParams) -> u64 {
        let c = params.restart_prob;
        let budget = c * params.repair_error;
        let n = self.residual.len();
        let source = self.vector.source.index();
        let mut threshold = params.push_tol;
        let mut work = 0u64;
        let mut queued = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        loop {
            for (u, r) in self.residual.iter().enumerate() {
                if r.abs() > threshold {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
            work += n as u64;
            while let Some(u) = queue.pop_front() {
                queued[u] = false;
                let rho = self.residual[u];
                if rho.abs() <= threshold {
                    continue;
                }
                work += self.push(csr, c, u, rho) as u64 + 1;
                let row = csr.row(u);
                if row.is_empty() && self.residual[source].abs() > threshold && !queued[source] {
                    queued[source] = true;
                    queue.push_back(source);
                }
                for &w in row {
                    let w = w as usize;
                    if self.residual[w].abs() > threshold && !queued[w] {
                        queued[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            // Negative estimates are pushed back to zero so scores stay in [0, 1].
            let mut negative = false;
            for u in 0..n {
                let p = self.vector.scores[u];
                if p < 0.0 {
                    negative = true;
                    work += self.push(csr, c, u, -p) as u64;
                    self.vector.scores[u] = 0.0;
                }
            }
            let l1: f64 = self.residual.iter().map(|r| r.abs()).sum();
            work += 2 * n as u64;
            if l1 <= budget && !negative {
                break;
            }
            if !negative {
                threshold /= 4.0;
            }
        }
        self.stale = false;
        self.lost_edges = false;
        work
    }
}

/// Cache of proximity vectors, one per source that has been asked for.
///
/// Graph updates correct the cached residuals right away; the push that
/// brings a vector back within its error bound runs when it is next read.
#[derive(Clone, Debug)]
pub struct ProximityStore {
    params: RwrParams,
    entries: BTreeMap<VertexId, Entry>,
    work: u64,
    csr: Csr,
}

/// What a repair pass did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepairStats {
    /// Cached vectors whose residual was corrected.
    pub repaired: usize,
    pub evicted: usize,
    pub work: u64,
}

impl ProximityStore {
    pub fn new(params: RwrParams) -> Result<Self, ProximityError> {
        params.validate()?;
        Ok(ProximityStore { params, entries: BTreeMap::new(), work: 0, csr: Csr::default() })
    }

    pub fn params(&self) -> &RwrParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.entries.keys().copied()
    }

    /// The cached vector from `source` if it is settled.
    pub fn get(&self, source: VertexId) -> Option<&ProximityVector> {
        self.entries.get(&source).filter(|e| !e.stale).map(|e| &e.vector)
    }

    /// Whether `source` is cached with pending corrections.
    pub fn is_stale(&self, source: VertexId) -> bool {
        self.entries.get(&source).is_some_and(|e| e.stale)
    }

    /// Deterministic count of elementary operations performed so far.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn add_work(&mut self, units: u64) {
        self.work += units;
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// The vector from `source`, solving it on first use and settling
    /// pending corrections.
    pub fn vector(&mut self, graph: &TemporalGraph, source: VertexId) -> Result<&ProximityVector, ProximityError> {
        if !graph.contains(source) {
            return Err(ProximityError::UnknownVertex(source));
        }
        let params = self.params;
        if self.csr.stamp != graph.stamp() {
            self.csr = Csr::of(graph);
        }
        match self.entries.get_mut(&source) {
            Some(entry) if entry.stale => {
                entry.grow(graph.capacity());
                if entry.lost_edges {
                    self.work += entry.prune_unreachable(graph, params.restart_prob);
                }
                self.work += entry.settle(&self.csr, &params);
            }
            Some(_) => {}
            None => {
                let solved = solve(graph, source, &params);
                self.work += solved.work;
                let mut entry =
                    Entry { vector: solved.vector, residual: solved.residual, stale: true, lost_edges: false };
                self.work += entry.settle(&self.csr, &params);
                self.entries.insert(source, entry);
            }
        }
        Ok(&self.entries[&source].vector)
    }

    /// Makes the vectors of all `sources` available and settled. Missing
    /// ones are solved together, component by component; the result equals
    /// solving them one at a time.
    pub fn prefetch(&mut self, graph: &TemporalGraph, sources: &[VertexId]) -> Result<(), ProximityError> {
        if let Some(&v) = sources.iter().find(|v| !graph.contains(**v)) {
            return Err(ProximityError::UnknownVertex(v));
        }
        let missing: Vec<VertexId> = sources.iter().copied().filter(|v| !self.entries.contains_key(v)).collect();
        let params = self.params;
        if self.csr.stamp != graph.stamp() {
            self.csr = Csr::of(graph);
        }
        for solved in solve_many(graph, &missing, &params) {
            self.work += solved.work;
            let mut entry = Entry { vector: solved.vector, residual: solved.residual, stale: true, lost_edges: false };
            self.work += entry.settle(&self.csr, &params);
            self.entries.insert(entry.vector.source, entry);
        }
        for &v in sources {
            self.vector(graph, v)?;
        }
        Ok(())
    }

    /// Settles every cached vector.
    pub fn settle_all(&mut self, graph: &TemporalGraph) {
        let stale: Vec<VertexId> = self.entries.iter().filter(|(_, e)| e.stale).map(|(&s, _)| s).collect();
        for s in stale {
            let _ = self.vector(graph, s);
        }
    }

    /// `r_{source, target}`.
    pub fn score(&mut self, graph: &TemporalGraph, source: VertexId, target: VertexId) -> Result<f64, ProximityError> {
        Ok(self.vector(graph, source)?.get(target))
    }

    /// Corrects every cached residual after `outcome` was applied to
    /// `graph`.
    ///
    /// Only vectors with mass on a vertex whose row changed are affected.
    pub fn repair(&mut self, graph: &TemporalGraph, outcome: &BatchOutcome) -> RepairStats {
        let mut stats = RepairStats::default();
        let stale: Vec<VertexId> = self.entries.keys().copied().filter(|&s| !graph.contains(s)).collect();
        for s in stale {
            self.entries.remove(&s);
            stats.evicted += 1;
        }
        let rows = outcome.row_changes(graph.view());
        if rows.is_empty() {
            return stats;
        }
        // old rows are the same for every entry
        let before: Vec<(VertexId, Vec<VertexId>)> = rows
            .iter()
            .map(|(&u, change)| {
                let mut b: BTreeSet<VertexId> =
                    graph.neighbors(u).iter().copied().filter(|w| !change.added.contains(w)).collect();
                b.extend(change.removed.iter().copied());
                (u, b.into_iter().collect())
            })
            .collect();
        let c = self.params.restart_prob;
        let slots = graph.capacity();
        let lost = !outcome.edges_removed.is_empty();
        for entry in self.entries.values_mut() {
            let mut changed = false;
            for (u, before) in &before {
                let pu = entry.vector.get(*u);
                if pu == 0.0 {
                    continue;
                }
                if !changed {
                    entry.grow(slots);
                    changed = true;
                }
                let now = graph.neighbors(*u);
                let mass = (1.0 - c) * pu;
                let source = entry.vector.source.index();
                if before.is_empty() {
                    entry.residual[source] -= mass;
                } else {
                    let share = mass / before.len() as f64;
                    for w in before {
                        entry.residual[w.index()] -= share;
                    }
                }
                if now.is_empty() {
                    entry.residual[source] += mass;
                } else {
                    let share = mass / now.len() as f64;
                    for w in now {
                        entry.residual[w.index()] += share;
                    }
                }
                stats.work += (before.len() + now.len()) as u64;
            }
            if changed {
                stats.repaired += 1;
                entry.stale = true;
                entry.lost_edges |= lost;
            }
        }
        self.work += stats.work;
        stats
    }

    /// L1 norm of the cached residual for `source`; an upper bound on the
    /// vector's error is this value divided by the restart probability.
    pub fn residual_l1(&self, source: VertexId) -> Option<f64> {
        self.entries.get(&source).map(|e| e.residual.iter().map(|r| r.abs()).sum())
    }
}

/// Incremental maintenance entry point: corrects `store` for `outcome` and
/// settles every cached vector.
pub fn rwr_incremental(store: &mut ProximityStore, graph: &TemporalGraph, outcome: &BatchOutcome) -> RepairStats {
    let stats = store.repair(graph, outcome);
    store.settle_all(graph);
    stats
}
