//! Temporal labeled graph and the update events that drive it.
//!
//! Edges are stored directed. Matching, proximity and clustering read the
//! graph through a [`View`]: by default the undirected view, in which `u` and
//! `v` are neighbors when either `u -> v` or `v -> u` is stored.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Dense vertex identifier. Identifiers are never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

/// Vertex label. Two labels are equal iff their strings are equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(s: &str) -> Self {
        Label(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(Arc::from(s))
    }
}

/// Label given to vertices created implicitly by an edge event.
pub const DEFAULT_LABEL: &str = "V";

/// How algorithms see stored edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    #[default]
    Undirected,
    Directed,
}

/// An edge as seen through a [`View`]. Undirected edges are normalized so that
/// `0 <= 1`.
pub type ViewEdge = (VertexId, VertexId);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateEvent {
    EdgeAdd { src: VertexId, dst: VertexId },
    EdgeRemove { src: VertexId, dst: VertexId },
    VertexLabelUpdate { vertex: VertexId, label: Label },
}

impl UpdateEvent {
    pub fn add(src: u32, dst: u32) -> Self {
        UpdateEvent::EdgeAdd { src: VertexId(src), dst: VertexId(dst) }
    }

    pub fn remove(src: u32, dst: u32) -> Self {
        UpdateEvent::EdgeRemove { src: VertexId(src), dst: VertexId(dst) }
    }

    pub fn relabel(vertex: u32, label: &str) -> Self {
        UpdateEvent::VertexLabelUpdate { vertex: VertexId(vertex), label: Label::new(label) }
    }
}

/// All events that happen at one step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateBatch {
    pub step: u64,
    pub events: Vec<UpdateEvent>,
}

impl UpdateBatch {
    pub fn new(step: u64, events: Vec<UpdateEvent>) -> Self {
        UpdateBatch { step, events }
    }

    /// Vertices this batch touches, known before the batch is applied.
    pub fn touched_vertices(&self) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for ev in &self.events {
            match *ev {
                UpdateEvent::EdgeAdd { src, dst } | UpdateEvent::EdgeRemove { src, dst } => {
                    out.insert(src);
                    out.insert(dst);
                }
                UpdateEvent::VertexLabelUpdate { vertex, .. } => {
                    out.insert(vertex);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabel {
    pub vertex: VertexId,
    pub old: Label,
    pub new: Label,
}

/// What a batch did to the graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchOutcome {
    pub step: u64,
    /// Endpoints of every edge event plus relabeled vertices.
    pub touched: BTreeSet<VertexId>,
    pub created: Vec<VertexId>,
    /// `EdgeAdd` events whose directed edge was already stored.
    pub duplicate_adds: Vec<(VertexId, VertexId)>,
    /// `EdgeAdd(v, v)`: the vertex is created, the loop is not stored.
    pub ignored_self_loops: Vec<VertexId>,
    /// View edges present after the batch that were absent before it.
    pub edges_added: Vec<ViewEdge>,
    /// View edges absent after the batch that were present before it.
    pub edges_removed: Vec<ViewEdge>,
    /// Net label changes (a label set back to its original value is omitted).
    pub relabeled: Vec<Relabel>,
}

impl BatchOutcome {
    /// Per-vertex changes of the neighbor lists the view exposes.
    pub fn row_changes(&self, view: View) -> BTreeMap<VertexId, RowChange> {
        let mut rows: BTreeMap<VertexId, RowChange> = BTreeMap::new();
        for &(a, b) in &self.edges_added {
            rows.entry(a).or_default().added.push(b);
            if view == View::Undirected {
                rows.entry(b).or_default().added.push(a);
            }
        }
        for &(a, b) in &self.edges_removed {
            rows.entry(a).or_default().removed.push(b);
            if view == View::Undirected {
                rows.entry(b).or_default().removed.push(a);
            }
        }
        rows
    }

    pub fn is_structural_noop(&self) -> bool {
        self.edges_added.is_empty() && self.edges_removed.is_empty()
    }
}

/// Neighbors gained and lost by one vertex.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RowChange {
    pub added: Vec<VertexId>,
    pub removed: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("edge {src} -> {dst} does not exist")]
    MissingEdge { src: VertexId, dst: VertexId },
    #[error("batch step {got} does not follow graph step {current}")]
    StepMismatch { current: u64, got: u64 },
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex id {0} exceeds the supported range")]
    IdOverflow(u32),
}

enum Undo {
    Inserted(VertexId, VertexId),
    Deleted(VertexId, VertexId),
    Relabeled(VertexId, Label),
    Created(VertexId),
}

/// Labeled directed graph with a step counter.
#[derive(Clone, Debug)]
pub struct TemporalGraph {
    labels: Vec<Option<Label>>,
    out: Vec<BTreeSet<VertexId>>,
    inc: Vec<BTreeSet<VertexId>>,
    und: Vec<BTreeSet<VertexId>>,
    view: View,
    default_label: Label,
    interned: BTreeSet<Label>,
    step: u64,
    vertex_count: usize,
    edge_count: usize,
    undirected_edge_count: usize,
    stamp: u64,
}

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

impl Default for TemporalGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// Largest vertex id `apply_batch` accepts without remapping.
pub const MAX_VERTEX_ID: u32 = 1 << 26;

impl TemporalGraph {
    pub fn new() -> Self {
        Self::with_view(View::Undirected)
    }

    pub fn with_view(view: View) -> Self {
        let default_label = Label::new(DEFAULT_LABEL);
        let mut interned = BTreeSet::new();
        interned.insert(default_label.clone());
        TemporalGraph {
            labels: Vec::new(),
            out: Vec::new(),
            inc: Vec::new(),
            und: Vec::new(),
            view,
            default_label,
            interned,
            step: 0,
            vertex_count: 0,
            edge_count: 0,
            undirected_edge_count: 0,
            stamp: fresh_stamp(),
        }
    }

    /// Builds a step-0 graph from an undirected edge list, creating every
    /// endpoint with the default label.
    pub fn from_edges(edges: &[(u32, u32)]) -> Self {
        let mut g = Self::new();
        for &(a, b) in edges {
            g.insert_vertex(VertexId(a), None);
            g.insert_vertex(VertexId(b), None);
            if a != b {
                g.raw_insert(VertexId(a), VertexId(b));
            }
        }
        g
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn set_view(&mut self, view: View) {
        self.view = view;
        self.stamp = fresh_stamp();
    }

    /// Token that changes whenever vertices, edges or the view change.
    /// Equal stamps mean equal adjacency (clones share theirs).
    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn default_label(&self) -> &Label {
        &self.default_label
    }

    pub fn set_default_label(&mut self, label: Label) {
        self.default_label = self.intern(label);
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Stored directed edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Edges the current view exposes.
    pub fn view_edge_count(&self) -> usize {
        match self.view {
            View::Undirected => self.undirected_edge_count,
            View::Directed => self.edge_count,
        }
    }

    /// One past the largest vertex id slot.
    pub fn capacity(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.labels.get(v.index()).is_some_and(Option::is_some)
    }

    pub fn label(&self, v: VertexId) -> Option<&Label> {
        self.labels.get(v.index()).and_then(Option::as_ref)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.labels.iter().enumerate().filter(|(_, l)| l.is_some()).map(|(i, _)| VertexId(i as u32))
    }

    /// Neighbors under the current view. Empty for unknown vertices.
    pub fn neighbors(&self, v: VertexId) -> &BTreeSet<VertexId> {
        static EMPTY: BTreeSet<VertexId> = BTreeSet::new();
        let rows = match self.view {
            View::Undirected => &self.und,
            View::Directed => &self.out,
        };
        rows.get(v.index()).unwrap_or(&EMPTY)
    }

    /// Vertices with an edge into `v` under the current view.
    pub fn predecessors(&self, v: VertexId) -> &BTreeSet<VertexId> {
        static EMPTY: BTreeSet<VertexId> = BTreeSet::new();
        let rows = match self.view {
            View::Undirected => &self.und,
            View::Directed => &self.inc,
        };
        rows.get(v.index()).unwrap_or(&EMPTY)
    }

    pub fn out_neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.out.get(v.index()).into_iter().flatten().copied()
    }

    pub fn degree(&self, v: VertexId) -> Result<usize, GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        Ok(self.neighbors(v).len())
    }

    /// Whether `a`-`b` is an edge of the current view.
    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.neighbors(a).contains(&b)
    }

    pub fn has_stored_edge(&self, src: VertexId, dst: VertexId) -> bool {
        self.out.get(src.index()).is_some_and(|s| s.contains(&dst))
    }

    /// Normalized key of `a`-`b` in the current view.
    pub fn view_edge(&self, a: VertexId, b: VertexId) -> ViewEdge {
        match self.view {
            View::Undirected if b < a => (b, a),
            _ => (a, b),
        }
    }

    /// All view edges in ascending order.
    pub fn view_edges(&self) -> Vec<ViewEdge> {
        let mut edges = Vec::with_capacity(self.view_edge_count());
        for v in self.vertices() {
            for &u in self.neighbors(v) {
                if self.view == View::Directed || v < u {
                    edges.push((v, u));
                }
            }
        }
        edges
    }

    /// Applies every event of `batch` and advances the step counter.
    ///
    /// Application is atomic: when an event fails the graph is rolled back to
    /// its state before the batch.
    pub fn apply_batch(&mut self, batch: &UpdateBatch) -> Result<BatchOutcome, GraphError> {
        if batch.step != self.step + 1 {
            return Err(GraphError::StepMismatch { current: self.step, got: batch.step });
        }
        let mut undo = Vec::new();
        let mut outcome = BatchOutcome { step: batch.step, ..BatchOutcome::default() };
        let mut edge_before: BTreeMap<ViewEdge, bool> = BTreeMap::new();
        let mut label_before: BTreeMap<VertexId, Label> = BTreeMap::new();

        for ev in &batch.events {
            if let Err(e) = self.apply_event(ev, &mut undo, &mut outcome, &mut edge_before, &mut label_before) {
                self.rollback(undo);
                return Err(e);
            }
        }

        for (e, was) in edge_before {
            let now = self.has_edge(e.0, e.1);
            match (was, now) {
                (false, true) => outcome.edges_added.push(e),
                (true, false) => outcome.edges_removed.push(e),
                _ => {}
            }
        }
        for (v, old) in label_before {
            let new = self.labels[v.index()].clone().expect("relabeled vertex exists");
            if new != old {
                outcome.relabeled.push(Relabel { vertex: v, old, new });
            }
        }
        self.step = batch.step;
        Ok(outcome)
    }

    fn apply_event(
        &mut self,
        ev: &UpdateEvent,
        undo: &mut Vec<Undo>,
        outcome: &mut BatchOutcome,
        edge_before: &mut BTreeMap<ViewEdge, bool>,
        label_before: &mut BTreeMap<VertexId, Label>,
    ) -> Result<(), GraphError> {
        match ev {
            &UpdateEvent::EdgeAdd { src, dst } => {
                for v in [src, dst] {
                    if v.0 > MAX_VERTEX_ID {
                        return Err(GraphError::IdOverflow(v.0));
                    }
                    if !self.contains(v) {
                        self.insert_vertex(v, None);
                        undo.push(Undo::Created(v));
                        outcome.created.push(v);
                    }
                }
                outcome.touched.insert(src);
                outcome.touched.insert(dst);
                if src == dst {
                    outcome.ignored_self_loops.push(src);
                    return Ok(());
                }
                if self.has_stored_edge(src, dst) {
                    outcome.duplicate_adds.push((src, dst));
                    return Ok(());
                }
                let key = self.view_edge(src, dst);
                let present = self.has_edge(src, dst);
                edge_before.entry(key).or_insert(present);
                self.raw_insert(src, dst);
                undo.push(Undo::Inserted(src, dst));
            }
            &UpdateEvent::EdgeRemove { src, dst } => {
                let (s, d) = if self.has_stored_edge(src, dst) {
                    (src, dst)
                } else if self.view == View::Undirected && self.has_stored_edge(dst, src) {
                    (dst, src)
                } else {
                    return Err(GraphError::MissingEdge { src, dst });
                };
                outcome.touched.insert(src);
                outcome.touched.insert(dst);
                let key = self.view_edge(s, d);
                edge_before.entry(key).or_insert(true);
                self.raw_delete(s, d);
                undo.push(Undo::Deleted(s, d));
            }
            UpdateEvent::VertexLabelUpdate { vertex, label } => {
                let v = *vertex;
                if v.0 > MAX_VERTEX_ID {
                    return Err(GraphError::IdOverflow(v.0));
                }
                if !self.contains(v) {
                    self.insert_vertex(v, None);
                    undo.push(Undo::Created(v));
                    outcome.created.push(v);
                }
                let label = self.intern(label.clone());
                let old = self.labels[v.index()].replace(label).expect("vertex exists");
                label_before.entry(v).or_insert_with(|| old.clone());
                undo.push(Undo::Relabeled(v, old));
                outcome.touched.insert(v);
            }
        }
        Ok(())
    }

    fn rollback(&mut self, undo: Vec<Undo>) {
        for u in undo.into_iter().rev() {
            match u {
                Undo::Inserted(a, b) => self.raw_delete(a, b),
                Undo::Deleted(a, b) => self.raw_insert(a, b),
                Undo::Relabeled(v, old) => self.labels[v.index()] = Some(old),
                Undo::Created(v) => {
                    self.labels[v.index()] = None;
                    self.vertex_count -= 1;
                }
            }
        }
    }

    fn intern(&mut self, label: Label) -> Label {
        if let Some(existing) = self.interned.get(&label) {
            return existing.clone();
        }
        self.interned.insert(label.clone());
        label
    }

    /// Creates `v` if absent. Returns whether it was created.
    pub fn insert_vertex(&mut self, v: VertexId, label: Option<Label>) -> bool {
        let i = v.index();
        if i >= self.labels.len() {
            self.stamp = fresh_stamp();
            self.labels.resize(i + 1, None);
            self.out.resize_with(i + 1, BTreeSet::new);
            self.inc.resize_with(i + 1, BTreeSet::new);
            self.und.resize_with(i + 1, BTreeSet::new);
        }
        if self.labels[i].is_some() {
            return false;
        }
        let label = match label {
            Some(l) => self.intern(l),
            None => self.default_label.clone(),
        };
        self.labels[i] = Some(label);
        self.vertex_count += 1;
        self.stamp = fresh_stamp();
        true
    }

    fn raw_insert(&mut self, a: VertexId, b: VertexId) {
        if !self.out[a.index()].insert(b) {
            return;
        }
        self.inc[b.index()].insert(a);
        self.edge_count += 1;
        self.stamp = fresh_stamp();
        if self.und[a.index()].insert(b) {
            self.und[b.index()].insert(a);
            self.undirected_edge_count += 1;
        }
    }

    fn raw_delete(&mut self, a: VertexId, b: VertexId) {
        if !self.out[a.index()].remove(&b) {
            return;
        }
        self.inc[b.index()].remove(&a);
        self.edge_count -= 1;
        self.stamp = fresh_stamp();
        if !self.out[b.index()].contains(&a) {
            self.und[a.index()].remove(&b);
            self.und[b.index()].remove(&a);
            self.undirected_edge_count -= 1;
        }
    }

    /// Subgraph induced by `keep`, with the same ids, labels and view.
    pub fn induced(&self, keep: &BTreeSet<VertexId>) -> TemporalGraph {
        let mut g = TemporalGraph::with_view(self.view);
        g.default_label = self.default_label.clone();
        for &v in keep {
            if let Some(l) = self.label(v) {
                g.insert_vertex(v, Some(l.clone()));
            }
        }
        for &v in keep {
            for u in self.out_neighbors(v) {
                if keep.contains(&u) {
                    g.raw_insert(v, u);
                }
            }
        }
        g.step = self.step;
        g
    }

    /// Adjacency fingerprint used to compare graph states exactly.
    pub fn adjacency_snapshot(&self) -> Vec<(VertexId, Label, Vec<VertexId>)> {
        self.vertices()
            .map(|v| (v, self.label(v).cloned().expect("present"), self.out_neighbors(v).collect()))
            .collect()
    }
}
