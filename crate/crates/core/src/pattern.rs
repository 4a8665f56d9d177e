//! Query patterns.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::{Label, DEFAULT_LABEL};

/// A small labeled pattern graph. Query vertex ids are the indices of
/// `labels`; edges are undirected pairs unless matching runs on the directed
/// view.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPattern {
    pub name: String,
    pub labels: Vec<Label>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("pattern has no edges")]
    NoEdges,
    #[error("pattern is not connected")]
    Disconnected,
    #[error("edge ({0}, {1}) references an unknown query vertex")]
    UnknownVertex(usize, usize),
    #[error("self loop on query vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("unknown built-in pattern {0:?}")]
    UnknownBuiltin(String),
}

/// The built-in query shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Triangle,
    Square,
    Star5,
    K4,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [PatternKind::Triangle, PatternKind::Square, PatternKind::Star5, PatternKind::K4];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Triangle => "triangle",
            PatternKind::Square => "square",
            PatternKind::Star5 => "star5",
            PatternKind::K4 => "k4",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| PatternError::UnknownBuiltin(s.into()))
    }
}

pub fn make_pattern(kind: PatternKind) -> QueryPattern {
    let edges = match kind {
        PatternKind::Triangle => vec![(0, 1), (1, 2), (2, 0)],
        PatternKind::Square => vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        PatternKind::Star5 => vec![(0, 1), (0, 2), (0, 3), (0, 4)],
        PatternKind::K4 => vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    };
    let n = edges.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0) + 1;
    QueryPattern { name: kind.name().into(), labels: vec![Label::new(DEFAULT_LABEL); n], edges }
}

impl QueryPattern {
    pub fn new(name: &str, labels: Vec<Label>, edges: Vec<(usize, usize)>) -> Result<Self, PatternError> {
        let p = QueryPattern { name: name.into(), labels, edges };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        if self.edges.is_empty() {
            return Err(PatternError::NoEdges);
        }
        let n = self.labels.len();
        let mut seen = Vec::new();
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(PatternError::UnknownVertex(a, b));
            }
            if a == b {
                return Err(PatternError::SelfLoop(a));
            }
            let key = (a.min(b), a.max(b));
            if seen.contains(&key) {
                return Err(PatternError::DuplicateEdge(a, b));
            }
            seen.push(key);
        }
        let order = self.bfs_order(0);
        if order.len() != n {
            return Err(PatternError::Disconnected);
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Query neighbors of `q`, ascending.
    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn degree(&self, q: usize) -> usize {
        self.neighbors(q).len()
    }

    /// Query vertices in BFS order from `start`, lowest id first per level.
    pub fn bfs_order(&self, start: usize) -> Vec<usize> {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        if start < n {
            seen[start] = true;
            queue.push_back(start);
        }
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for u in self.neighbors(q) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        order
    }

    /// Query edges (as indices into `edges`) in the order they are processed
    /// when matching starts at `start`: BFS over vertices, and for each
    /// vertex its incident unprocessed edges by ascending other endpoint.
    pub fn edge_order(&self, start: usize) -> Vec<usize> {
        let mut done = vec![false; self.edges.len()];
        let mut order = Vec::with_capacity(self.edges.len());
        for q in self.bfs_order(start) {
            let mut incident: Vec<(usize, usize)> = self
                .edges
                .iter()
                .enumerate()
                .filter(|(i, &(a, b))| !done[*i] && (a == q || b == q))
                .map(|(i, &(a, b))| (if a == q { b } else { a }, i))
                .collect();
            incident.sort_unstable();
            for (_, i) in incident {
                done[i] = true;
                order.push(i);
            }
        }
        order
    }

    /// Largest BFS distance from `q` to any query vertex.
    pub fn eccentricity(&self, q: usize) -> usize {
        let n = self.labels.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[q] = 0;
        queue.push_back(q);
        while let Some(v) = queue.pop_front() {
            for u in self.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist.into_iter().filter(|&d| d != usize::MAX).max().unwrap_or(0)
    }

    /// Query vertex ids whose label equals `label`, ascending.
    pub fn vertices_with_label<'a>(&'a self, label: &'a Label) -> impl Iterator<Item = usize> + 'a {
        self.labels.iter().enumerate().filter(move |(_, l)| *l == label).map(|(i, _)| i)
    }

    pub fn has_label(&self, label: &Label) -> bool {
        self.labels.contains(label)
    }
}
