//! Step orchestration for the three run modes.
//!
//! * `batch`: apply the step, then match from scratch over every vertex.
//! * `naive`: repair proximity and stored results, then expand from the
//!   recompute set: all members of communities (recursive Louvain, fixed
//!   maximum size `c`) that the next step's updates touch.
//! * `adaptive`: as `naive`, with `c` moved by the Q-network agent after
//!   every step, rewarded by the inverse of the matching time.
//!
//! Clustering at the end of step `s` serves the updates of step `s + 1`,
//! whose touched set is read ahead from the stream. The first step uses its
//! raw touched set.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{apply_action, Action, Agent, AgentConfig, AgentError, Observation, QNetwork, Transition};
use crate::clustering::{
    affected_fraction, recompute_set_from_communities, recursive_louvain_with, CommunityAssignment, LouvainConfig,
};
use crate::graph::{GraphError, TemporalGraph, UpdateBatch, VertexId, View};
use crate::igpm::{batch_rematch, igpm_step, repair_all, MatchIndex};
use crate::matcher::{MatchConfig, MatchError};
use crate::pattern::QueryPattern;
use crate::proximity::{ProximityError, ProximityStore, RwrParams};

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Batch,
    Naive,
    #[default]
    Adaptive,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Batch, Mode::Naive, Mode::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Batch => "batch",
            Mode::Naive => "naive",
            Mode::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| alloc::format!("unknown mode {s:?}"))
    }
}

/// Time source for the agent's reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardClock {
    /// Deterministic work units, one nanosecond each.
    #[default]
    Work,
    /// The run's [`Clock`].
    Wall,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    /// `1 / t`.
    #[default]
    InverseTime,
    /// `1 / t + weight * (sum of similarities of the step's new results)`.
    Composite { weight: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PemConfig {
    pub mode: Mode,
    pub initial_c: usize,
    /// Steps to run; 0 runs the whole stream.
    pub total_steps: usize,
    pub epsilon: f64,
    pub k: usize,
    pub seed: u64,
    pub max_hops: usize,
    pub allow_partial: bool,
    pub exact_budget: usize,
    pub rwr: RwrParams,
    /// Learning settings; its `epsilon` and `seed` are taken from this
    /// config.
    pub agent: AgentConfig,
    pub reward_clock: RewardClock,
    pub reward: RewardKind,
    pub reward_cap: f64,
    pub c_min: usize,
    /// Upper bound for `c`; `None` means the current vertex count.
    pub c_max: Option<usize>,
    /// Start each clustering from the previous partition.
    pub reuse_partition: bool,
    /// Cluster after the step's batch is applied, using its own touched set,
    /// instead of reading the next batch ahead.
    pub online_clustering: bool,
    pub tombstones: bool,
    pub view: View,
    /// Starting weights for the agent; random from `seed` when absent.
    pub initial_weights: Option<QNetwork>,
}

impl Default for PemConfig {
    fn default() -> Self {
        PemConfig {
            mode: Mode::Adaptive,
            initial_c: 10,
            total_steps: 0,
            epsilon: 0.5,
            k: 10,
            seed: 0,
            max_hops: 3,
            allow_partial: false,
            exact_budget: MatchConfig::default().exact_budget,
            rwr: RwrParams::default(),
            agent: AgentConfig::default(),
            reward_clock: RewardClock::Work,
            reward: RewardKind::InverseTime,
            reward_cap: 1e6,
            c_min: 2,
            c_max: None,
            reuse_partition: false,
            online_clustering: false,
            tombstones: false,
            view: View::Undirected,
            initial_weights: None,
        }
    }
}

impl PemConfig {
    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            max_hops: self.max_hops,
            k: self.k,
            allow_partial: self.allow_partial,
            exact_budget: self.exact_budget,
        }
    }

    pub fn validate(&self) -> Result<(), PemError> {
        if self.k == 0 {
            return Err(PemError::InvalidConfig("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(PemError::InvalidConfig("epsilon must lie in [0, 1]"));
        }
        if self.c_min == 0 || self.initial_c < self.c_min {
            return Err(PemError::InvalidConfig("need 1 <= c_min <= initial_c"));
        }
        if self.max_hops == 0 {
            return Err(PemError::InvalidConfig("max_hops must be at least 1"));
        }
        if self.reward_cap.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(PemError::InvalidConfig("reward_cap must be positive"));
        }
        self.rwr.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PemError {
    #[error("stream has no batches")]
    EmptyStream,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("window {from}..={to} is outside 1..={len}")]
    Window { from: usize, to: usize, len: usize },
}

/// Monotonic nanosecond time source.
pub trait Clock {
    fn now_ns(&mut self) -> u64;
}

/// A clock that never advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ns(&mut self) -> u64 {
        0
    }
}

/// One row of a run trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub mode: Mode,
    /// Community-size threshold in force after the step (0 in batch mode).
    pub c: usize,
    pub elapsed_ns: u64,
    pub recomputed: usize,
    pub new_patterns: usize,
    pub invalidated_patterns: usize,
    pub total_patterns: usize,
    pub exact_patterns: usize,
    pub reward: f64,
    pub action: Option<Action>,
    pub observation: Observation,
    /// Work units of the matching phase (fresh-store work in batch mode).
    pub work: u64,
    pub loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub version: u32,
    pub mode: Mode,
    pub pattern: String,
    pub rows: Vec<StepRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn c_values(&self) -> BTreeSet<usize> {
        self.rows.iter().map(|r| r.c).collect()
    }
}

/// What an observer sees after each step.
pub struct StepView<'a> {
    pub graph: &'a TemporalGraph,
    pub index: &'a MatchIndex,
    pub recompute_set: &'a BTreeSet<VertexId>,
    pub record: &'a StepRecord,
    pub assignment: Option<&'a CommunityAssignment>,
}

/// Density divided by its running maximum, or raw.
#[derive(Clone, Copy, Debug, Default)]
struct DensityScale {
    max: f64,
}

impl DensityScale {
    fn apply(&mut self, raw: f64, normalize: bool) -> f64 {
        if !normalize {
            return raw;
        }
        self.max = self.max.max(raw);
        if self.max > 0.0 {
            raw / self.max
        } else {
            0.0
        }
    }
}

fn density(graph: &TemporalGraph) -> f64 {
    if graph.vertex_count() == 0 {
        0.0
    } else {
        graph.view_edge_count() as f64 / graph.vertex_count() as f64
    }
}

fn reward_for(config: &PemConfig, seconds: f64, similarity: f64) -> f64 {
    let base = if seconds > 0.0 { (1.0 / seconds).min(config.reward_cap) } else { config.reward_cap };
    match config.reward {
        RewardKind::InverseTime => base,
        RewardKind::Composite { weight } => base + weight * similarity,
    }
}

/// Everything a run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    /// Final agent weights (adaptive mode).
    pub network: Option<QNetwork>,
    /// Last clustering (incremental modes).
    pub assignment: Option<CommunityAssignment>,
    pub graph: TemporalGraph,
    pub index: MatchIndex,
}

/// Runs `config.mode` over `stream`, calling `observer` after every step.
pub fn run<C: Clock, F: FnMut(&StepView<'_>)>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
    observer: F,
) -> Result<RunTrace, PemError> {
    run_full(stream, pattern, config, clock, observer).map(|o| o.trace)
}

pub fn run_full<C: Clock, F: FnMut(&StepView<'_>)>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
    observer: F,
) -> Result<RunOutcome, PemError> {
    config.validate()?;
    pattern.validate().map_err(MatchError::from)?;
    if stream.is_empty() {
        return Err(PemError::EmptyStream);
    }
    let steps = if config.total_steps == 0 { stream.len() } else { config.total_steps.min(stream.len()) };
    let stream = &stream[..steps];
    match config.mode {
        Mode::Batch => run_batch_inner(stream, pattern, config, clock, observer),
        Mode::Naive | Mode::Adaptive => run_incremental(stream, pattern, config, clock, observer),
    }
}

pub fn run_batch<C: Clock>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
) -> Result<RunTrace, PemError> {
    let config = PemConfig { mode: Mode::Batch, ..config.clone() };
    run(stream, pattern, &config, clock, |_| {})
}

pub fn run_naive<C: Clock>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
) -> Result<RunTrace, PemError> {
    let config = PemConfig { mode: Mode::Naive, ..config.clone() };
    run(stream, pattern, &config, clock, |_| {})
}

pub fn run_adaptive<C: Clock>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
) -> Result<RunTrace, PemError> {
    let config = PemConfig { mode: Mode::Adaptive, ..config.clone() };
    run(stream, pattern, &config, clock, |_| {})
}

fn new_index(config: &PemConfig) -> MatchIndex {
    let index = MatchIndex::new(config.view);
    if config.tombstones {
        index.with_tombstones()
    } else {
        index
    }
}

fn run_batch_inner<C: Clock, F: FnMut(&StepView<'_>)>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
    mut observer: F,
) -> Result<RunOutcome, PemError> {
    let mut graph = TemporalGraph::with_view(config.view);
    let mut index = new_index(config);
    let mut scale = DensityScale::default();
    let cfg = config.match_config();
    let mut rows = Vec::with_capacity(stream.len());
    for batch in stream {
        let t0 = clock.now_ns();
        graph.apply_batch(batch)?;
        let (results, work) = batch_rematch(&graph, pattern, &config.rwr, &cfg)?;
        let invalidated = index.clear();
        let mut new_patterns = 0;
        let mut similarity = 0.0;
        for r in results {
            similarity += r.similarity();
            if index.insert(pattern, r).is_some() {
                new_patterns += 1;
            }
        }
        let elapsed = clock.now_ns().saturating_sub(t0);
        let seconds = match config.reward_clock {
            RewardClock::Work => work as f64 * 1e-9,
            RewardClock::Wall => elapsed as f64 * 1e-9,
        };
        let all: BTreeSet<VertexId> = graph.vertices().collect();
        let observation = Observation::new(scale.apply(density(&graph), config.agent.normalize_density), 1.0);
        let record = StepRecord {
            step: batch.step,
            mode: Mode::Batch,
            c: 0,
            elapsed_ns: elapsed,
            recomputed: graph.vertex_count(),
            new_patterns,
            invalidated_patterns: invalidated,
            total_patterns: index.len(),
            exact_patterns: index.exact_count(),
            reward: reward_for(config, seconds, similarity),
            action: None,
            observation,
            work,
            loss: None,
        };
        observer(&StepView { graph: &graph, index: &index, recompute_set: &all, record: &record, assignment: None });
        rows.push(record);
    }
    let trace = RunTrace { version: TRACE_VERSION, mode: Mode::Batch, pattern: pattern.name.clone(), rows };
    Ok(RunOutcome { trace, network: None, assignment: None, graph, index })
}

fn run_incremental<C: Clock, F: FnMut(&StepView<'_>)>(
    stream: &[UpdateBatch],
    pattern: &QueryPattern,
    config: &PemConfig,
    clock: &mut C,
    mut observer: F,
) -> Result<RunOutcome, PemError> {
    let adaptive = config.mode == Mode::Adaptive;
    let mut graph = TemporalGraph::with_view(config.view);
    let mut store = ProximityStore::new(config.rwr)?;
    let mut index = new_index(config);
    let cfg = config.match_config();
    let louvain_cfg = LouvainConfig::default();
    let mut agent = adaptive.then(|| {
        let agent_cfg = AgentConfig { epsilon: config.epsilon, seed: config.seed, ..config.agent };
        match &config.initial_weights {
            Some(net) => Agent::from_network(agent_cfg, net.clone()),
            None => Agent::new(agent_cfg),
        }
    });
    let mut scale = DensityScale::default();
    let mut c = config.initial_c;
    let mut assignment: Option<CommunityAssignment> = None;
    let mut planned: Option<BTreeSet<VertexId>> = None;
    let mut prev: Option<(Observation, Action)> = None;
    let mut rows = Vec::with_capacity(stream.len());

    for (s, batch) in stream.iter().enumerate() {
        let t0 = clock.now_ns();
        let w0 = store.work();
        let outcome = graph.apply_batch(batch)?;
        store.repair(&graph, &outcome);
        let report = repair_all(&graph, &mut store, &mut index, pattern, &outcome, &cfg)?;

        let affected_from = assignment.as_ref();
        let affected = affected_from.map_or(0.0, |a| affected_fraction(a, &outcome.touched));
        let recompute = if config.online_clustering && s > 0 {
            let a = cluster(&graph, c, config, &louvain_cfg, assignment.as_ref());
            let set = recompute_set_from_communities(&a, &outcome.touched);
            assignment = Some(a);
            set
        } else {
            planned.take().unwrap_or_else(|| outcome.touched.clone())
        };

        let stats = igpm_step(&graph, &mut store, &mut index, pattern, &recompute, &cfg)?;
        let work = store.work() - w0;
        let match_ns = clock.now_ns().saturating_sub(t0);
        let similarity: f64 = stats.new_ids.iter().filter_map(|id| index.get(*id)).map(|r| r.similarity()).sum();
        let seconds = match config.reward_clock {
            RewardClock::Work => work as f64 * 1e-9,
            RewardClock::Wall => match_ns as f64 * 1e-9,
        };
        let reward = reward_for(config, seconds, similarity);

        let mut action = None;
        let mut loss = None;
        let observation = match agent.as_mut() {
            Some(agent) => {
                let obs = agent.observe(density(&graph), affected);
                if let Some((prev_obs, prev_action)) = prev {
                    loss = agent.remember(Transition { obs: prev_obs, action: prev_action, reward, next_obs: obs })?;
                }
                let a = agent.act(&obs);
                let c_max = config.c_max.unwrap_or(graph.vertex_count());
                c = apply_action(c, a, config.c_min, c_max);
                prev = Some((obs, a));
                action = Some(a);
                obs
            }
            None => Observation::new(scale.apply(density(&graph), config.agent.normalize_density), affected),
        };

        if !config.online_clustering {
            if let Some(next) = stream.get(s + 1) {
                let a = cluster(&graph, c, config, &louvain_cfg, assignment.as_ref());
                planned = Some(recompute_set_from_communities(&a, &next.touched_vertices()));
                assignment = Some(a);
            }
        }
        let elapsed = clock.now_ns().saturating_sub(t0);

        let record = StepRecord {
            step: batch.step,
            mode: config.mode,
            c,
            elapsed_ns: elapsed,
            recomputed: stats.recomputed,
            new_patterns: stats.new_patterns,
            invalidated_patterns: report.invalidated.len(),
            total_patterns: index.len(),
            exact_patterns: index.exact_count(),
            reward,
            action,
            observation,
            work,
            loss,
        };
        observer(&StepView {
            graph: &graph,
            index: &index,
            recompute_set: &recompute,
            record: &record,
            assignment: assignment.as_ref(),
        });
        rows.push(record);
    }
    let trace = RunTrace { version: TRACE_VERSION, mode: config.mode, pattern: pattern.name.clone(), rows };
    Ok(RunOutcome { trace, network: agent.map(|a| a.net), assignment, graph, index })
}

fn cluster(
    graph: &TemporalGraph,
    c: usize,
    config: &PemConfig,
    louvain: &LouvainConfig,
    previous: Option<&CommunityAssignment>,
) -> CommunityAssignment {
    let start = if config.reuse_partition { previous } else { None };
    recursive_louvain_with(graph, c, louvain, start)
}

/// Totals over rows `from..=to` of a trace (1-based, inclusive).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub from: usize,
    pub to: usize,
    pub steps: usize,
    pub elapsed_ns: u64,
    pub recomputed: usize,
    pub new_patterns: usize,
    pub invalidated_patterns: usize,
    pub work: u64,
    pub reward: f64,
    /// Pattern counts at the end of the window.
    pub total_patterns: usize,
    pub exact_patterns: usize,
}

pub fn measure_window(trace: &RunTrace, from: usize, to: usize) -> Result<WindowSummary, PemError> {
    if from == 0 || from > to || to > trace.rows.len() {
        return Err(PemError::Window { from, to, len: trace.rows.len() });
    }
    let rows = &trace.rows[from - 1..to];
    let last = rows.last().expect("non-empty window");
    Ok(WindowSummary {
        from,
        to,
        steps: rows.len(),
        elapsed_ns: rows.iter().map(|r| r.elapsed_ns).sum(),
        recomputed: rows.iter().map(|r| r.recomputed).sum(),
        new_patterns: rows.iter().map(|r| r.new_patterns).sum(),
        invalidated_patterns: rows.iter().map(|r| r.invalidated_patterns).sum(),
        work: rows.iter().map(|r| r.work).sum(),
        reward: rows.iter().map(|r| r.reward).sum(),
        total_patterns: last.total_patterns,
        exact_patterns: last.exact_patterns,
    })
}
