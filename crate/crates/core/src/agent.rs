//! A 2-4-4-2 Q-network that nudges the community-size threshold up or down.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Edges per vertex, possibly normalized.
    pub density: f64,
    /// Share of communities holding an updated vertex, in `[0, 1]`.
    pub affected_fraction: f64,
}

impl Observation {
    pub fn new(density: f64, affected_fraction: f64) -> Self {
        let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
        Observation { density: finite(density).max(0.0), affected_fraction: finite(affected_fraction).clamp(0.0, 1.0) }
    }

    fn input(&self) -> [f64; 2] {
        [self.density, self.affected_fraction]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Decrement = 0,
    Increment = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Decrement
        } else {
            Action::Increment
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Decrement => "decrement",
            Action::Increment => "increment",
        }
    }
}

/// `c` moved one step by `action`, clamped to `[c_min, c_max]`.
pub fn apply_action(c: usize, action: Action, c_min: usize, c_max: usize) -> usize {
    let c_max = c_max.max(c_min);
    let next = match action {
        Action::Decrement => c.saturating_sub(1),
        Action::Increment => c.saturating_add(1),
    };
    next.clamp(c_min, c_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
}

/// Fully connected 2 -> 4 -> 4 -> 2, ReLU hidden layers, linear head.
/// `wN[j][i]` weights input `i` into unit `j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub w1: [[f64; 2]; 4],
    pub b1: [f64; 4],
    pub w2: [[f64; 4]; 4],
    pub b2: [f64; 4],
    pub w3: [[f64; 4]; 2],
    pub b3: [f64; 2],
}

pub const PARAM_COUNT: usize = 8 + 4 + 16 + 4 + 8 + 2;

const SNAPSHOT_HEADER: &str = "qnet v1 2-4-4-2";

struct Activations {
    x: [f64; 2],
    h1: [f64; 4],
    h2: [f64; 4],
    q: [f64; 2],
}

fn layer<const I: usize, const O: usize>(w: &[[f64; I]; O], b: &[f64; O], x: &[f64; I], relu: bool) -> [f64; O] {
    let mut out = *b;
    for j in 0..O {
        for i in 0..I {
            out[j] += w[j][i] * x[i];
        }
        if relu && out[j] < 0.0 {
            out[j] = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("bad weight snapshot: {0}")]
    BadSnapshot(String),
}

impl QNetwork {
    pub fn zeros() -> Self {
        QNetwork::default()
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut net = QNetwork::zeros();
        let mut fill = |row: &mut [f64], fan_in: f64| {
            let bound = 1.0 / libm::sqrt(fan_in);
            for w in row {
                *w = rng.random_range(-bound..bound);
            }
        };
        for row in &mut net.w1 {
            fill(row, 2.0);
        }
        for row in &mut net.w2 {
            fill(row, 4.0);
        }
        for row in &mut net.w3 {
            fill(row, 4.0);
        }
        net
    }

    fn activations(&self, obs: &Observation) -> Activations {
        let x = obs.input();
        let h1 = layer(&self.w1, &self.b1, &x, true);
        let h2 = layer(&self.w2, &self.b2, &h1, true);
        let q = layer(&self.w3, &self.b3, &h2, false);
        Activations { x, h1, h2, q }
    }

    pub fn forward(&self, obs: &Observation) -> [f64; 2] {
        self.activations(obs).q
    }

    /// Parameters in snapshot order: w1, b1, w2, b2, w3, b3, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_COUNT);
        v.extend(self.w1.iter().flatten());
        v.extend(self.b1);
        v.extend(self.w2.iter().flatten());
        v.extend(self.b2);
        v.extend(self.w3.iter().flatten());
        v.extend(self.b3);
        v
    }

    pub fn from_flat(p: &[f64]) -> Option<Self> {
        if p.len() != PARAM_COUNT {
            return None;
        }
        let mut net = QNetwork::zeros();
        let mut it = p.iter().copied();
        for w in net.w1.iter_mut().flatten() {
            *w = it.next()?;
        }
        for b in &mut net.b1 {
            *b = it.next()?;
        }
        for w in net.w2.iter_mut().flatten() {
            *w = it.next()?;
        }
        for b in &mut net.b2 {
            *b = it.next()?;
        }
        for w in net.w3.iter_mut().flatten() {
            *w = it.next()?;
        }
        for b in &mut net.b3 {
            *b = it.next()?;
        }
        Some(net)
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    /// Text snapshot: a header line, then one line per parameter array
    /// (`w1`, `b1`, `w2`, `b2`, `w3`, `b3`) holding its name and values.
    /// Values round-trip exactly.
    pub fn to_text(&self) -> String {
        let flat = self.to_flat();
        let mut s = String::from(SNAPSHOT_HEADER);
        s.push('\n');
        let mut at = 0;
        for (name, len) in SECTIONS {
            s.push_str(name);
            for x in &flat[at..at + len] {
                let _ = write!(s, " {x:?}");
            }
            s.push('\n');
            at += len;
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, AgentError> {
        let bad = |m: &str| AgentError::BadSnapshot(m.into());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(SNAPSHOT_HEADER) {
            return Err(bad("missing or unknown header"));
        }
        let mut flat = Vec::with_capacity(PARAM_COUNT);
        for (name, len) in SECTIONS {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(AgentError::BadSnapshot(format!("expected section {name}")));
            }
            let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values = values.map_err(|_| AgentError::BadSnapshot(format!("unparsable value in {name}")))?;
            if values.len() != len {
                return Err(AgentError::BadSnapshot(format!("{name} needs {len} values, found {}", values.len())));
            }
            flat.extend(values);
        }
        if lines.next().is_some() {
            return Err(bad("trailing content"));
        }
        QNetwork::from_flat(&flat).ok_or_else(|| bad("wrong parameter count"))
    }
}

const SECTIONS: [(&str, usize); 6] = [("w1", 8), ("b1", 4), ("w2", 16), ("b2", 4), ("w3", 8), ("b3", 2)];

/// Greedy action, ties to `Decrement`.
pub fn greedy(q: [f64; 2]) -> Action {
    if q[1] > q[0] {
        Action::Increment
    } else {
        Action::Decrement
    }
}

/// Epsilon-greedy: a uniformly random action with probability `epsilon`,
/// the greedy one otherwise.
pub fn select_action<R: Rng + ?Sized>(net: &QNetwork, obs: &Observation, epsilon: f64, rng: &mut R) -> Action {
    let epsilon = epsilon.clamp(0.0, 1.0);
    if epsilon > 0.0 && rng.random_bool(epsilon) {
        return Action::from_index(rng.random_range(0..2));
    }
    greedy(net.forward(obs))
}

/// `r + gamma * max_a Q_target(next_obs, a)`.
pub fn td_target(target: &QNetwork, t: &Transition, gamma: f64) -> f64 {
    let q = target.forward(&t.next_obs);
    t.reward + gamma * q[0].max(q[1])
}

/// Mean squared TD error over `batch`.
pub fn td_loss(net: &QNetwork, target: &QNetwork, batch: &[Transition], gamma: f64) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let sum: f64 = batch
        .iter()
        .map(|t| {
            let d = net.forward(&t.obs)[t.action.index()] - td_target(target, t, gamma);
            d * d
        })
        .sum();
    sum / batch.len() as f64
}

/// Loss and its gradient with respect to `net` (the target is held fixed).
#[allow(clippy::needless_range_loop)]
pub fn td_loss_and_grad(net: &QNetwork, target: &QNetwork, batch: &[Transition], gamma: f64) -> (f64, QNetwork) {
    let mut g = QNetwork::zeros();
    if batch.is_empty() {
        return (0.0, g);
    }
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for t in batch {
        let act = net.activations(&t.obs);
        let a = t.action.index();
        let d = act.q[a] - td_target(target, t, gamma);
        loss += d * d;
        let dq = 2.0 * d / n;
        // output layer: only unit `a` carries error
        let mut dh2 = [0.0; 4];
        for i in 0..4 {
            g.w3[a][i] += dq * act.h2[i];
            dh2[i] = dq * net.w3[a][i];
        }
        g.b3[a] += dq;
        let mut dh1 = [0.0; 4];
        for j in 0..4 {
            if act.h2[j] <= 0.0 {
                continue;
            }
            g.b2[j] += dh2[j];
            for i in 0..4 {
                g.w2[j][i] += dh2[j] * act.h1[i];
                dh1[i] += dh2[j] * net.w2[j][i];
            }
        }
        for j in 0..4 {
            if act.h1[j] <= 0.0 {
                continue;
            }
            g.b1[j] += dh1[j];
            for i in 0..2 {
                g.w1[j][i] += dh1[j] * act.x[i];
            }
        }
    }
    (loss / n, g)
}

/// One SGD step on the TD loss. Gradients whose norm exceeds `clip` are
/// rescaled to it (`clip <= 0` disables). Returns the pre-step loss; on a
/// non-finite loss the network is left untouched.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[Transition],
    gamma: f64,
    lr: f64,
    clip: f64,
) -> Result<f64, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let (loss, grad) = td_loss_and_grad(net, target, batch, gamma);
    if !loss.is_finite() {
        return Err(AgentError::NonFiniteLoss(loss));
    }
    let g = grad.to_flat();
    let norm = libm::sqrt(g.iter().map(|x| x * x).sum::<f64>());
    let scale = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };
    let p: Vec<f64> = net.to_flat().iter().zip(&g).map(|(w, d)| w - lr * scale * d).collect();
    let updated = QNetwork::from_flat(&p).expect("same length");
    if !updated.is_finite() {
        return Err(AgentError::NonFiniteLoss(f64::NAN));
    }
    *net = updated;
    Ok(loss)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Optimizer steps between target-network syncs.
    pub target_sync: usize,
    pub grad_clip: f64,
    pub epsilon: f64,
    /// Divide density by its running maximum.
    pub normalize_density: bool,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.95,
            lr: 1e-3,
            replay_capacity: 512,
            batch_size: 16,
            target_sync: 32,
            grad_clip: 10.0,
            epsilon: 0.5,
            normalize_density: true,
            seed: 0,
        }
    }
}

/// Network, target network, replay memory and RNG.
#[derive(Clone, Debug)]
pub struct Agent {
    pub config: AgentConfig,
    pub net: QNetwork,
    pub target: QNetwork,
    replay: VecDeque<Transition>,
    rng: ChaCha8Rng,
    updates: usize,
    density_max: f64,
    pub last_loss: Option<f64>,
}

impl Agent {
    pub fn new(config: AgentConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = QNetwork::random(&mut rng);
        Agent::with_network(config, net, rng)
    }

    /// Starts from given weights; the RNG is still seeded from the config.
    pub fn from_network(config: AgentConfig, net: QNetwork) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Agent::with_network(config, net, rng)
    }

    fn with_network(config: AgentConfig, net: QNetwork, rng: ChaCha8Rng) -> Self {
        Agent {
            config,
            target: net.clone(),
            net,
            replay: VecDeque::with_capacity(config.replay_capacity),
            rng,
            updates: 0,
            density_max: 0.0,
            last_loss: None,
        }
    }

    /// Builds the observation fed to the network.
    pub fn observe(&mut self, raw_density: f64, affected_fraction: f64) -> Observation {
        let density = if self.config.normalize_density {
            if raw_density > self.density_max {
                self.density_max = raw_density;
            }
            if self.density_max > 0.0 {
                raw_density / self.density_max
            } else {
                0.0
            }
        } else {
            raw_density
        };
        Observation::new(density, affected_fraction)
    }

    pub fn act(&mut self, obs: &Observation) -> Action {
        select_action(&self.net, obs, self.config.epsilon, &mut self.rng)
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// Stores `t` and, once the memory holds a full batch, trains on a
    /// uniformly sampled batch. Returns the loss when a step was taken.
    pub fn remember(&mut self, t: Transition) -> Result<Option<f64>, AgentError> {
        if self.config.replay_capacity == 0 {
            return Ok(None);
        }
        if self.replay.len() == self.config.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(t);
        let b = self.config.batch_size.max(1);
        if self.replay.len() < b {
            return Ok(None);
        }
        let batch: Vec<Transition> = (0..b).map(|_| self.replay[self.rng.random_range(0..self.replay.len())]).collect();
        let loss =
            train_step(&mut self.net, &self.target, &batch, self.config.gamma, self.config.lr, self.config.grad_clip)?;
        self.updates += 1;
        if self.config.target_sync > 0 && self.updates.is_multiple_of(self.config.target_sync) {
            self.target = self.net.clone();
        }
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }
}
