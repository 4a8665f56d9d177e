#![allow(dead_code)]

use std::collections::BTreeSet;

use igpm_core::graph::{UpdateBatch, UpdateEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Uniform random adds over `n` vertices; with `remove_prob` an event
/// removes a random live edge instead.
pub fn random_stream(n: u32, steps: u64, per_step: usize, remove_prob: f64, seed: u64) -> Vec<UpdateBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: BTreeSet<(u32, u32)> = BTreeSet::new();
    let mut out = Vec::new();
    for step in 1..=steps {
        let mut events = Vec::new();
        let mut used = BTreeSet::new();
        while events.len() < per_step {
            if !live.is_empty() && rng.random_bool(remove_prob) {
                let i = rng.random_range(0..live.len());
                let e = *live.iter().nth(i).unwrap();
                if used.insert(e) {
                    live.remove(&e);
                    events.push(UpdateEvent::remove(e.0, e.1));
                }
                continue;
            }
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let e = pair(a, b);
            if a == b || live.contains(&e) || !used.insert(e) {
                continue;
            }
            live.insert(e);
            events.push(UpdateEvent::add(e.0, e.1));
        }
        out.push(UpdateBatch::new(step, events));
    }
    out
}

/// Random background plus `triangles` vertex-disjoint triangles whose
/// three edges arrive on consecutive steps.
pub fn planted_stream(
    n: u32,
    steps: u64,
    per_step: usize,
    triangles: u32,
    seed: u64,
) -> (Vec<UpdateBatch>, Vec<[u32; 3]>) {
    let mut out = random_stream(n, steps, per_step, 0.0, seed);
    let mut planted = Vec::new();
    let mut live: BTreeSet<(u32, u32)> = out
        .iter()
        .flat_map(|b| b.events.iter())
        .filter_map(|e| match e {
            UpdateEvent::EdgeAdd { src, dst } => Some(pair(src.0, dst.0)),
            _ => None,
        })
        .collect();
    let spacing = (steps / (triangles as u64 + 1)).max(1);
    for t in 0..triangles {
        let v = [3 * t, 3 * t + 1, 3 * t + 2];
        let start = 1 + spacing * t as u64;
        for (i, (a, b)) in [(v[0], v[1]), (v[1], v[2]), (v[0], v[2])].into_iter().enumerate() {
            let step = (start + i as u64).min(steps) as usize;
            if live.insert(pair(a, b)) {
                out[step - 1].events.push(UpdateEvent::add(a, b));
            }
        }
        planted.push(v);
    }
    (out, planted)
}
