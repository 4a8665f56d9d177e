mod common;

use igpm_core::graph::{TemporalGraph, UpdateBatch, UpdateEvent, VertexId};
use igpm_core::proximity::{rwr_batch, rwr_incremental, ProximityStore, RwrParams};
use proptest::prelude::*;

fn max_cached_error(store: &ProximityStore, g: &TemporalGraph) -> f64 {
    let params = *store.params();
    store
        .sources()
        .map(|s| store.get(s).expect("settled").l1_distance(&rwr_batch(g, s, &params).unwrap()))
        .fold(0.0, f64::max)
}

#[test]
fn twenty_step_replay_tracks_batch_solutions() {
    for seed in [1, 2, 3] {
        let stream = common::random_stream(200, 20, 15, 0.25, seed);
        let mut g = TemporalGraph::new();
        let mut store = ProximityStore::new(RwrParams::default()).unwrap();
        for batch in &stream {
            let outcome = g.apply_batch(batch).unwrap();
            rwr_incremental(&mut store, &g, &outcome);
            let sources: Vec<VertexId> = g.vertices().step_by(7).collect();
            store.prefetch(&g, &sources).unwrap();
            let err = max_cached_error(&store, &g);
            assert!(err <= 1e-4, "seed {seed} step {}: {err}", batch.step);
        }
        assert!(store.len() > 20);
    }
}

#[test]
fn cached_vectors_carry_unit_mass() {
    let g = TemporalGraph::from_edges(&[(0, 1), (1, 2), (2, 0), (3, 4)]);
    let mut store = ProximityStore::new(RwrParams::default()).unwrap();
    for v in 0..5 {
        let r = store.vector(&g, VertexId(v)).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-6);
        assert!(r.iter().all(|(_, x)| (0.0..=1.0).contains(&x)));
    }
    assert_eq!(store.vector(&g, VertexId(3)).unwrap().support(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn incremental_equals_batch_on_random_updates(
        initial in prop::collection::btree_set((0u32..15, 0u32..15), 1..40),
        flips in prop::collection::vec((0u32..15, 0u32..15), 1..15),
    ) {
        let initial: Vec<(u32, u32)> = initial.into_iter().filter(|(a, b)| a < b).collect();
        prop_assume!(!initial.is_empty());
        let mut g = TemporalGraph::new();
        g.apply_batch(&UpdateBatch::new(1, initial.iter().map(|&(a, b)| UpdateEvent::add(a, b)).collect())).unwrap();
        let mut store = ProximityStore::new(RwrParams::default()).unwrap();
        let sources: Vec<VertexId> = g.vertices().collect();
        store.prefetch(&g, &sources).unwrap();
        let mut events = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (a, b) in flips {
            let (a, b) = (a.min(b), a.max(b));
            if a == b || !seen.insert((a, b)) {
                continue;
            }
            events.push(if g.has_edge(VertexId(a), VertexId(b)) { UpdateEvent::remove(a, b) } else { UpdateEvent::add(a, b) });
        }
        let outcome = g.apply_batch(&UpdateBatch::new(2, events)).unwrap();
        rwr_incremental(&mut store, &g, &outcome);
        prop_assert!(max_cached_error(&store, &g) <= 1e-4);
    }
}
