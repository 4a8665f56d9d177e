use std::collections::BTreeSet;

use igpm_core::graph::{TemporalGraph, UpdateEvent, VertexId};
use igpm_tools::generate::{generate, inject_churn, ChurnConfig, Model, Workload};
use igpm_tools::ingest::{parse_edge_stream, Granularity};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = Model> {
    prop_oneof![
        (10u32..60, 2u32..12, 1u32..5).prop_map(|(n, steps, edges_per_step)| Model::ErdosRenyi {
            n,
            steps,
            edges_per_step
        }),
        (10u32..60, 2u32..12, 1u32..5, 1u32..4)
            .prop_map(|(n, steps, edges_per_step, m)| Model::PreferentialAttachment { n, steps, edges_per_step, m }),
        (12u32..60, 2u32..12, 1u32..4, 1u32..4).prop_map(|(n, steps, edges_per_step, triangles)| {
            Model::PlantedPatterns { n, steps, edges_per_step, triangles }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_streams_replay_cleanly(model in model(), seed in 0u64..1000) {
        let w = Workload { name: "p".into(), seed, model };
        let g = generate(&w).unwrap();
        prop_assert_eq!(&generate(&w).unwrap(), &g);
        let pairs: BTreeSet<(u32, u32)> = g.edges.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect();
        prop_assert_eq!(pairs.len(), g.edges.len());
        prop_assert!(g.edges.iter().all(|&(a, b, _)| a != b));
        prop_assert!(g.edges.windows(2).all(|w| w[0].2 <= w[1].2));
        let mut graph = TemporalGraph::new();
        for b in g.to_batches() {
            let out = graph.apply_batch(&b).unwrap();
            prop_assert!(out.duplicate_adds.is_empty());
        }
        if let Some(truth) = &g.ground_truth {
            for t in &truth.triangles {
                let [a, b, c] = t.vertices.map(VertexId);
                prop_assert!(graph.has_edge(a, b) && graph.has_edge(b, c) && graph.has_edge(a, c));
            }
        }
    }

    #[test]
    fn edge_list_file_round_trips(model in model(), seed in 0u64..1000) {
        let g = generate(&Workload { name: "p".into(), seed, model }).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let s = parse_edge_stream(buf.as_slice(), Granularity::Raw).unwrap();
        prop_assert_eq!(s.edge_events, g.edges.len());
        prop_assert_eq!(s.steps(), g.to_batches().len());
    }

    #[test]
    fn churn_only_removes_live_edges(seed in 0u64..500, remove_prob in 0.0f64..1.0) {
        let g = generate(&Workload { name: "c".into(), seed, model: Model::ErdosRenyi { n: 30, steps: 15, edges_per_step: 3 } }).unwrap();
        let churn = ChurnConfig { remove_prob, relabel_prob: 0.3, labels: vec!["A".into(), "B".into()], seed };
        let stream = inject_churn(&g.to_batches(), &churn);
        let mut graph = TemporalGraph::new();
        for b in &stream {
            prop_assert!(graph.apply_batch(b).is_ok());
        }
        let labels_ok = stream.iter().flat_map(|b| &b.events).all(|e| match e {
            UpdateEvent::VertexLabelUpdate { label, .. } => ["A", "B"].contains(&label.as_str()),
            _ => true,
        });
        prop_assert!(labels_ok);
    }
}

#[test]
fn preferential_attachment_base_fills_step_one() {
    let g = generate(&Workload {
        name: "pa".into(),
        seed: 1,
        model: Model::PreferentialAttachment { n: 200, steps: 10, edges_per_step: 5, m: 3 },
    })
    .unwrap();
    let batches = g.to_batches();
    // (m + 1)-clique, then m edges for each of the remaining n - m - 1 vertices
    assert_eq!(batches[0].events.len(), 6 + 3 * 196);
    assert!(batches[1..].iter().all(|b| b.events.len() == 5));
}

#[test]
fn invalid_workloads_are_rejected() {
    for model in [
        Model::ErdosRenyi { n: 4, steps: 10, edges_per_step: 5 },
        Model::PreferentialAttachment { n: 3, steps: 2, edges_per_step: 1, m: 3 },
        Model::PlantedPatterns { n: 5, steps: 10, edges_per_step: 1, triangles: 2 },
    ] {
        assert!(generate(&Workload { name: "bad".into(), seed: 0, model }).is_err());
    }
}
