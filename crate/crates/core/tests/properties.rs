mod common;

use std::collections::BTreeSet;

use jtree::algorithms::{merge_redundant_clusters, MergeMode};
use jtree::incremental::build_by_edits;
use jtree::io::{parse_graph, read_trace, serialize_graph, trace_to_string};
use jtree::session::applicable;
use jtree::trace::{apply_operation, replay};
use jtree::transforms::drop_spurious;
use jtree::util::rng;
use jtree::verify::{check_cluster_graph, check_junction_tree};
use jtree::{build_initial_cluster_graph, run_preset, ClusterGraph, EditSession, PresetName};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

fn preset() -> impl Strategy<Value = PresetName> {
    prop::sample::select(PresetName::ALL.to_vec())
}

fn family_vars(g: &ClusterGraph) -> Vec<(u32, Vec<u32>)> {
    g.clusters().map(|c| (c.id.0, c.family_vars.iter().map(|v| v.0).collect())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn initial_graph_is_a_valid_cluster_graph(n in 1usize..20, extra in 0usize..30, seed in any::<u64>()) {
        let net = common::network(n.max(2), n + extra, 4, seed);
        let g = build_initial_cluster_graph(&net);
        prop_assert!(check_cluster_graph(&g).pass);
        prop_assert_eq!(g.cluster_count(), net.len());
        if net.is_polytree() {
            prop_assert!(check_junction_tree(&g).pass);
        }
    }

    #[test]
    fn polytrees_need_no_work(n in 1usize..30, seed in any::<u64>(), forest in any::<bool>()) {
        let net = common::polytree(n, seed, forest);
        let g = build_initial_cluster_graph(&net);
        prop_assert!(g.is_forest());
        prop_assert!(check_junction_tree(&g).pass);
    }

    #[test]
    fn presets_yield_junction_trees_that_replay(
        n in 2usize..16, arcs in 0usize..32, seed in any::<u64>(), p in preset(), run_seed in 0u64..1000,
    ) {
        prop_assume!(!p.is_incremental());
        let net = common::network(n, arcs, 3, seed);
        let start = build_initial_cluster_graph(&net);
        let mut g = start.clone();
        let report = run_preset(&mut g, &p.preset(), run_seed).unwrap();
        prop_assert!(check_junction_tree(&g).pass);
        prop_assert_eq!(report.cost, g.cost());
        prop_assert!(report.cost <= report.initial_cost || !start.is_forest());
        let events = &g.trace()[start.trace().len()..];
        let delta: i128 = events.iter().map(|e| e.cost_delta).sum();
        prop_assert_eq!(delta, g.cost() as i128 - start.cost() as i128);
        let again = replay(start, events).unwrap();
        prop_assert_eq!(&again, &g);
    }

    #[test]
    fn random_transform_walks_keep_the_invariants(n in 3usize..10, arcs in 2usize..18, seed in any::<u64>()) {
        let net = common::network(n, arcs, 3, seed);
        let mut g = build_initial_cluster_graph(&net);
        let mut r = rng(seed);
        for _ in 0..25 {
            let cands = applicable(&g);
            let Some(c) = cands.choose(&mut r) else { break };
            let before = g.cost();
            apply_operation(&mut g, &c.op).unwrap();
            let report = check_cluster_graph(&g);
            prop_assert!(report.pass, "{:?} after {:?}", report.witnesses, c.op);
            let recorded = g.trace().last().unwrap().cost_delta;
            prop_assert_eq!(recorded, g.cost() as i128 - before as i128);
            prop_assert_eq!(c.cost_delta.parse::<i128>().unwrap(), recorded);
        }
    }

    #[test]
    fn drop_spurious_is_idempotent_and_spares_families(n in 3usize..12, arcs in 2usize..20, seed in any::<u64>()) {
        let net = common::network(n, arcs, 3, seed);
        let mut g = build_initial_cluster_graph(&net);
        run_preset(&mut g, &PresetName::D.preset(), seed % 97).unwrap();
        let families = family_vars(&g);
        drop_spurious(&mut g, None);
        prop_assert_eq!(family_vars(&g), families);
        let once = serialize_graph(&g);
        prop_assert_eq!(drop_spurious(&mut g, None), 0);
        prop_assert_eq!(serialize_graph(&g), once);
    }

    #[test]
    fn post_merge_never_raises_cost(n in 3usize..14, arcs in 2usize..26, seed in any::<u64>()) {
        let net = common::network(n, arcs, 4, seed);
        let mut g = build_initial_cluster_graph(&net);
        run_preset(&mut g, &PresetName::ID.preset(), seed % 31).unwrap();
        let before = g.cost();
        merge_redundant_clusters(&mut g, MergeMode::Post).unwrap();
        prop_assert!(g.cost() <= before);
        prop_assert!(check_junction_tree(&g).pass);
    }

    #[test]
    fn graph_files_and_traces_round_trip(n in 2usize..12, arcs in 0usize..20, seed in any::<u64>()) {
        let net = common::network(n, arcs, 4, seed);
        let mut g = build_by_edits(&net).unwrap();
        run_preset(&mut g, &PresetName::E.preset(), seed % 13).unwrap();
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        prop_assert_eq!(serialize_graph(&back), text.clone());
        prop_assert_eq!(back.cost(), g.cost());
        let events = read_trace(trace_to_string(g.trace()).as_bytes()).unwrap();
        prop_assert_eq!(events.as_slice(), g.trace());
        let replayed = replay(ClusterGraph::empty(Default::default()), &events).unwrap();
        prop_assert_eq!(serialize_graph(&replayed), text);
    }

    #[test]
    fn random_edits_then_restore(n in 3usize..10, arcs in 2usize..16, seed in any::<u64>(), ie in any::<bool>()) {
        let net = common::network(n, arcs, 3, seed);
        let preset = if ie { PresetName::IE } else { PresetName::ID };
        let mut s = EditSession::new(build_initial_cluster_graph(&net), preset, seed);
        s.restore().unwrap();
        let mut r = rng(seed ^ 0x5eed);
        for step in 0..20 {
            let ids: Vec<_> = s.network().ids().collect();
            match r.random_range(0..5) {
                0 => {
                    s.add_variable(&format!("N{step}"), r.random_range(2..4)).unwrap();
                }
                1 | 2 if ids.len() >= 2 => {
                    let pair: Vec<_> = ids.choose_multiple(&mut r, 2).copied().collect();
                    // Cycles and duplicates are rejected without touching the graph.
                    let before = s.graph().clone();
                    if s.add_arc(pair[0], pair[1]).is_err() {
                        prop_assert_eq!(s.graph(), &before);
                    }
                }
                3 => {
                    let arcs = s.network().arcs();
                    if let Some(&(p, c)) = arcs.choose(&mut r) {
                        s.delete_arc(p, c).unwrap();
                    }
                }
                _ => {
                    if ids.len() > 2 {
                        s.delete_variable(*ids.choose(&mut r).unwrap()).unwrap();
                    }
                }
            }
            let report = check_cluster_graph(s.graph());
            prop_assert!(report.pass, "{:?}", report.witnesses);
            if r.random_bool(0.3) {
                s.restore().unwrap();
                prop_assert!(check_junction_tree(s.graph()).pass);
                prop_assert!(s.dirty().is_empty());
            }
        }
        s.restore().unwrap();
        prop_assert!(check_junction_tree(s.graph()).pass);
        let live: BTreeSet<_> = s.graph().cluster_ids().into_iter().collect();
        prop_assert!(s.dirty().is_subset(&live));
    }
}
