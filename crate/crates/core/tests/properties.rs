//! Cross-module invariants on randomized inputs: ending closure, memo
//! structure, pruning monotonicity, baseline dominance, determinism, width
//! certificates, and fixture consistency.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use ios_core::baseline::{
    brute_force_optimal, count_all, greedy_network, sequential_network,
};
use ios_core::cost::CostModel;
use ios_core::generators;
use ios_core::graph::Block;
use ios_core::opset::OpSet;
use ios_core::schedule::{
    dp_schedule, enumerate_endings, is_ending, network_schedule_to_json, schedule_network,
    simulate, validate_network_schedule, PruningStrategy,
};

fn analytic() -> CostModel {
    CostModel::AnalyticRoofline(generators::compute_bound_profile())
}

/// Pairwise reachability by plain BFS over the public successor sets,
/// independent of the analysis module's internals.
fn reachable(block: &Block, from: usize) -> OpSet {
    let mut seen = OpSet::EMPTY;
    let mut stack = vec![from];
    while let Some(i) = stack.pop() {
        for j in block.succs(i).iter() {
            if !seen.contains(j) {
                seen.insert(j);
                stack.push(j);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// If e1 ends s and e2 ends s - e1, then e1 ∪ e2 ends s: consecutive
    /// stages can always be fused back into one candidate ending.
    #[test]
    fn union_of_successive_endings_is_an_ending(
        n in 2usize..=12,
        tenths in 0u8..=10,
        seed in any::<u64>(),
        pick1 in any::<u16>(),
        pick2 in any::<u16>(),
    ) {
        let g = generators::random_dag(n, f64::from(tenths) / 10.0, seed);
        let block = &g.blocks[0];
        let s = block.all_ops();
        let first = enumerate_endings(block, s, PruningStrategy::unpruned());
        let (e1, _) = first[pick1 as usize % first.len()];
        let rest = s.minus(e1);
        if !rest.is_empty() {
            let second = enumerate_endings(block, rest, PruningStrategy::unpruned());
            let (e2, _) = second[pick2 as usize % second.len()];
            prop_assert!(is_ending(block, s, e1.union(e2)));
        }
    }

    /// Graph JSON emission is a fixed point: parse(to_json(g)) re-emits the
    /// identical document.
    #[test]
    fn graph_json_round_trips(
        n in 1usize..=16,
        tenths in 0u8..=10,
        seed in any::<u64>(),
    ) {
        let g = generators::random_dag(n, f64::from(tenths) / 10.0, seed);
        let text = g.to_json();
        let reparsed = ios_core::graph::ComputationGraph::parse(&text).unwrap();
        prop_assert_eq!(reparsed.to_json(), text);
    }

    /// Every ending the enumerator returns passes the definitional check,
    /// respects the pruning limits, and appears exactly once.
    #[test]
    fn enumerated_endings_are_valid_and_unique(
        n in 1usize..=10,
        tenths in 0u8..=10,
        seed in any::<u64>(),
        r in 1usize..=4,
        s_limit in 1usize..=4,
    ) {
        let g = generators::random_dag(n, f64::from(tenths) / 10.0, seed);
        let block = &g.blocks[0];
        let p = PruningStrategy::new(r, s_limit).unwrap();
        let endings = enumerate_endings(block, block.all_ops(), p);
        let mut seen = std::collections::HashSet::new();
        for (e, groups) in &endings {
            prop_assert!(is_ending(block, block.all_ops(), *e));
            prop_assert!(seen.insert(e.bits()), "duplicate ending");
            prop_assert!(groups.len() <= s_limit);
            for grp in groups {
                prop_assert!(grp.len() <= r);
            }
        }
    }
}

#[test]
fn dp_memo_matches_independent_counting() {
    let m = analytic();
    for seed in 0..30u64 {
        let n = 4 + (seed as usize % 7);
        let g = generators::random_dag(n, 0.3, seed);
        let block = &g.blocks[0];
        let (_, memo) = dp_schedule(&g, block, &m, PruningStrategy::unpruned()).unwrap();
        let counts = count_all(&g, block, None);
        assert_eq!(memo.states(), counts.states, "seed {seed}");
        assert_eq!(memo.transitions_processed, counts.transitions, "seed {seed}");
    }
}

#[test]
fn memo_states_are_predecessor_closed() {
    let m = analytic();
    for seed in 0..20u64 {
        let g = generators::random_dag(9, 0.35, seed);
        let block = &g.blocks[0];
        let (_, memo) = dp_schedule(&g, block, &m, PruningStrategy::unpruned()).unwrap();
        for &bits in memo.cost.keys() {
            let s = OpSet::from_bits(bits);
            for i in s.iter() {
                assert!(
                    block.preds(i).is_subset_of(s),
                    "state {bits:b} is not closed under predecessors (seed {seed})"
                );
            }
        }
    }
}

#[test]
fn loosening_the_pruning_never_hurts() {
    let m = analytic();
    let ps = [
        PruningStrategy::new(1, 8).unwrap(),
        PruningStrategy::new(2, 8).unwrap(),
        PruningStrategy::new(3, 8).unwrap(),
        PruningStrategy::unpruned(),
    ];
    for seed in 0..20u64 {
        let g = generators::random_dag(10, 0.3, seed);
        let block = &g.blocks[0];
        let mut last = f64::INFINITY;
        for p in ps {
            let (q, _) = dp_schedule(&g, block, &m, p).unwrap();
            assert!(
                q.total_latency <= last,
                "seed {seed}: loosening pruning worsened the schedule"
            );
            last = q.total_latency;
        }
    }
}

#[test]
fn optimizer_dominates_baselines_and_simulates_exactly() {
    let models = [
        CostModel::AnalyticRoofline(generators::compute_bound_profile()),
        CostModel::AnalyticRoofline(generators::memory_bound_profile()),
    ];
    for seed in 0..15u64 {
        let g = generators::random_dag(9, 0.3, seed);
        for m in &models {
            let q = schedule_network(&g, m, PruningStrategy::unpruned()).unwrap();
            validate_network_schedule(&g, &q).unwrap();
            assert_eq!(simulate(&g, &q, m).unwrap(), q.network_latency);
            let seq = simulate(&g, &sequential_network(&g), m).unwrap();
            let greedy = simulate(&g, &greedy_network(&g), m).unwrap();
            assert!(q.network_latency <= seq, "seed {seed} vs sequential");
            assert!(q.network_latency <= greedy, "seed {seed} vs greedy");
        }
    }
}

#[test]
fn scheduling_is_deterministic() {
    let m = analytic();
    for seed in [3u64, 17, 40] {
        let g1 = generators::random_dag(11, 0.35, seed);
        let g2 = generators::random_dag(11, 0.35, seed);
        let q1 = schedule_network(&g1, &m, PruningStrategy::default()).unwrap();
        let q2 = schedule_network(&g2, &m, PruningStrategy::default()).unwrap();
        assert_eq!(
            network_schedule_to_json(&g1, &q1),
            network_schedule_to_json(&g2, &q2)
        );
    }
}

#[test]
fn dp_equals_oracle_on_a_quick_sample() {
    let m = analytic();
    for seed in 0..10u64 {
        let g = generators::random_dag(8, 0.3, seed);
        let block = &g.blocks[0];
        let (q, _) = dp_schedule(&g, block, &m, PruningStrategy::unpruned()).unwrap();
        let (oracle_q, oracle) = brute_force_optimal(&g, block, &m).unwrap();
        assert_eq!(q.total_latency, oracle, "seed {seed}");
        assert_eq!(q, oracle_q, "seed {seed}: tie-breaks diverged");
    }
}

#[test]
fn width_certificate_matches_brute_force_antichain() {
    for seed in 0..25u64 {
        let g = generators::random_dag(10, 0.25, seed);
        let block = &g.blocks[0];
        let cert = ios_core::analysis::graph_width(&g, block);

        let n = block.len();
        let reach: Vec<OpSet> = (0..n).map(|i| reachable(block, i)).collect();
        let mut best = 0usize;
        for mask in 1u64..(1 << n) {
            let set = OpSet::from_bits(mask);
            let independent = set
                .iter()
                .all(|i| reach[i].intersect(set).is_empty());
            if independent {
                best = best.max(set.len());
            }
        }
        assert_eq!(cert.width, best, "seed {seed}");

        // The antichain certificate is itself pairwise unreachable.
        for i in cert.antichain.iter() {
            assert!(reach[i].intersect(cert.antichain).is_empty());
        }
        // Chains cover the block and are totally ordered by reachability.
        let mut covered = 0usize;
        for chain in &cert.chains {
            covered += chain.len();
            for w in chain.windows(2) {
                let u = g.dense_index(block, &w[0]).unwrap();
                let v = g.dense_index(block, &w[1]).unwrap();
                assert!(reach[u].contains(v), "chain link without a path");
            }
        }
        assert_eq!(covered, n);
    }
}

#[test]
fn bundled_fixtures_match_the_generators() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let conv_pair = fs::read_to_string(root.join("conv_pair.json")).unwrap();
    assert_eq!(conv_pair, generators::conv_pair().to_json());

    for (file, profile) in [
        ("profiles/compute_bound.json", generators::compute_bound_profile()),
        ("profiles/memory_bound.json", generators::memory_bound_profile()),
    ] {
        let text = fs::read_to_string(root.join(file)).unwrap();
        let parsed = ios_core::cost::DeviceProfile::parse(&text).unwrap();
        assert_eq!(parsed, profile);
    }
}
