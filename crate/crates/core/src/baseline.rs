//! Reference schedules, an exhaustive optimal-schedule oracle, and exact
//! counting of the DP state graph.
//!
//! The oracle sweeps every subset of a block bottom-up with its own ending
//! test and component search, so it shares nothing with the scheduler's
//! recursive enumerator except the cost model — which is the point: the two
//! must agree bit-exactly on every instance.

use std::collections::HashMap;

use num::BigUint;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::{Block, ComputationGraph};
use crate::opset::OpSet;
use crate::schedule::{
    enumerate_endings, generate_stage, Choice, NetworkSchedule, PruningStrategy, Schedule, Stage,
    StagePayload, Strategy, StrategyMode,
};

/// Upper limit for the exhaustive oracle.
pub const BRUTE_FORCE_MAX_OPS: usize = 14;

/// One operator per stage, in topological order.
pub fn sequential_schedule(g: &ComputationGraph, block: &Block) -> Schedule {
    let _ = g;
    let stages = block
        .topo_sort_set(block.all_ops())
        .into_iter()
        .map(|dense| {
            let ops = OpSet::singleton(dense);
            Stage {
                ops,
                strategy: Strategy::ConcurrentExecution,
                payload: StagePayload::Concurrent { groups: vec![ops] },
                latency: 0.0,
            }
        })
        .collect();
    Schedule {
        stages,
        total_latency: 0.0,
    }
}

/// Repeatedly emit every currently-runnable operator as one stage.
pub fn greedy_schedule(g: &ComputationGraph, block: &Block) -> Schedule {
    let mut stages = Vec::new();
    let mut done = OpSet::EMPTY;
    let all = block.all_ops();
    while done != all {
        let mut ready = OpSet::EMPTY;
        for i in all.minus(done).iter() {
            if block.preds(i).is_subset_of(done) {
                ready.insert(i);
            }
        }
        debug_assert!(!ready.is_empty(), "valid DAGs always have a ready op");
        let groups = g.connected_groups(block, ready);
        stages.push(Stage {
            ops: ready,
            strategy: Strategy::ConcurrentExecution,
            payload: StagePayload::Concurrent { groups },
            latency: 0.0,
        });
        done = done.union(ready);
    }
    Schedule {
        stages,
        total_latency: 0.0,
    }
}

/// Per-block [`sequential_schedule`] wrapped as a network schedule. Stage
/// latencies are left at zero; evaluate with `simulate`.
pub fn sequential_network(g: &ComputationGraph) -> NetworkSchedule {
    NetworkSchedule {
        blocks: g.blocks.iter().map(|b| sequential_schedule(g, b)).collect(),
        network_latency: 0.0,
    }
}

/// Per-block [`greedy_schedule`] wrapped as a network schedule.
pub fn greedy_network(g: &ComputationGraph) -> NetworkSchedule {
    NetworkSchedule {
        blocks: g.blocks.iter().map(|b| greedy_schedule(g, b)).collect(),
        network_latency: 0.0,
    }
}

/// Connected components of `e` under the undirected edge view, found with an
/// explicit-stack DFS (deliberately not the scheduler's search).
fn components(block: &Block, e: OpSet) -> Vec<OpSet> {
    let mut groups: Vec<OpSet> = Vec::new();
    let mut seen = OpSet::EMPTY;
    for start in e.iter() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = OpSet::EMPTY;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if comp.contains(i) {
                continue;
            }
            comp.insert(i);
            for j in block.succs(i).union(block.preds(i)).intersect(e).iter() {
                if !comp.contains(j) {
                    stack.push(j);
                }
            }
        }
        seen = seen.union(comp);
        groups.push(comp);
    }
    groups
}

/// Direct definition check: no edge from `e` into `s - e`.
fn is_valid_ending(block: &Block, s: OpSet, e: OpSet) -> bool {
    for i in e.iter() {
        if !block.succs(i).intersect(s).is_subset_of(e) {
            return false;
        }
    }
    true
}

/// Exhaustive minimum over every feasible schedule of the block, bottom-up
/// over all subsets. Ties are broken exactly as in the DP: larger last stage
/// first, then the smaller bitmask.
pub fn brute_force_optimal(
    g: &ComputationGraph,
    block: &Block,
    m: &CostModel,
) -> Result<(Schedule, f64)> {
    let n = block.len();
    if n > BRUTE_FORCE_MAX_OPS {
        return Err(Error::TooLarge(format!(
            "block has {n} operators, oracle cap is {BRUTE_FORCE_MAX_OPS}"
        )));
    }
    if n == 0 {
        return Ok((
            Schedule {
                stages: vec![],
                total_latency: 0.0,
            },
            0.0,
        ));
    }
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut cost = vec![0.0f64; (full + 1) as usize];
    let mut choice: Vec<Option<Choice>> = (0..=full).map(|_| None).collect();
    for mask in 1..=full {
        let s = OpSet::from_bits(mask);
        let mut best: Option<(f64, Choice)> = None;
        // Enumerate submasks of `mask`, largest first.
        let mut sub = mask;
        while sub != 0 {
            let e = OpSet::from_bits(sub);
            if is_valid_ending(block, s, e) {
                let mut groups = components(block, e);
                groups.sort_by_key(|c| c.min_index());
                let (latency, strategy, payload) =
                    generate_stage(g, block, e, &groups, m, StrategyMode::Both)?
                        .expect("both-mode stages always exist");
                let total = cost[(mask ^ sub) as usize] + latency;
                let improves = match &best {
                    None => true,
                    Some((c, ch)) => {
                        total < *c
                            || (total == *c
                                && (e.len() > ch.ending.len()
                                    || (e.len() == ch.ending.len() && sub < ch.ending.bits())))
                    }
                };
                if improves {
                    best = Some((
                        total,
                        Choice {
                            ending: e,
                            strategy,
                            payload,
                            latency,
                        },
                    ));
                }
            }
            sub = (sub - 1) & mask;
        }
        let (c, ch) = best.expect("every non-empty set has a singleton-sink ending");
        cost[mask as usize] = c;
        choice[mask as usize] = Some(ch);
    }
    let mut stages = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let ch = choice[mask as usize].clone().expect("solved");
        mask ^= ch.ending.bits();
        stages.push(Stage {
            ops: ch.ending,
            strategy: ch.strategy,
            payload: ch.payload,
            latency: ch.latency,
        });
    }
    stages.reverse();
    let total = cost[full as usize];
    Ok((
        Schedule {
            stages,
            total_latency: total,
        },
        total,
    ))
}

/// Exact sizes of the DP state graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountReport {
    pub n: usize,
    /// Distinct reachable states, the empty set included.
    pub states: u64,
    /// (state, ending) pairs over all non-empty reachable states.
    pub transitions: u64,
    /// Feasible schedules: root-to-empty paths in the state graph. Strategy
    /// variants are not multiplied in; a schedule is a sequence of stage sets.
    pub schedules: BigUint,
}

/// Count states, transitions, and schedules of the state graph under `p`
/// (`None` for no pruning). Purely structural; no cost model involved.
pub fn count_all(g: &ComputationGraph, block: &Block, p: Option<PruningStrategy>) -> CountReport {
    let _ = g;
    let p = p.unwrap_or_else(PruningStrategy::unpruned);
    let mut paths: HashMap<u64, BigUint> = HashMap::new();
    paths.insert(OpSet::EMPTY.bits(), BigUint::from(1u32));
    let mut transitions = 0u64;
    let schedules = count_paths(block, block.all_ops(), p, &mut paths, &mut transitions);
    CountReport {
        n: block.len(),
        states: paths.len() as u64,
        transitions,
        schedules,
    }
}

fn count_paths(
    block: &Block,
    s: OpSet,
    p: PruningStrategy,
    paths: &mut HashMap<u64, BigUint>,
    transitions: &mut u64,
) -> BigUint {
    if let Some(v) = paths.get(&s.bits()) {
        return v.clone();
    }
    let endings = enumerate_endings(block, s, p);
    *transitions += endings.len() as u64;
    let mut total = BigUint::from(0u32);
    for (e, _) in endings {
        total += count_paths(block, s.minus(e), p, paths, transitions);
    }
    paths.insert(s.bits(), total.clone());
    total
}
