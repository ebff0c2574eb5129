//! The core scheduler: subset dynamic programming over endings.
//!
//! A schedule chops a block's operator set into an ordered list of stages.
//! The candidate last stage of a set S is an *ending*: a subset with no edge
//! leaving it into the rest of S. The scheduler memoizes
//! `cost[S] = min over endings S' of (cost[S - S'] + stage_latency(S'))`
//! with `cost[empty] = 0`, picking per stage between concurrent execution of
//! the ending's connected groups and merging the ending into one operator.
//!
//! Everything here is deterministic: endings are visited in ascending bitmask
//! order and cost ties are broken toward larger endings (fewer stages), then
//! the smaller bitmask.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::{Block, ComputationGraph, Operator};
use crate::merge::{build_merge, can_merge, make_split, ChannelOffset, MergePlan};
use crate::opset::OpSet;

/// Ending admission limits: at most `s` groups per stage, at most `r`
/// operators per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruningStrategy {
    pub r: usize,
    pub s: usize,
}

impl PruningStrategy {
    pub fn new(r: usize, s: usize) -> Result<PruningStrategy> {
        if r == 0 || s == 0 {
            return Err(Error::Schema(
                "pruning parameters r and s must be at least 1".into(),
            ));
        }
        Ok(PruningStrategy { r, s })
    }

    /// Limits no block can reach: equivalent to no pruning at all.
    pub fn unpruned() -> PruningStrategy {
        PruningStrategy { r: 64, s: 64 }
    }
}

impl Default for PruningStrategy {
    /// The defaults used by the CLI.
    fn default() -> PruningStrategy {
        PruningStrategy { r: 3, s: 8 }
    }
}

/// Which per-stage strategies the DP may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrategyMode {
    #[default]
    Both,
    /// Merge disabled; every stage runs its groups concurrently.
    ConcurrentOnly,
    /// Concurrent execution disabled for multi-operator endings; stages
    /// either merge or hold a single operator.
    MergeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    ConcurrentExecution,
    OperatorMerge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StagePayload {
    /// Connected groups, each run concurrently with the others.
    Concurrent { groups: Vec<OpSet> },
    /// The whole stage folded into one merged operator plus its split.
    Merge { plan: MergePlan },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub ops: OpSet,
    pub strategy: Strategy,
    pub payload: StagePayload,
    pub latency: f64,
}

/// An ordered list of stages covering one block.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub stages: Vec<Stage>,
    pub total_latency: f64,
}

/// One schedule per block; network latency is their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSchedule {
    pub blocks: Vec<Schedule>,
    pub network_latency: f64,
}

/// The chosen last stage for a memoized state.
#[derive(Debug, Clone)]
pub struct Choice {
    pub ending: OpSet,
    pub strategy: Strategy,
    pub payload: StagePayload,
    pub latency: f64,
}

/// Memoized DP results, exposed for analysis and counting checks.
#[derive(Debug, Default)]
pub struct MemoTable {
    /// cost[S] per visited state, keyed by bitmask; contains the empty set.
    pub cost: HashMap<u64, f64>,
    pub choice: HashMap<u64, Choice>,
    /// Number of (state, ending) pairs examined across all cache misses.
    pub transitions_processed: u64,
}

impl MemoTable {
    fn new() -> MemoTable {
        let mut memo = MemoTable::default();
        memo.cost.insert(OpSet::EMPTY.bits(), 0.0);
        memo
    }

    /// Number of distinct states visited, including the empty set.
    pub fn states(&self) -> u64 {
        self.cost.len() as u64
    }
}

/// True iff `e` can be the last stage of `s`: no edge from `e` into `s - e`.
pub fn is_ending(block: &Block, s: OpSet, e: OpSet) -> bool {
    debug_assert!(e.is_subset_of(s));
    e.iter()
        .all(|i| block.succs(i).intersect(s).is_subset_of(e))
}

/// Every non-empty ending of `s` admissible under `p`, each paired with its
/// connected-group partition, in ascending bitmask order.
///
/// Decisions run over the members of `s` sinks-first (reverse topological
/// order), so an operator may be included only once all of its successors
/// within `s` are; each valid ending is reached on exactly one decision path.
/// Branches whose partial group structure can no longer satisfy `p` are cut
/// early: a connected component never shrinks, and the group count can drop
/// only when a later operator joins several components, which bounds the best
/// reachable count from below.
pub fn enumerate_endings(
    block: &Block,
    s: OpSet,
    p: PruningStrategy,
) -> Vec<(OpSet, Vec<OpSet>)> {
    let mut out = Vec::new();
    if s.is_empty() {
        return out;
    }
    let mut order = block.topo_sort_set(s);
    order.reverse();
    // suffix_reduction[pos]: the most the group count can still drop if every
    // operator from `pos` on is included (each include of an operator with k
    // included successors merges at most k components into one).
    let mut suffix_reduction = vec![0usize; order.len() + 1];
    for pos in (0..order.len()).rev() {
        let succs = block.succs(order[pos]).intersect(s).len();
        suffix_reduction[pos] = suffix_reduction[pos + 1] + succs.saturating_sub(1);
    }
    let mut comps: Vec<OpSet> = Vec::new();
    descend(
        block,
        s,
        p,
        &order,
        &suffix_reduction,
        0,
        OpSet::EMPTY,
        &mut comps,
        &mut out,
    );
    out.sort_by_key(|(e, _)| e.bits());
    out
}

#[allow(clippy::too_many_arguments)]
fn descend(
    block: &Block,
    s: OpSet,
    p: PruningStrategy,
    order: &[usize],
    suffix_reduction: &[usize],
    pos: usize,
    included: OpSet,
    comps: &mut Vec<OpSet>,
    out: &mut Vec<(OpSet, Vec<OpSet>)>,
) {
    // No completion can get the group count back under the limit: cut the
    // whole subtree.
    if comps.len().saturating_sub(suffix_reduction[pos]) > p.s {
        return;
    }
    if pos == order.len() {
        if !included.is_empty() && comps.len() <= p.s {
            let mut groups = comps.clone();
            groups.sort_by_key(|c| c.min_index());
            out.push((included, groups));
        }
        return;
    }
    let op = order[pos];

    // Exclude branch.
    descend(block, s, p, order, suffix_reduction, pos + 1, included, comps, out);

    // Include branch, legal only when every successor within s is already in.
    let succs = block.succs(op).intersect(s);
    if succs.is_subset_of(included) {
        let mut merged = OpSet::singleton(op);
        let mut rest: Vec<OpSet> = Vec::with_capacity(comps.len());
        for &c in comps.iter() {
            if c.intersects(succs) {
                merged = merged.union(c);
            } else {
                rest.push(c);
            }
        }
        if merged.len() <= p.r {
            rest.push(merged);
            descend(
                block,
                s,
                p,
                order,
                suffix_reduction,
                pos + 1,
                included.union(OpSet::singleton(op)),
                &mut rest,
                out,
            );
        }
    }
}

/// Latency and payload of the better strategy for one stage. `groups` must be
/// the connected-group partition of `e`. Returns `None` when the mode admits
/// no strategy for this ending (merge-only on an unmergeable multi-operator
/// set). Exact latency ties prefer concurrent execution.
pub fn generate_stage(
    g: &ComputationGraph,
    block: &Block,
    e: OpSet,
    groups: &[OpSet],
    m: &CostModel,
    mode: StrategyMode,
) -> Result<Option<(f64, Strategy, StagePayload)>> {
    let concurrent = |latency: f64| {
        (
            latency,
            Strategy::ConcurrentExecution,
            StagePayload::Concurrent {
                groups: groups.to_vec(),
            },
        )
    };
    let mergeable = mode != StrategyMode::ConcurrentOnly && can_merge(g, block, e);
    let merged = if mergeable {
        let plan = build_merge(g, block, e)?;
        let latency = m.merged_stage_latency(&plan.merged, &plan.split)?;
        Some((latency, Strategy::OperatorMerge, StagePayload::Merge { plan }))
    } else {
        None
    };
    if mode == StrategyMode::MergeOnly {
        if let Some(stage) = merged {
            return Ok(Some(stage));
        }
        // A single operator has nothing to parallelize or merge; it is always
        // admissible. Larger unmergeable endings have no strategy here.
        if e.len() == 1 {
            let latency = m.concurrent_stage_latency(g, block, groups)?;
            return Ok(Some(concurrent(latency)));
        }
        return Ok(None);
    }
    let l_concurrent = m.concurrent_stage_latency(g, block, groups)?;
    match merged {
        Some(stage) if stage.0 < l_concurrent => Ok(Some(stage)),
        _ => Ok(Some(concurrent(l_concurrent))),
    }
}

/// Optimal schedule for one block under the default strategy mode.
pub fn dp_schedule(
    g: &ComputationGraph,
    block: &Block,
    m: &CostModel,
    p: PruningStrategy,
) -> Result<(Schedule, MemoTable)> {
    dp_schedule_with_mode(g, block, m, p, StrategyMode::Both)
}

/// Optimal schedule for one block, restricted to the given strategy mode.
pub fn dp_schedule_with_mode(
    g: &ComputationGraph,
    block: &Block,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
) -> Result<(Schedule, MemoTable)> {
    let mut memo = MemoTable::new();
    let full = block.all_ops();
    solve(g, block, m, p, mode, full, &mut memo)?;
    let mut stages = Vec::new();
    let mut s = full;
    while !s.is_empty() {
        let choice = memo.choice.get(&s.bits()).expect("state was solved");
        stages.push(Stage {
            ops: choice.ending,
            strategy: choice.strategy,
            payload: choice.payload.clone(),
            latency: choice.latency,
        });
        s = s.minus(choice.ending);
    }
    stages.reverse();
    let total_latency = memo.cost[&full.bits()];
    Ok((
        Schedule {
            stages,
            total_latency,
        },
        memo,
    ))
}

fn solve(
    g: &ComputationGraph,
    block: &Block,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
    s: OpSet,
    memo: &mut MemoTable,
) -> Result<f64> {
    if let Some(&c) = memo.cost.get(&s.bits()) {
        return Ok(c);
    }
    let mut best: Option<(f64, Choice)> = None;
    for (e, groups) in enumerate_endings(block, s, p) {
        memo.transitions_processed += 1;
        let Some((latency, strategy, payload)) = generate_stage(g, block, e, &groups, m, mode)?
        else {
            continue;
        };
        let total = solve(g, block, m, p, mode, s.minus(e), memo)? + latency;
        // Ties go to the larger ending; among equal sizes the first candidate
        // wins, which is the smallest bitmask by enumeration order.
        let improves = match &best {
            None => true,
            Some((c, choice)) => total < *c || (total == *c && e.len() > choice.ending.len()),
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
    let (cost, choice) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "state {s:?} has no admissible ending under pruning (r={}, s={})",
            p.r, p.s
        ))
    })?;
    memo.cost.insert(s.bits(), cost);
    memo.choice.insert(s.bits(), choice);
    Ok(cost)
}

/// Schedule every block and sum their latencies. Uses the rayon path when the
/// `parallel` feature is enabled.
pub fn schedule_network(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
) -> Result<NetworkSchedule> {
    schedule_network_with(g, m, p, StrategyMode::Both, cfg!(feature = "parallel"))
}

/// Always-sequential variant of [`schedule_network`], independent of crate
/// features; the two produce identical results.
pub fn schedule_network_seq(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
) -> Result<NetworkSchedule> {
    schedule_network_with(g, m, p, StrategyMode::Both, false)
}

/// Full-control variant: strategy mode plus a runtime switch for scheduling
/// blocks in parallel. Blocks are independent, so the parallel path returns
/// bit-identical schedules in block order.
pub fn schedule_network_with(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
    parallel: bool,
) -> Result<NetworkSchedule> {
    let blocks = solve_blocks(g, m, p, mode, parallel)?;
    let network_latency = blocks.iter().fold(0.0, |acc, b| acc + b.total_latency);
    Ok(NetworkSchedule {
        blocks,
        network_latency,
    })
}

#[cfg(feature = "parallel")]
fn solve_blocks(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
    parallel: bool,
) -> Result<Vec<Schedule>> {
    use rayon::prelude::*;
    if parallel {
        g.blocks
            .par_iter()
            .map(|b| dp_schedule_with_mode(g, b, m, p, mode).map(|(q, _)| q))
            .collect()
    } else {
        solve_blocks_seq(g, m, p, mode)
    }
}

#[cfg(not(feature = "parallel"))]
fn solve_blocks(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
    _parallel: bool,
) -> Result<Vec<Schedule>> {
    solve_blocks_seq(g, m, p, mode)
}

fn solve_blocks_seq(
    g: &ComputationGraph,
    m: &CostModel,
    p: PruningStrategy,
    mode: StrategyMode,
) -> Result<Vec<Schedule>> {
    g.blocks
        .iter()
        .map(|b| dp_schedule_with_mode(g, b, m, p, mode).map(|(q, _)| q))
        .collect()
}

// ---------------------------------------------------------------------------
// Validation and simulation

/// Check that `q` is a structurally valid schedule of `g`: per block, stages
/// partition the operator set and every edge is honored (producer in an
/// earlier stage, or in the same group of the same stage).
pub fn validate_network_schedule(g: &ComputationGraph, q: &NetworkSchedule) -> Result<()> {
    if q.blocks.len() != g.blocks.len() {
        return Err(Error::Mismatch(format!(
            "schedule has {} blocks, graph has {}",
            q.blocks.len(),
            g.blocks.len()
        )));
    }
    for (block, schedule) in g.blocks.iter().zip(&q.blocks) {
        let mut covered = OpSet::EMPTY;
        let mut stage_of = vec![usize::MAX; block.len()];
        let mut group_of = vec![usize::MAX; block.len()];
        for (si, stage) in schedule.stages.iter().enumerate() {
            if stage.ops.intersects(covered) {
                return Err(Error::Mismatch(format!(
                    "block {}: stage {si} overlaps an earlier stage",
                    block.index
                )));
            }
            covered = covered.union(stage.ops);
            let payload_ops = match &stage.payload {
                StagePayload::Concurrent { groups } => {
                    let mut union = OpSet::EMPTY;
                    for (gi, &grp) in groups.iter().enumerate() {
                        if grp.is_empty() || grp.intersects(union) {
                            return Err(Error::Mismatch(format!(
                                "block {}: stage {si} groups do not partition the stage",
                                block.index
                            )));
                        }
                        union = union.union(grp);
                        for i in grp.iter() {
                            group_of[i] = gi;
                        }
                    }
                    union
                }
                StagePayload::Merge { plan } => plan.members,
            };
            if payload_ops != stage.ops {
                return Err(Error::Mismatch(format!(
                    "block {}: stage {si} payload does not cover its operator set",
                    block.index
                )));
            }
            for i in stage.ops.iter() {
                stage_of[i] = si;
            }
        }
        if covered != block.all_ops() {
            return Err(Error::Mismatch(format!(
                "block {}: stages do not cover the block",
                block.index
            )));
        }
        for u in 0..block.len() {
            for v in block.succs(u).iter() {
                let ok = stage_of[u] < stage_of[v]
                    || (stage_of[u] == stage_of[v]
                        && group_of[u] != usize::MAX
                        && group_of[u] == group_of[v]);
                if !ok {
                    return Err(Error::Mismatch(format!(
                        "block {}: edge {} -> {} violates stage order",
                        block.index,
                        g.block_op(block, u).id,
                        g.block_op(block, v).id
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Latency of one block's schedule, recomputed stage by stage from the cost
/// model (the recorded latencies are ignored).
pub fn simulate_block(
    g: &ComputationGraph,
    block: &Block,
    schedule: &Schedule,
    m: &CostModel,
) -> Result<f64> {
    let mut total = 0.0;
    for stage in &schedule.stages {
        total += match &stage.payload {
            StagePayload::Concurrent { groups } => {
                m.concurrent_stage_latency(g, block, groups)?
            }
            StagePayload::Merge { plan } => m.merged_stage_latency(&plan.merged, &plan.split)?,
        };
    }
    Ok(total)
}

/// Latency of a whole network schedule under `m`, independent of the DP that
/// produced it. Validates `q` against `g` first.
pub fn simulate(g: &ComputationGraph, q: &NetworkSchedule, m: &CostModel) -> Result<f64> {
    validate_network_schedule(g, q)?;
    let mut total = 0.0;
    for (block, schedule) in g.blocks.iter().zip(&q.blocks) {
        total += simulate_block(g, block, schedule, m)?;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetworkSchedule {
    blocks: Vec<RawBlockSchedule>,
    network_latency: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockSchedule {
    stages: Vec<RawStage>,
    total_latency: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    strategy: RawStrategy,
    groups: RawGroups,
    latency: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "lowercase")]
enum RawStrategy {
    Concurrent,
    Merge,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawGroups {
    Concurrent(Vec<Vec<String>>),
    Merge {
        merged: Operator,
        offsets: Vec<ChannelOffset>,
    },
}

/// Serialize a network schedule. Concurrent groups list their members in
/// topological order (the within-group execution order); merge stages carry
/// the merged operator and the channel offsets, from which the split is
/// reconstructed on load.
pub fn network_schedule_to_json(g: &ComputationGraph, q: &NetworkSchedule) -> String {
    let raw = RawNetworkSchedule {
        network_latency: q.network_latency,
        blocks: g
            .blocks
            .iter()
            .zip(&q.blocks)
            .map(|(block, schedule)| RawBlockSchedule {
                total_latency: schedule.total_latency,
                stages: schedule
                    .stages
                    .iter()
                    .map(|stage| RawStage {
                        latency: stage.latency,
                        strategy: match stage.strategy {
                            Strategy::ConcurrentExecution => RawStrategy::Concurrent,
                            Strategy::OperatorMerge => RawStrategy::Merge,
                        },
                        groups: match &stage.payload {
                            StagePayload::Concurrent { groups } => RawGroups::Concurrent(
                                groups
                                    .iter()
                                    .map(|&grp| {
                                        block
                                            .topo_sort_set(grp)
                                            .into_iter()
                                            .map(|d| g.block_op(block, d).id.clone())
                                            .collect()
                                    })
                                    .collect(),
                            ),
                            StagePayload::Merge { plan } => RawGroups::Merge {
                                merged: plan.merged.clone(),
                                offsets: plan.channel_offsets.clone(),
                            },
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("schedule serialization");
    text.push('\n');
    text
}

/// Parse a schedule JSON document against the graph it was produced for.
pub fn parse_network_schedule(g: &ComputationGraph, text: &str) -> Result<NetworkSchedule> {
    let raw: RawNetworkSchedule =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if raw.blocks.len() != g.blocks.len() {
        return Err(Error::Mismatch(format!(
            "schedule has {} blocks, graph has {}",
            raw.blocks.len(),
            g.blocks.len()
        )));
    }
    let mut blocks = Vec::with_capacity(raw.blocks.len());
    for (block, raw_block) in g.blocks.iter().zip(raw.blocks) {
        let mut stages = Vec::with_capacity(raw_block.stages.len());
        for raw_stage in raw_block.stages {
            let resolve = |id: &str| {
                g.dense_index(block, id).ok_or_else(|| {
                    Error::Mismatch(format!(
                        "schedule references '{id}', not in block {}",
                        block.index
                    ))
                })
            };
            let stage = match (raw_stage.strategy, raw_stage.groups) {
                (RawStrategy::Concurrent, RawGroups::Concurrent(id_groups)) => {
                    let mut groups = Vec::with_capacity(id_groups.len());
                    let mut ops = OpSet::EMPTY;
                    for ids in id_groups {
                        let mut grp = OpSet::EMPTY;
                        for id in &ids {
                            grp.insert(resolve(id)?);
                        }
                        ops = ops.union(grp);
                        groups.push(grp);
                    }
                    Stage {
                        ops,
                        strategy: Strategy::ConcurrentExecution,
                        payload: StagePayload::Concurrent { groups },
                        latency: raw_stage.latency,
                    }
                }
                (RawStrategy::Merge, RawGroups::Merge { merged, offsets }) => {
                    let mut members = OpSet::EMPTY;
                    for off in &offsets {
                        members.insert(resolve(&off.id)?);
                    }
                    let split = make_split(&merged);
                    Stage {
                        ops: members,
                        strategy: Strategy::OperatorMerge,
                        payload: StagePayload::Merge {
                            plan: MergePlan {
                                members,
                                merged,
                                split,
                                channel_offsets: offsets,
                            },
                        },
                        latency: raw_stage.latency,
                    }
                }
                _ => {
                    return Err(Error::Schema(
                        "stage strategy does not match its groups form".into(),
                    ))
                }
            };
            stages.push(stage);
        }
        blocks.push(Schedule {
            stages,
            total_latency: raw_block.total_latency,
        });
    }
    Ok(NetworkSchedule {
        blocks,
        network_latency: raw.network_latency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::LatencyTable;
    use std::collections::BTreeMap;

    /// Two dependent operators plus one independent: a -> b, c free.
    fn tiny() -> ComputationGraph {
        crate::generators::fig5()
    }

    fn table_ms(entries: &[(&str, f64)]) -> CostModel {
        let ops: BTreeMap<String, f64> =
            entries.iter().map(|(k, v)| (k.to_string(), v * 1e-3)).collect();
        CostModel::Table {
            table: LatencyTable { ops, stages: None },
            fallback: None,
        }
    }

    fn analytic() -> CostModel {
        CostModel::AnalyticRoofline(crate::cost::DeviceProfile {
            name: "unit".into(),
            peak_flops: 1e12,
            mem_bandwidth: 1e11,
            kernel_overhead: 1e-6,
            sync_overhead: 1e-6,
            max_concurrent_groups: 2,
            contention_slope: 0.3,
            util_saturation_flops: 1e7,
        })
    }

    fn tiny_costs() -> CostModel {
        table_ms(&[("a", 1.0), ("b", 2.0), ("c", 3.0)])
    }

    #[test]
    fn ending_test_on_chain() {
        let g = crate::generators::chains(3, 1);
        let block = &g.blocks[0];
        let s = block.all_ops();
        // Dense order equals chain order here.
        assert!(is_ending(block, s, OpSet::singleton(2)));
        assert!(!is_ending(block, s, OpSet::singleton(1)));
        assert!(is_ending(block, s, s));
    }

    #[test]
    fn enumerates_the_five_endings() {
        let g = tiny();
        let block = &g.blocks[0];
        let endings = enumerate_endings(block, block.all_ops(), PruningStrategy::unpruned());
        let bits: Vec<u64> = endings.iter().map(|(e, _)| e.bits()).collect();
        // a=0, b=1, c=2: {b}, {a,b}, {c}, {b,c}, {a,b,c}.
        assert_eq!(bits, vec![0b010, 0b011, 0b100, 0b110, 0b111]);
        for (e, groups) in &endings {
            let mut union = OpSet::EMPTY;
            for &grp in groups {
                union = union.union(grp);
            }
            assert_eq!(union, *e);
        }
    }

    #[test]
    fn pruning_filters_group_sizes() {
        let g = tiny();
        let block = &g.blocks[0];
        let p = PruningStrategy::new(1, 2).unwrap();
        let endings = enumerate_endings(block, block.all_ops(), p);
        let bits: Vec<u64> = endings.iter().map(|(e, _)| e.bits()).collect();
        // {a,b} is one group of size 2, so it and the full set drop out.
        assert_eq!(bits, vec![0b010, 0b100, 0b110]);
    }

    #[test]
    fn singleton_set_has_exactly_itself() {
        let g = tiny();
        let block = &g.blocks[0];
        let endings = enumerate_endings(block, OpSet::singleton(2), PruningStrategy::default());
        assert_eq!(endings.len(), 1);
        assert_eq!(endings[0].0, OpSet::singleton(2));
    }

    #[test]
    fn group_count_pruning_cuts_wide_sets() {
        // Four independent operators: endings under s=2 are the subsets with
        // at most two members.
        let text = r#"{
            "name": "wide", "inputs": [], "blocks": [["a","b","c","d"]],
            "operators": [
                {"id":"a","kind":"Identity","inputs":[],"out_channels":1,"in_shape":[1,1,1,1]},
                {"id":"b","kind":"Identity","inputs":[],"out_channels":1,"in_shape":[1,1,1,1]},
                {"id":"c","kind":"Identity","inputs":[],"out_channels":1,"in_shape":[1,1,1,1]},
                {"id":"d","kind":"Identity","inputs":[],"out_channels":1,"in_shape":[1,1,1,1]}
            ]
        }"#;
        let g = ComputationGraph::parse(text).unwrap();
        let block = &g.blocks[0];
        let p = PruningStrategy::new(64, 2).unwrap();
        let endings = enumerate_endings(block, block.all_ops(), p);
        assert_eq!(endings.len(), 4 + 6);
    }

    #[test]
    fn dp_finds_the_three_ms_single_stage() {
        let g = tiny();
        let block = &g.blocks[0];
        let m = tiny_costs();
        let (q, memo) = dp_schedule(&g, block, &m, PruningStrategy::unpruned()).unwrap();
        assert_eq!(q.total_latency, 3e-3);
        assert_eq!(q.stages.len(), 1);
        let stage = &q.stages[0];
        assert_eq!(stage.strategy, Strategy::ConcurrentExecution);
        match &stage.payload {
            StagePayload::Concurrent { groups } => {
                assert_eq!(groups.len(), 2);
                assert_eq!(groups[0].bits(), 0b011);
                assert_eq!(groups[1].bits(), 0b100);
            }
            _ => panic!("expected concurrent stage"),
        }
        // All six states were visited and memoized.
        assert_eq!(memo.states(), 6);
        assert_eq!(memo.transitions_processed, 12);
    }

    #[test]
    fn chain_tie_break_yields_single_stage() {
        let g = crate::generators::chains(3, 1);
        let block = &g.blocks[0];
        let ids: Vec<&str> = (0..3).map(|d| g.block_op(block, d).id.as_str()).collect();
        let m = table_ms(&[(ids[0], 1.0), (ids[1], 2.0), (ids[2], 3.0)]);
        let (q, _) = dp_schedule(&g, block, &m, PruningStrategy::unpruned()).unwrap();
        assert_eq!(q.total_latency, 6e-3);
        assert_eq!(q.stages.len(), 1, "larger-ending tie break");
    }

    #[test]
    fn simulate_matches_dp_cost() {
        let g = tiny();
        let m = tiny_costs();
        let q = schedule_network(&g, &m, PruningStrategy::unpruned()).unwrap();
        assert_eq!(q.network_latency, 3e-3);
        assert_eq!(simulate(&g, &q, &m).unwrap(), q.network_latency);
    }

    #[test]
    fn merge_only_equals_sequential_when_nothing_merges() {
        let g = tiny();
        let m = tiny_costs();
        let both = schedule_network_with(&g, &m, PruningStrategy::unpruned(), StrategyMode::Both, false).unwrap();
        let merge_only =
            schedule_network_with(&g, &m, PruningStrategy::unpruned(), StrategyMode::MergeOnly, false)
                .unwrap();
        // No pair of operators here is mergeable, so merge-only degenerates
        // to one operator per stage.
        assert_eq!(merge_only.blocks[0].stages.len(), 3);
        assert_eq!(merge_only.network_latency, 6e-3);
        assert!(both.network_latency <= merge_only.network_latency);
    }

    #[test]
    fn parallel_and_sequential_network_schedules_agree() {
        let g = crate::generators::chains(3, 2);
        let m = analytic();
        let par = schedule_network(&g, &m, PruningStrategy::default()).unwrap();
        let seq = schedule_network_seq(&g, &m, PruningStrategy::default()).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn schedule_json_round_trips() {
        let g = tiny();
        let m = tiny_costs();
        let q = schedule_network(&g, &m, PruningStrategy::unpruned()).unwrap();
        let text = network_schedule_to_json(&g, &q);
        let loaded = parse_network_schedule(&g, &text).unwrap();
        assert_eq!(simulate(&g, &loaded, &m).unwrap(), q.network_latency);
        assert_eq!(network_schedule_to_json(&g, &loaded), text);
        // Emitting twice is byte-identical.
        assert_eq!(network_schedule_to_json(&g, &q), text);
    }

    #[test]
    fn validation_catches_missing_and_reordered_ops() {
        let g = tiny();
        let m = tiny_costs();
        let mut q = schedule_network(&g, &m, PruningStrategy::unpruned()).unwrap();
        q.blocks[0].stages[0].ops.remove(0);
        assert!(matches!(
            simulate(&g, &q, &m),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn loader_rejects_unknown_ids() {
        let g = tiny();
        let text = r#"{
            "blocks": [{"stages": [{"strategy": "concurrent", "groups": [["ghost"]], "latency": 0.0}],
                        "total_latency": 0.0}],
            "network_latency": 0.0
        }"#;
        assert!(matches!(
            parse_network_schedule(&g, text),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn infeasible_pruning_is_impossible_with_valid_limits() {
        // Even r=1, s=1 admits a singleton sink at every state.
        let g = crate::generators::chains(2, 3);
        let block = &g.blocks[0];
        let m = analytic();
        let p = PruningStrategy::new(1, 1).unwrap();
        let (q, _) = dp_schedule(&g, block, &m, p).unwrap();
        assert_eq!(q.stages.len(), 6);
    }
}
