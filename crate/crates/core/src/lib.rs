//! Inter-operator scheduling for CNN computation graphs.
//!
//! Given a computation graph partitioned into blocks, this crate finds a
//! minimum-latency execution schedule per block by dynamic programming over
//! the block's *endings* — subsets with no edge leaving into the rest of the
//! block, exactly the sets that can run as the final stage. Each stage
//! either runs its connected groups concurrently or merges compatible
//! convolutions into one wider kernel; stage latencies come from a pluggable
//! cost model (an analytic roofline with a contention term, or measured
//! latency tables).
//!
//! The main entry point is [`schedule::schedule_network`]. Supporting
//! modules provide reference baselines and an exhaustive oracle
//! ([`baseline`]), width certificates and state-graph size bounds
//! ([`analysis`]), built-in graphs and device profiles ([`generators`]),
//! and Graphviz export ([`dot`]).

pub mod analysis;
pub mod baseline;
pub mod cost;
pub mod dot;
pub mod error;
pub mod generators;
pub mod graph;
pub mod merge;
pub mod opset;
pub mod schedule;

pub use analysis::{bound_check, complexity_bound, graph_width, WidthCertificate};
pub use baseline::{
    brute_force_optimal, count_all, greedy_schedule, sequential_schedule, CountReport,
};
pub use cost::{CostModel, DeviceProfile, LatencyTable};
pub use error::{Error, Result};
pub use graph::{ComputationGraph, Operator, OperatorKind};
pub use merge::{build_merge, can_merge, MergePlan};
pub use opset::OpSet;
pub use schedule::{
    dp_schedule, enumerate_endings, schedule_network, schedule_network_seq, simulate,
    NetworkSchedule, PruningStrategy, Schedule, Stage, Strategy, StrategyMode,
};
