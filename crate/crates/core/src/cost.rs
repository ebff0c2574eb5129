//! Pluggable latency models.
//!
//! Every latency the scheduler consumes comes from a [`CostModel`]: either an
//! analytic roofline-with-contention model parameterized by a
//! [`DeviceProfile`], or a [`LatencyTable`] of measured values with an
//! optional analytic fallback. Models are pure: identical inputs always give
//! bit-identical seconds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Block, ComputationGraph, Operator};
use crate::opset::OpSet;

/// Parameters of the analytic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub name: String,
    /// Peak throughput in FLOPs per second.
    pub peak_flops: f64,
    /// Memory bandwidth in bytes per second.
    pub mem_bandwidth: f64,
    /// Fixed cost per kernel launch, seconds.
    pub kernel_overhead: f64,
    /// Fixed cost per stage boundary, seconds.
    pub sync_overhead: f64,
    /// Number of groups the device can run concurrently without slowdown.
    pub max_concurrent_groups: usize,
    /// Extra relative cost per group beyond the capacity.
    pub contention_slope: f64,
    /// FLOPs at which a single kernel reaches peak utilization.
    pub util_saturation_flops: f64,
}

impl DeviceProfile {
    /// Parse and validate a profile from its JSON document.
    pub fn parse(text: &str) -> Result<DeviceProfile> {
        let p: DeviceProfile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("peak_flops", self.peak_flops),
            ("mem_bandwidth", self.mem_bandwidth),
            ("util_saturation_flops", self.util_saturation_flops),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Schema(format!(
                    "profile '{}': {name} must be finite and strictly positive",
                    self.name
                )));
            }
        }
        let non_negative = [
            ("kernel_overhead", self.kernel_overhead),
            ("sync_overhead", self.sync_overhead),
            ("contention_slope", self.contention_slope),
        ];
        for (name, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Schema(format!(
                    "profile '{}': {name} must be finite and non-negative",
                    self.name
                )));
            }
        }
        if self.max_concurrent_groups == 0 {
            return Err(Error::Schema(format!(
                "profile '{}': max_concurrent_groups must be at least 1",
                self.name
            )));
        }
        Ok(())
    }

    /// Slowdown factor for `k` concurrent groups: 1 below the capacity knee,
    /// then linear in the excess.
    fn contention_factor(&self, k: usize) -> f64 {
        let excess = k.saturating_sub(self.max_concurrent_groups) as f64;
        1.0 + self.contention_slope * excess
    }

    /// Roofline latency of one operator.
    fn op_latency(&self, op: &Operator) -> f64 {
        let bytes = op.bytes_read + op.bytes_written;
        let mem = bytes / self.mem_bandwidth;
        let compute = if op.flops > 0.0 {
            let u = (op.flops / self.util_saturation_flops).min(1.0);
            op.flops / (self.peak_flops * u)
        } else {
            0.0
        };
        compute.max(mem) + self.kernel_overhead
    }
}

/// Measured latencies supplied as data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyTable {
    /// Seconds per operator id.
    pub ops: BTreeMap<String, f64>,
    /// Optional seconds per whole stage, keyed by canonical descriptor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<BTreeMap<String, f64>>,
}

impl LatencyTable {
    pub fn parse(text: &str) -> Result<LatencyTable> {
        let t: LatencyTable =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let stage_entries = self.stages.iter().flatten();
        for (key, &v) in self.ops.iter().chain(stage_entries) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Schema(format!(
                    "latency table entry '{key}' must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Canonical key for a stage's group structure: each group's ids sorted
/// ascending, groups sorted lexicographically, serialized as compact JSON
/// (for example `[["a","b"],["c"]]`). Permutation-invariant by construction.
pub fn stage_descriptor(g: &ComputationGraph, block: &Block, groups: &[OpSet]) -> String {
    let mut lists: Vec<Vec<&str>> = groups
        .iter()
        .map(|grp| grp.iter().map(|d| g.block_op(block, d).id.as_str()).collect())
        .collect();
    for ids in &mut lists {
        ids.sort_unstable();
    }
    lists.sort();
    serde_json::to_string(&lists).expect("descriptor serialization")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    AnalyticRoofline(DeviceProfile),
    Table {
        table: LatencyTable,
        fallback: Option<DeviceProfile>,
    },
}

impl CostModel {
    /// Sync overhead charged at each stage boundary under this model.
    fn sync_overhead(&self) -> f64 {
        match self {
            CostModel::AnalyticRoofline(p) => p.sync_overhead,
            CostModel::Table { fallback, .. } => {
                fallback.as_ref().map_or(0.0, |p| p.sync_overhead)
            }
        }
    }

    fn contention_factor(&self, k: usize) -> f64 {
        match self {
            CostModel::AnalyticRoofline(p) => p.contention_factor(k),
            CostModel::Table { fallback, .. } => {
                fallback.as_ref().map_or(1.0, |p| p.contention_factor(k))
            }
        }
    }

    /// Latency of one operator, seconds.
    pub fn op_latency(&self, op: &Operator) -> Result<f64> {
        match self {
            CostModel::AnalyticRoofline(p) => Ok(p.op_latency(op)),
            CostModel::Table { table, fallback } => {
                if let Some(&v) = table.ops.get(&op.id) {
                    Ok(v)
                } else if let Some(p) = fallback {
                    Ok(p.op_latency(op))
                } else {
                    Err(Error::MissingEntry(format!(
                        "no latency entry for operator '{}'",
                        op.id
                    )))
                }
            }
        }
    }

    /// Sequential latency of one group: the sum of member latencies, summed
    /// in ascending dense order so repeated evaluation is bit-identical.
    pub fn group_latency(&self, g: &ComputationGraph, block: &Block, ops: OpSet) -> Result<f64> {
        debug_assert!(!ops.is_empty());
        let mut total = 0.0;
        for dense in ops.iter() {
            total += self.op_latency(g.block_op(block, dense))?;
        }
        Ok(total)
    }

    /// Latency of a stage whose groups run concurrently: the slowest group,
    /// scaled by the contention factor, plus the stage sync overhead. In
    /// table mode a matching stage entry short-circuits the composition.
    pub fn concurrent_stage_latency(
        &self,
        g: &ComputationGraph,
        block: &Block,
        groups: &[OpSet],
    ) -> Result<f64> {
        debug_assert!(!groups.is_empty());
        if let CostModel::Table { table, .. } = self {
            if let Some(stages) = &table.stages {
                if let Some(&v) = stages.get(&stage_descriptor(g, block, groups)) {
                    return Ok(v);
                }
            }
        }
        let mut base = 0.0f64;
        for &grp in groups {
            base = base.max(self.group_latency(g, block, grp)?);
        }
        Ok(base * self.contention_factor(groups.len()) + self.sync_overhead())
    }

    /// Latency of a merge stage: the merged operator, its split, and the
    /// stage sync overhead.
    pub fn merged_stage_latency(&self, merged: &Operator, split: &Operator) -> Result<f64> {
        Ok(self.op_latency(merged)? + self.op_latency(split)? + self.sync_overhead())
    }
}
