//! Built-in graph generators and reference device profiles.
//!
//! Everything here goes through [`ComputationGraph::parse`], so generated
//! graphs are validated and carry derived costs exactly like graphs loaded
//! from disk. All generators are deterministic; `random_dag` is seeded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::cost::DeviceProfile;
use crate::graph::ComputationGraph;

fn build(doc: serde_json::Value) -> ComputationGraph {
    ComputationGraph::parse(&doc.to_string()).expect("generator emits valid graphs")
}

/// The three-operator running example: `a -> b` with `c` independent.
///
/// `a` and `b` are convolutions, `c` is a pooling op, so no pair is
/// mergeable and every improvement must come from concurrent stages. Dense
/// indices are `a = 0`, `b = 1`, `c = 2`.
pub fn fig5() -> ComputationGraph {
    build(json!({
        "name": "fig5",
        "inputs": [{"id": "in0", "shape": [1, 64, 16, 16]}],
        "blocks": [["a", "b", "c"]],
        "operators": [
            {"id": "a", "kind": "ConvRelu", "inputs": ["in0"], "out_channels": 64,
             "kernel": [3, 3], "stride": [1, 1], "in_shape": [1, 64, 16, 16]},
            {"id": "b", "kind": "ConvRelu", "inputs": ["a"], "out_channels": 64,
             "kernel": [3, 3], "stride": [1, 1], "in_shape": [1, 64, 16, 16]},
            {"id": "c", "kind": "Pool", "inputs": ["in0"], "out_channels": 64,
             "in_shape": [1, 64, 16, 16]}
        ]
    }))
}

/// `d` parallel chains of `c` convolutions each, all in one block.
///
/// Identifiers are zero-padded so the dense (identifier-sorted) order walks
/// chain 0 head to tail, then chain 1, and so on. The head of every chain
/// reads the graph input.
///
/// # Panics
/// If `c * d` exceeds the 64-operator block limit.
pub fn chains(c: usize, d: usize) -> ComputationGraph {
    assert!(c * d <= 64, "chains({c}, {d}) exceeds the block limit");
    let mut ids = Vec::new();
    let mut ops = Vec::new();
    for j in 0..d {
        for k in 0..c {
            let id = format!("c{j:02}_{k:02}");
            let input = if k == 0 {
                "in0".to_string()
            } else {
                format!("c{j:02}_{:02}", k - 1)
            };
            ops.push(json!({
                "id": id, "kind": "ConvRelu", "inputs": [input], "out_channels": 32,
                "kernel": [3, 3], "stride": [1, 1], "in_shape": [1, 32, 8, 8]
            }));
            ids.push(id);
        }
    }
    build(json!({
        "name": format!("chains-{c}x{d}"),
        "inputs": [{"id": "in0", "shape": [1, 32, 8, 8]}],
        "blocks": [ids],
        "operators": ops
    }))
}

/// A seeded random single-block DAG on `n` operators.
///
/// Edge `i -> j` is drawn independently with probability `edge_p` for every
/// `i < j` (declaration order is a topological order by construction).
/// Operators with no predecessor read the graph input; operators with one
/// predecessor are convolutions; operators with several are elementwise adds.
///
/// # Panics
/// If `n > 64` or `edge_p` is outside `[0, 1]`.
pub fn random_dag(n: usize, edge_p: f64, seed: u64) -> ComputationGraph {
    assert!(n <= 64, "random_dag({n}) exceeds the block limit");
    assert!((0.0..=1.0).contains(&edge_p), "edge_p must be in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(edge_p) {
                preds[j].push(i);
            }
        }
    }
    let id = |i: usize| format!("op{i:02}");
    let mut ids = Vec::new();
    let mut ops = Vec::new();
    for (j, pred) in preds.iter().enumerate() {
        let (kind, inputs) = match pred.len() {
            0 => ("ConvRelu", vec!["in0".to_string()]),
            1 => ("ConvRelu", vec![id(pred[0])]),
            _ => ("Add", pred.iter().map(|&i| id(i)).collect()),
        };
        let mut op = json!({
            "id": id(j), "kind": kind, "inputs": inputs, "out_channels": 32,
            "in_shape": [1, 32, 8, 8]
        });
        if kind == "ConvRelu" {
            op["kernel"] = json!([3, 3]);
            op["stride"] = json!([1, 1]);
        }
        ops.push(op);
        ids.push(id(j));
    }
    build(json!({
        "name": format!("random-{n}-{seed}"),
        "inputs": [{"id": "in0", "shape": [1, 32, 8, 8]}],
        "blocks": [ids],
        "operators": ops
    }))
}

/// An Inception-v3-style block: four branches from a shared input, joined by
/// a channel concatenation. Eleven operators, width six.
pub fn inception_block() -> ComputationGraph {
    let conv = |id: &str, input: &str, oc: usize, k: [usize; 2], ic: usize| {
        json!({
            "id": id, "kind": "ConvRelu", "inputs": [input], "out_channels": oc,
            "kernel": k, "stride": [1, 1], "in_shape": [1, ic, 8, 8]
        })
    };
    build(json!({
        "name": "inception",
        "inputs": [{"id": "in0", "shape": [1, 1280, 8, 8]}],
        "blocks": [["a1", "b1", "b2", "b3", "c1", "c2", "c3", "c4", "p1", "p2", "concat"]],
        "operators": [
            conv("a1", "in0", 320, [1, 1], 1280),
            conv("b1", "in0", 384, [1, 1], 1280),
            conv("b2", "b1", 384, [1, 3], 384),
            conv("b3", "b1", 384, [3, 1], 384),
            conv("c1", "in0", 448, [1, 1], 1280),
            conv("c2", "c1", 384, [3, 3], 448),
            conv("c3", "c2", 384, [1, 3], 384),
            conv("c4", "c2", 384, [3, 1], 384),
            {"id": "p1", "kind": "Pool", "inputs": ["in0"], "out_channels": 1280,
             "in_shape": [1, 1280, 8, 8]},
            conv("p2", "p1", 192, [1, 1], 1280),
            {"id": "concat", "kind": "Concat",
             "inputs": ["a1", "b2", "b3", "c3", "c4", "p2"], "out_channels": 2048,
             "in_shape": [1, 2048, 8, 8]}
        ]
    }))
}

/// Two mergeable convolutions over one shared input: a 3x1 and a 1x3 kernel,
/// sixteen output channels each. The smallest instance where the best
/// strategy depends on the device profile.
pub fn conv_pair() -> ComputationGraph {
    build(json!({
        "name": "conv_pair",
        "inputs": [{"id": "in0", "shape": [1, 128, 32, 32]}],
        "blocks": [["f", "g"]],
        "operators": [
            {"id": "f", "kind": "ConvRelu", "inputs": ["in0"], "out_channels": 16,
             "kernel": [3, 1], "stride": [1, 1], "in_shape": [1, 128, 32, 32]},
            {"id": "g", "kind": "ConvRelu", "inputs": ["in0"], "out_channels": 16,
             "kernel": [1, 3], "stride": [1, 1], "in_shape": [1, 128, 32, 32]}
        ]
    }))
}

/// A device with abundant bandwidth and two free concurrent lanes: compute
/// dominates, so running kernels side by side beats merging them.
pub fn compute_bound_profile() -> DeviceProfile {
    DeviceProfile {
        name: "compute_bound".into(),
        peak_flops: 1e12,
        mem_bandwidth: 1e11,
        kernel_overhead: 1e-6,
        sync_overhead: 1e-6,
        max_concurrent_groups: 2,
        contention_slope: 0.3,
        util_saturation_flops: 1e7,
    }
}

/// A device with scarce bandwidth and a single lane: traffic dominates and
/// concurrency contends, so sharing one pass over the input wins.
pub fn memory_bound_profile() -> DeviceProfile {
    DeviceProfile {
        name: "memory_bound".into(),
        peak_flops: 1e14,
        mem_bandwidth: 1e9,
        kernel_overhead: 1e-6,
        sync_overhead: 1e-6,
        max_concurrent_groups: 1,
        contention_slope: 1.0,
        util_saturation_flops: 1e7,
    }
}
