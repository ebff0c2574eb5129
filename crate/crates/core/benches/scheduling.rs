//! Block-level parallelism benchmark: the rayon-backed network scheduler
//! against the sequential fallback, plus the raw ending enumerator.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use serde_json::Value;

use ios_core::cost::CostModel;
use ios_core::generators;
use ios_core::graph::ComputationGraph;
use ios_core::schedule::{enumerate_endings, schedule_network, schedule_network_seq};
use ios_core::PruningStrategy;

/// `k` disjoint copies of the inception block, one block each, so the
/// network scheduler has independent work to fan out.
fn stacked_inception(k: usize) -> ComputationGraph {
    let base: Value = serde_json::from_str(&generators::inception_block().to_json()).unwrap();
    let base_ops = base["operators"].as_array().unwrap();
    let mut operators = Vec::new();
    let mut blocks = Vec::new();
    for copy in 0..k {
        let mut ids = Vec::new();
        for op in base_ops {
            let mut op = op.clone();
            let id = format!("{}_{copy}", op["id"].as_str().unwrap());
            op["id"] = Value::String(id.clone());
            let inputs: Vec<Value> = op["inputs"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| {
                    let name = v.as_str().unwrap();
                    if name == "in0" {
                        v.clone()
                    } else {
                        Value::String(format!("{name}_{copy}"))
                    }
                })
                .collect();
            op["inputs"] = Value::Array(inputs);
            operators.push(op);
            ids.push(Value::String(id));
        }
        blocks.push(Value::Array(ids));
    }
    let doc = serde_json::json!({
        "name": format!("inception-x{k}"),
        "inputs": base["inputs"],
        "blocks": blocks,
        "operators": operators,
    });
    ComputationGraph::parse(&doc.to_string()).unwrap()
}

fn bench_network(c: &mut Criterion) {
    let m = CostModel::AnalyticRoofline(generators::compute_bound_profile());
    let p = PruningStrategy::default();
    let mut group = c.benchmark_group("schedule_network");
    group.sample_size(20);
    for &k in &[4usize, 16] {
        let g = stacked_inception(k);
        group.bench_with_input(BenchmarkId::new("parallel", k), &g, |b, g| {
            b.iter(|| schedule_network(g, &m, p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", k), &g, |b, g| {
            b.iter(|| schedule_network_seq(g, &m, p).unwrap())
        });
    }
    group.finish();
}

fn bench_endings(c: &mut Criterion) {
    let g = generators::inception_block();
    let block = &g.blocks[0];
    let mut group = c.benchmark_group("enumerate_endings");
    group.bench_function("inception_default", |b| {
        b.iter(|| enumerate_endings(block, block.all_ops(), PruningStrategy::default()))
    });
    group.bench_function("inception_unpruned", |b| {
        b.iter(|| enumerate_endings(block, block.all_ops(), PruningStrategy::unpruned()))
    });
    group.finish();
}

criterion_group!(benches, bench_network, bench_endings);
criterion_main!(benches);
