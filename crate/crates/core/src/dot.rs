//! Graphviz export of a computation graph, optionally annotated with a
//! schedule: stages become clusters, concurrent groups share a fill color.

use std::fmt::Write as _;

use crate::error::Result;
use crate::graph::ComputationGraph;
use crate::schedule::{validate_network_schedule, NetworkSchedule, StagePayload};

const PALETTE: [&str; 6] = [
    "#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6", "#ffff99",
];

fn quoted(id: &str) -> String {
    format!("\"{}\"", id.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Render the graph as Graphviz dot text. Only operators become nodes;
/// graph inputs are implicit. With a schedule, every (block, stage) pair
/// becomes one cluster and each group inside the stage gets a color from a
/// cycling palette (the merged operators of a merge stage count as one
/// group).
pub fn export_dot(g: &ComputationGraph, q: Option<&NetworkSchedule>) -> Result<String> {
    if let Some(q) = q {
        validate_network_schedule(g, q)?;
    }
    let mut out = String::new();
    out.push_str("digraph schedule {\n");
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=box, style=filled, fillcolor=white];\n");

    match q {
        None => {
            for op in &g.operators {
                let _ = writeln!(out, "  {} [label={}];", quoted(&op.id), quoted(&op.id));
            }
        }
        Some(q) => {
            let mut color = 0usize;
            for (bi, (block, sched)) in g.blocks.iter().zip(&q.blocks).enumerate() {
                for (si, stage) in sched.stages.iter().enumerate() {
                    let _ = writeln!(out, "  subgraph cluster_b{bi}_s{si} {{");
                    let _ = writeln!(out, "    label=\"block {bi} stage {si}\";");
                    out.push_str("    style=rounded;\n");
                    let groups: Vec<crate::opset::OpSet> = match &stage.payload {
                        StagePayload::Concurrent { groups } => groups.clone(),
                        StagePayload::Merge { plan } => vec![plan.members],
                    };
                    for group in groups {
                        let fill = PALETTE[color % PALETTE.len()];
                        color += 1;
                        for dense in group.iter() {
                            let id = &g.block_op(block, dense).id;
                            let _ = writeln!(
                                out,
                                "    {} [label={}, fillcolor=\"{}\"];",
                                quoted(id),
                                quoted(id),
                                fill
                            );
                        }
                    }
                    out.push_str("  }\n");
                }
            }
        }
    }

    for &(u, v) in &g.edges {
        let _ = writeln!(
            out,
            "  {} -> {};",
            quoted(&g.operators[u].id),
            quoted(&g.operators[v].id)
        );
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CostModel, LatencyTable};
    use crate::generators;
    use crate::schedule::{schedule_network, PruningStrategy};
    use std::collections::BTreeMap;

    #[test]
    fn bare_graph_echoes_structure() {
        let g = generators::fig5();
        let text = export_dot(&g, None).unwrap();
        assert_eq!(text.matches("label=").count(), 3);
        assert_eq!(text.matches(" -> ").count(), 1);
        assert!(text.contains("\"a\" -> \"b\""));
        assert!(!text.contains("in0"));
    }

    #[test]
    fn scheduled_graph_gets_one_cluster_per_stage() {
        let g = generators::fig5();
        // Penalize the all-in-one stage so the optimum has two stages.
        let ops: BTreeMap<String, f64> = [("a", 1e-3), ("b", 1e-3), ("c", 1e-4)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let stages: BTreeMap<String, f64> =
            [(r#"[["a","b"],["c"]]"#.to_string(), 99.0)].into_iter().collect();
        let m = CostModel::Table {
            table: LatencyTable {
                ops,
                stages: Some(stages),
            },
            fallback: None,
        };
        let q = schedule_network(&g, &m, PruningStrategy::unpruned()).unwrap();
        assert_eq!(q.blocks[0].stages.len(), 2);
        let text = export_dot(&g, Some(&q)).unwrap();
        assert_eq!(text.matches("subgraph cluster_").count(), 2);
    }

    #[test]
    fn empty_graph_is_header_and_footer() {
        let g = ComputationGraph::parse(
            r#"{"name":"empty","inputs":[],"blocks":[],"operators":[]}"#,
        )
        .unwrap();
        let text = export_dot(&g, None).unwrap();
        assert!(text.starts_with("digraph"));
        assert!(text.ends_with("}\n"));
        assert!(!text.contains("->"));
    }

    #[test]
    fn mismatched_schedule_is_rejected() {
        let g = generators::fig5();
        let q = crate::schedule::NetworkSchedule {
            blocks: vec![],
            network_latency: 0.0,
        };
        assert!(export_dot(&g, Some(&q)).is_err());
    }
}
