//! `ios` — schedule CNN computation graphs for minimum latency.
//!
//! Subcommands: `optimize` finds and writes a schedule, `compare` pits the
//! optimizer against sequential and greedy baselines, `analyze` reports
//! per-block width and state-graph sizes, `export-dot` renders Graphviz
//! text, and `gen` emits built-in example graphs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use ios_core::baseline::{count_all, greedy_network, sequential_network};
use ios_core::cost::{CostModel, DeviceProfile, LatencyTable};
use ios_core::dot::export_dot;
use ios_core::error::{Error, Result};
use ios_core::graph::ComputationGraph;
use ios_core::schedule::{
    network_schedule_to_json, parse_network_schedule, schedule_network_with, simulate,
    NetworkSchedule, PruningStrategy, StagePayload, Strategy, StrategyMode,
};
use ios_core::{analysis, generators};

#[derive(Parser)]
#[command(name = "ios", version, about = "Inter-operator scheduler for CNN computation graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a minimum-latency schedule and write it as JSON.
    Optimize(OptimizeArgs),
    /// Evaluate sequential, greedy, and three optimizer variants.
    Compare(CompareArgs),
    /// Print per-block width, state-graph counts, and the size bound.
    Analyze(AnalyzeArgs),
    /// Render the graph, optionally colored by a schedule, as Graphviz dot.
    ExportDot(ExportDotArgs),
    /// Write a built-in example graph.
    Gen(GenArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Device profile JSON (analytic cost model; fallback when --table is given).
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    /// Measured latency table JSON (takes precedence over the profile).
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<CostModel> {
        let profile = match &self.profile {
            Some(p) => Some(DeviceProfile::parse(&read(p)?)?),
            None => None,
        };
        match &self.table {
            Some(t) => Ok(CostModel::Table {
                table: LatencyTable::parse(&read(t)?)?,
                fallback: profile,
            }),
            None => match profile {
                Some(p) => Ok(CostModel::AnalyticRoofline(p)),
                None => Err(Error::Schema(
                    "a cost model is required: pass --profile and/or --table".to_string(),
                )),
            },
        }
    }
}

#[derive(Args)]
struct PruneArgs {
    /// Largest group an ending may contain.
    #[arg(short = 'r', long = "r", default_value_t = 3,
          value_parser = clap::value_parser!(u32).range(1..=64))]
    r: u32,
    /// Most groups an ending may contain.
    #[arg(short = 's', long = "s", default_value_t = 8,
          value_parser = clap::value_parser!(u32).range(1..=64))]
    s: u32,
    /// Search without pruning limits.
    #[arg(long)]
    no_prune: bool,
}

impl PruneArgs {
    fn strategy(&self) -> Result<PruningStrategy> {
        if self.no_prune {
            Ok(PruningStrategy::unpruned())
        } else {
            PruningStrategy::new(self.r as usize, self.s as usize)
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Computation graph JSON.
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prune: PruneArgs,
    /// Where to write the schedule JSON.
    #[arg(short = 'o', long = "output", value_name = "FILE")]
    output: PathBuf,
    /// Print a machine-readable summary instead of the table.
    #[arg(long)]
    json: bool,
    /// Schedule the blocks on worker threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Computation graph JSON.
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    prune: PruneArgs,
    /// Print rows as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Schedule the blocks on worker threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Computation graph JSON.
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    /// Count under this group-size limit instead of exhaustively.
    #[arg(short = 'r', long = "r", value_name = "N",
          value_parser = clap::value_parser!(u32).range(1..=64))]
    r: Option<u32>,
    /// Count under this group-count limit instead of exhaustively.
    #[arg(short = 's', long = "s", value_name = "N",
          value_parser = clap::value_parser!(u32).range(1..=64))]
    s: Option<u32>,
}

#[derive(Args)]
struct ExportDotArgs {
    /// Computation graph JSON.
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    /// Schedule JSON to color stages and groups with.
    #[arg(long, value_name = "FILE")]
    schedule: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(short = 'o', long = "output", value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// One of: fig5, chains C D, random_dag N EDGE_P SEED, inception_block.
    name: String,
    /// Generator parameters, in the order listed above.
    params: Vec<String>,
    /// Output file (stdout when omitted).
    #[arg(short = 'o', long = "output", value_name = "FILE")]
    output: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        let code = if matches!(e, Error::Infeasible(_)) { 2 } else { 1 };
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize(args) => cmd_optimize(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::ExportDot(args) => cmd_export_dot(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display())))
}

fn ms(seconds: f64) -> f64 {
    seconds * 1e3
}

fn stage_label(g: &ComputationGraph, block: &ios_core::graph::Block, payload: &StagePayload) -> String {
    match payload {
        StagePayload::Concurrent { groups } => {
            let rendered: Vec<String> = groups
                .iter()
                .map(|grp| {
                    block
                        .topo_sort_set(*grp)
                        .into_iter()
                        .map(|d| g.block_op(block, d).id.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            rendered.join(" | ")
        }
        StagePayload::Merge { plan } => format!("merge[{}]", plan.merged.id),
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let g = ComputationGraph::parse(&read(&args.graph)?)?;
    let m = args.model.load()?;
    let p = args.prune.strategy()?;
    let q = schedule_network_with(&g, &m, p, StrategyMode::Both, args.parallel)?;
    write_out(&args.output, &network_schedule_to_json(&g, &q))?;

    let sequential = simulate(&g, &sequential_network(&g), &m)?;
    let speedup = if q.network_latency > 0.0 {
        sequential / q.network_latency
    } else {
        1.0
    };

    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "network_latency_ms": ms(q.network_latency),
                "sequential_ms": ms(sequential),
                "speedup_vs_sequential": speedup,
                "output": args.output.display().to_string(),
            })
        );
        return Ok(());
    }

    println!("network latency: {:.3} ms", ms(q.network_latency));
    for (bi, (block, schedule)) in g.blocks.iter().zip(&q.blocks).enumerate() {
        println!("block {bi}:");
        for (si, stage) in schedule.stages.iter().enumerate() {
            let strategy = match stage.strategy {
                Strategy::ConcurrentExecution => "concurrent",
                Strategy::OperatorMerge => "merge",
            };
            println!(
                "  stage {si}: {:>10}  {:>10.3} ms  {}",
                strategy,
                ms(stage.latency),
                stage_label(&g, block, &stage.payload),
            );
        }
    }
    println!("speedup vs sequential: {speedup:.2}x");
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let g = ComputationGraph::parse(&read(&args.graph)?)?;
    let m = args.model.load()?;
    let p = args.prune.strategy()?;

    let mut rows: Vec<(&str, f64)> = Vec::new();
    rows.push(("Sequential", simulate(&g, &sequential_network(&g), &m)?));
    rows.push(("Greedy", simulate(&g, &greedy_network(&g), &m)?));
    for (name, mode) in [
        ("IOS-Merge", StrategyMode::MergeOnly),
        ("IOS-Parallel", StrategyMode::ConcurrentOnly),
        ("IOS-Both", StrategyMode::Both),
    ] {
        let q = schedule_network_with(&g, &m, p, mode, args.parallel)?;
        rows.push((name, q.network_latency));
    }
    let best = rows
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);

    if args.json {
        let rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|(name, v)| {
                serde_json::json!({
                    "scheduler": name,
                    "latency_ms": ms(*v),
                    "normalized_throughput": normalized(best, *v),
                })
            })
            .collect();
        println!("{}", serde_json::Value::Array(rows));
        return Ok(());
    }

    println!("{:<14} {:>12} {:>12}", "scheduler", "latency(ms)", "throughput");
    for (name, v) in &rows {
        println!("{name:<14} {:>12.3} {:>12.2}", ms(*v), normalized(best, *v));
    }
    Ok(())
}

/// Throughput of a row relative to the fastest row (which scores 1.00).
fn normalized(best: f64, row: f64) -> f64 {
    if row > 0.0 {
        best / row
    } else {
        1.0
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let g = ComputationGraph::parse(&read(&args.graph)?)?;
    let pruning = match (args.r, args.s) {
        (None, None) => None,
        (r, s) => Some(PruningStrategy::new(
            r.unwrap_or(64) as usize,
            s.unwrap_or(64) as usize,
        )?),
    };
    for block in &g.blocks {
        let cert = analysis::graph_width(&g, block);
        let counts = count_all(&g, block, pruning);
        let bound = analysis::complexity_bound(block.len(), cert.width);
        println!(
            "{{\"n\":{},\"width\":{},\"transitions\":{},\"bound\":\"{}\",\"schedules\":\"{}\"}}",
            counts.n, cert.width, counts.transitions, bound.rendered, counts.schedules,
        );
    }
    Ok(())
}

fn cmd_export_dot(args: ExportDotArgs) -> Result<()> {
    let g = ComputationGraph::parse(&read(&args.graph)?)?;
    let schedule: Option<NetworkSchedule> = match &args.schedule {
        Some(path) => Some(parse_network_schedule(&g, &read(path)?)?),
        None => None,
    };
    let text = export_dot(&g, schedule.as_ref())?;
    match &args.output {
        Some(path) => write_out(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let bad_arity = |want: &str| {
        Error::Schema(format!(
            "generator {} expects parameters: {want}",
            args.name
        ))
    };
    let g = match args.name.as_str() {
        "fig5" => {
            if !args.params.is_empty() {
                return Err(bad_arity("none"));
            }
            generators::fig5()
        }
        "inception_block" => {
            if !args.params.is_empty() {
                return Err(bad_arity("none"));
            }
            generators::inception_block()
        }
        "chains" => {
            if args.params.len() != 2 {
                return Err(bad_arity("C D"));
            }
            let c: usize = args.params[0].parse().map_err(|_| bad_arity("C D"))?;
            let d: usize = args.params[1].parse().map_err(|_| bad_arity("C D"))?;
            if c == 0 || d == 0 || c.saturating_mul(d) > 64 {
                return Err(Error::Schema(format!(
                    "chains needs 1 <= C*D <= 64, got {c}x{d}"
                )));
            }
            generators::chains(c, d)
        }
        "random_dag" => {
            if args.params.len() != 3 {
                return Err(bad_arity("N EDGE_P SEED"));
            }
            let n: usize = args.params[0].parse().map_err(|_| bad_arity("N EDGE_P SEED"))?;
            let edge_p: f64 = args.params[1].parse().map_err(|_| bad_arity("N EDGE_P SEED"))?;
            let seed: u64 = args.params[2].parse().map_err(|_| bad_arity("N EDGE_P SEED"))?;
            if n > 64 || !(0.0..=1.0).contains(&edge_p) {
                return Err(Error::Schema(format!(
                    "random_dag needs N <= 64 and EDGE_P in [0,1], got {n} and {edge_p}"
                )));
            }
            generators::random_dag(n, edge_p, seed)
        }
        other => {
            return Err(Error::Schema(format!("unknown generator \"{other}\"")));
        }
    };
    let text = g.to_json();
    match &args.output {
        Some(path) => write_out(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}
