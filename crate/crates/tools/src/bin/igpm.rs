//! `igpm`: ingest, generate, run, compare, oracle.
//!
//! Failures print one line `error<TAB>kind<TAB>message` to stderr and exit
//! with status 2.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use igpm_core::graph::{TemporalGraph, View};
use igpm_core::oracle::{brute_force_embeddings, OracleLimits};
use igpm_core::pem::{measure_window, run_full, Mode, PemConfig, RewardClock};
use igpm_tools::clock::MonotonicClock;
use igpm_tools::formats::{
    load_ground_truth, load_pattern, load_trace, load_weights, save_ground_truth, save_trace_csv, save_trace_json,
    save_weights, write_assignment,
};
use igpm_tools::generate::{generate, GroundTruth, Model, PlantedTriangle, Workload};
use igpm_tools::ingest::{ingest_edge_stream, EdgeStream, Granularity};
use igpm_tools::report::{compare_runs, planted_recall};

#[derive(Parser)]
#[command(name = "igpm", version, about = "Incremental best-effort graph pattern matching over edge streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a `src dst timestamp [label]` edge list and print its shape.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "day")]
        granularity: Granularity,
    },
    /// Write a synthetic edge stream (timestamps are step numbers).
    Generate(GenerateArgs),
    /// Replay a stream in one mode and write its trace.
    Run(RunArgs),
    /// Compare traces of the same workload; the first is the baseline.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Rows `A:B`, 1-based and inclusive.
        #[arg(long)]
        window: Option<String>,
        /// Write the long-format CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Enumerate exact embeddings in the graph reached after the stream.
    Oracle {
        input: PathBuf,
        #[arg(long, default_value = "raw")]
        granularity: Granularity,
        #[arg(long, default_value = "triangle")]
        pattern: String,
        /// Replay only the first N steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = OracleLimits::default().max_data_vertices)]
        max_vertices: usize,
        /// Print every embedding, not only the count.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    ErdosRenyi,
    PreferentialAttachment,
    PlantedPatterns,
}

#[derive(Args)]
struct GenerateArgs {
    /// Read the whole workload from a JSON file instead of flags.
    #[arg(long, conflicts_with = "model")]
    workload: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelName>,
    #[arg(long, default_value_t = 100)]
    n: u32,
    #[arg(long, default_value_t = 100)]
    steps: u32,
    #[arg(long, default_value_t = 5)]
    edges_per_step: u32,
    /// Edges per arriving vertex (preferential attachment).
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Planted triangles (planted patterns).
    #[arg(long, default_value_t = 5)]
    triangles: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar; defaults to `--out` with its extension replaced by `truth.json` for planted patterns.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    input: PathBuf,
    #[arg(long, default_value = "raw")]
    granularity: Granularity,
    #[arg(long, default_value = "adaptive")]
    mode: Mode,
    /// Built-in name (triangle, square, star5, k4) or a pattern JSON file.
    #[arg(long, default_value = "triangle")]
    pattern: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    initial_c: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Steps to replay; 0 replays the whole stream.
    #[arg(long, default_value_t = 0)]
    steps: usize,
    #[arg(long, default_value_t = 3)]
    max_hops: usize,
    #[arg(long)]
    allow_partial: bool,
    /// Steps skipped before the measurement window.
    #[arg(long, default_value_t = 100)]
    warmup: usize,
    /// Measurement rows `A:B`, 1-based and inclusive; overrides --warmup.
    #[arg(long)]
    measure_window: Option<String>,
    #[arg(long, value_enum, default_value = "work")]
    reward_clock: ClockName,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    reuse_partition: bool,
    #[arg(long)]
    online_clustering: bool,
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[arg(long)]
    trace_json: Option<PathBuf>,
    #[arg(long)]
    weights_in: Option<PathBuf>,
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Final community assignment, `vertex community` per line.
    #[arg(long)]
    assignment_out: Option<PathBuf>,
    /// Planted ground truth; reports recall of the final result set.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockName {
    Work,
    Wall,
}

struct Failure {
    kind: &'static str,
    message: String,
}

fn fail(kind: &'static str, e: impl ToString) -> Failure {
    Failure { kind, message: e.to_string() }
}

type Outcome = Result<(), Failure>;

fn parse_window(s: &str) -> Result<(usize, usize), Failure> {
    let (a, b) = s.split_once(':').ok_or_else(|| fail("usage", format!("window {s:?} is not A:B")))?;
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| fail("usage", format!("window {s:?} is not A:B")));
    Ok((num(a)?, num(b)?))
}

fn load_stream(path: &Path, granularity: Granularity) -> Result<EdgeStream, Failure> {
    let stream = ingest_edge_stream(path, granularity).map_err(|e| fail("ingest", e))?;
    for w in &stream.warnings {
        eprintln!("warning: {w}");
    }
    Ok(stream)
}

fn cmd_ingest(input: &Path, granularity: Granularity) -> Outcome {
    let s = load_stream(input, granularity)?;
    println!(
        "vertices {} steps {} edge_events {} granularity {}",
        s.vertex_count(),
        s.steps(),
        s.edge_events,
        granularity
    );
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Outcome {
    let workload = if let Some(path) = &a.workload {
        let text = fs::read_to_string(path).map_err(|e| fail("io", format!("{}: {e}", path.display())))?;
        serde_json::from_str::<Workload>(&text).map_err(|e| fail("workload", e))?
    } else {
        let model = match a.model.ok_or_else(|| fail("usage", "--model or --workload is required"))? {
            ModelName::ErdosRenyi => Model::ErdosRenyi { n: a.n, steps: a.steps, edges_per_step: a.edges_per_step },
            ModelName::PreferentialAttachment => {
                Model::PreferentialAttachment { n: a.n, steps: a.steps, edges_per_step: a.edges_per_step, m: a.m }
            }
            ModelName::PlantedPatterns => Model::PlantedPatterns {
                n: a.n,
                steps: a.steps,
                edges_per_step: a.edges_per_step,
                triangles: a.triangles,
            },
        };
        let name = a
            .name
            .clone()
            .unwrap_or_else(|| a.out.file_stem().map_or("workload".into(), |s| s.to_string_lossy().into()));
        Workload { name, seed: a.seed, model }
    };
    let g = generate(&workload).map_err(|e| fail("workload", e))?;
    let file = fs::File::create(&a.out).map_err(|e| fail("io", format!("{}: {e}", a.out.display())))?;
    g.write_edge_list(io::BufWriter::new(file)).map_err(|e| fail("io", e))?;
    if let Some(truth) = &g.ground_truth {
        let path = a.truth.clone().unwrap_or_else(|| a.out.with_extension("truth.json"));
        save_ground_truth(truth, &path).map_err(|e| fail("io", e))?;
        println!("truth {}", path.display());
    }
    println!("edges {} steps {}", g.edges.len(), g.edges.last().map_or(0, |e| e.2));
    Ok(())
}

/// Translates planted vertex ids into the stream's dense ids.
fn remap_truth(truth: &GroundTruth, stream: &EdgeStream) -> Result<GroundTruth, Failure> {
    let dense = |x: u32| {
        stream
            .dense_id(x as u64)
            .map(|v| v.0)
            .ok_or_else(|| fail("truth", format!("planted vertex {x} never appears in the stream")))
    };
    let triangles = truth
        .triangles
        .iter()
        .map(|t| {
            Ok(PlantedTriangle {
                vertices: [dense(t.vertices[0])?, dense(t.vertices[1])?, dense(t.vertices[2])?],
                completion_step: t.completion_step,
            })
        })
        .collect::<Result<_, Failure>>()?;
    Ok(GroundTruth { workload: truth.workload.clone(), triangles })
}

fn cmd_run(a: &RunArgs) -> Outcome {
    let stream = load_stream(&a.input, a.granularity)?;
    let pattern = load_pattern(&a.pattern).map_err(|e| fail("pattern", e))?;
    let initial_weights = match &a.weights_in {
        Some(p) => Some(load_weights(p).map_err(|e| fail("weights", e))?),
        None => None,
    };
    let config = PemConfig {
        mode: a.mode,
        initial_c: a.initial_c,
        total_steps: a.steps,
        epsilon: a.epsilon,
        k: a.k,
        seed: a.seed,
        max_hops: a.max_hops,
        allow_partial: a.allow_partial,
        reward_clock: match a.reward_clock {
            ClockName::Work => RewardClock::Work,
            ClockName::Wall => RewardClock::Wall,
        },
        view: if a.directed { View::Directed } else { View::Undirected },
        reuse_partition: a.reuse_partition,
        online_clustering: a.online_clustering,
        initial_weights,
        ..PemConfig::default()
    };
    let outcome =
        run_full(&stream.batches, &pattern, &config, &mut MonotonicClock::new(), |_| {}).map_err(|e| fail("run", e))?;
    let trace = &outcome.trace;
    if let Some(p) = &a.trace_csv {
        save_trace_csv(trace, p).map_err(|e| fail("io", e))?;
    }
    if let Some(p) = &a.trace_json {
        save_trace_json(trace, p).map_err(|e| fail("io", e))?;
    }
    if let Some(p) = &a.weights_out {
        let net = outcome.network.as_ref().ok_or_else(|| fail("usage", "--weights-out needs --mode adaptive"))?;
        save_weights(net, p).map_err(|e| fail("io", e))?;
    }
    if let Some(p) = &a.assignment_out {
        let asg = outcome.assignment.as_ref().ok_or_else(|| fail("usage", "batch mode keeps no clustering"))?;
        let f = fs::File::create(p).map_err(|e| fail("io", format!("{}: {e}", p.display())))?;
        write_assignment(asg, io::BufWriter::new(f)).map_err(|e| fail("io", e))?;
    }
    let (from, to) = match &a.measure_window {
        Some(w) => parse_window(w)?,
        None if a.warmup < trace.len() => (a.warmup + 1, trace.len()),
        None => {
            eprintln!(
                "warning: run has {} steps, not more than the warm-up {}; measuring all steps",
                trace.len(),
                a.warmup
            );
            (1, trace.len())
        }
    };
    let w = measure_window(trace, from, to).map_err(|e| fail("window", e))?;
    println!(
        "mode {} steps {} window {}:{} elapsed_ns {} work {} recomputed {} new_patterns {} invalidated {} total_patterns {} exact_patterns {}",
        trace.mode,
        trace.len(),
        w.from,
        w.to,
        w.elapsed_ns,
        w.work,
        w.recomputed,
        w.new_patterns,
        w.invalidated_patterns,
        w.total_patterns,
        w.exact_patterns
    );
    if let Some(p) = &a.truth {
        let truth = load_ground_truth(p).map_err(|e| fail("truth", e))?;
        let truth = remap_truth(&truth, &stream)?;
        let r = planted_recall(&truth, outcome.index.iter().map(|(_, r)| r));
        println!("recall {}/{} {:.4}", r.found, r.total, r.fraction());
    }
    Ok(())
}

fn cmd_compare(traces: &[PathBuf], window: Option<&str>, csv: Option<&Path>) -> Outcome {
    let loaded = traces
        .iter()
        .map(|p| load_trace(p).map_err(|e| fail("trace", format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let window = window.map(parse_window).transpose()?;
    let cmp = compare_runs(&loaded, window).map_err(|e| fail("compare", e))?;
    if let Some(p) = csv {
        fs::write(p, cmp.to_csv()).map_err(|e| fail("io", format!("{}: {e}", p.display())))?;
    }
    print!("{}", cmp.to_table());
    Ok(())
}

fn cmd_oracle(
    input: &Path,
    granularity: Granularity,
    pattern: &str,
    steps: Option<usize>,
    max_vertices: usize,
    list: bool,
) -> Outcome {
    let stream = load_stream(input, granularity)?;
    let pattern = load_pattern(pattern).map_err(|e| fail("pattern", e))?;
    let mut graph = TemporalGraph::new();
    for b in stream.batches.iter().take(steps.unwrap_or(usize::MAX)) {
        graph.apply_batch(b).map_err(|e| fail("graph", e))?;
    }
    let limits = OracleLimits { max_data_vertices: max_vertices, ..OracleLimits::default() };
    let found = brute_force_embeddings(&graph, &pattern, &limits).map_err(|e| fail("oracle", e))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "embeddings {}", found.len());
    if list {
        for mapping in found.embeddings.values() {
            // report ids as they appear in the input file
            let ids: Vec<String> = mapping.iter().map(|v| stream.id_map[v.index()].to_string()).collect();
            let _ = writeln!(out, "{}", ids.join(" "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest { input, granularity } => cmd_ingest(input, *granularity),
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare { traces, window, csv } => cmd_compare(traces, window.as_deref(), csv.as_deref()),
        Command::Oracle { input, granularity, pattern, steps, max_vertices, list } => {
            cmd_oracle(input, *granularity, pattern, *steps, *max_vertices, *list)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error\t{}\t{}", f.kind, f.message.replace(['\n', '\t'], " "));
            ExitCode::from(2)
        }
    }
}
