use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dfsched::graph::{critical_path, path_cost};
use dfsched::workbench::{
    generate_instance, load_assignment, load_instance, run_experiment, save_assignment,
    save_instance, AssignmentFile, ExperimentSpec, GeneratorParams, Instance, PRESETS,
};
use dfsched::{
    build_groups, check_assignment, optimal, partition, sim, Limits, MsrWeights, Policy, Strategy,
};

#[derive(Parser)]
#[command(
    name = "dfsched",
    version,
    about = "Partition and schedule dataflow graphs on simulated heterogeneous devices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random layered instance
    Gen(GenArgs),
    /// Check an instance, and optionally an assignment, against all constraints
    Validate(ValidateArgs),
    /// Assign every vertex to a device
    Partition(PartitionArgs),
    /// Run the discrete-event simulation for a fixed assignment
    Simulate(SimulateArgs),
    /// Run a partitioner x scheduler experiment matrix and write CSV results
    Compare(CompareArgs),
    /// Exhaustively search a small instance for the optimal makespan
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Start from a named preset
    #[arg(long, conflicts_with = "params", value_parser = preset_name)]
    preset: Option<String>,
    /// Generator parameters as a TOML file
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    vertices: Option<usize>,
    /// Average out-degree
    #[arg(long)]
    degree: Option<f64>,
    /// Vertices per layer
    #[arg(long)]
    layer_width: Option<usize>,
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    #[arg(long)]
    assignment: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    instance: PathBuf,
    /// hash, batch_split, critical_path, mite, dfs or heft
    #[arg(long, default_value = "critical_path")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    instance: PathBuf,
    #[arg(long)]
    assignment: PathBuf,
    /// fifo, pct or msr
    #[arg(long, default_value = "pct")]
    policy: String,
    /// MSR weights alpha,beta,gamma,delta
    #[arg(long, default_value_t = MsrWeights::default())]
    msr_weights: MsrWeights,
    /// Seeds FIFO tie-breaking
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for trace.csv and report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment description in TOML
    spec: PathBuf,
    /// Overrides the spec's weights
    #[arg(long)]
    msr_weights: Option<MsrWeights>,
    /// Overrides the spec's seed base
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for raw.csv and aggregate.csv; overrides the spec's output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = Limits::default().max_vertices)]
    max_vertices: usize,
    #[arg(long, default_value_t = Limits::default().max_devices)]
    max_devices: usize,
    /// Write the optimal assignment here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn preset_name(name: &str) -> Result<String, String> {
    if PRESETS.iter().any(|p| p.0 == name) {
        Ok(name.to_string())
    } else {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
        Err(format!(
            "unknown preset; expected one of {}",
            known.join(", ")
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Validate(args) => validate(args),
        Command::Partition(args) => run_partition(args),
        Command::Simulate(args) => simulate(args),
        Command::Compare(args) => compare(args),
        Command::Oracle(args) => run_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, dropping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn gen(args: GenArgs) -> Result<()> {
    let mut params = match (&args.preset, &args.params) {
        (Some(name), _) => GeneratorParams::preset(name).expect("validated by clap"),
        (None, Some(path)) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, None) => GeneratorParams::default(),
    };
    if let Some(n) = args.vertices {
        params.vertices = n;
    }
    if let Some(d) = args.degree {
        params.degree = d;
    }
    if let Some(w) = args.layer_width {
        params.layer_width = w;
    }
    if let Some(k) = args.devices {
        params.devices = k;
    }
    if let Some(s) = args.seed {
        params.seed = s;
    }
    let instance = generate_instance(&params)?;
    save_instance(&args.out, &instance)?;
    let groups = build_groups(&instance.graph)?;
    println!(
        "wrote {}: {} vertices, {} edges, {} collocation groups, {} devices (seed {})",
        args.out.display(),
        instance.graph.len(),
        instance.graph.edge_count(),
        groups
            .groups()
            .iter()
            .filter(|g| g.members.len() > 1)
            .count(),
        instance.cluster.len(),
        params.seed
    );
    Ok(())
}

fn lower_bound(instance: &Instance) -> f64 {
    match critical_path(&instance.graph) {
        Ok(path) => path_cost(&instance.graph, &path) / instance.cluster.max_speed(),
        Err(_) => 0.0,
    }
}

fn validate(args: ValidateArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let (graph, cluster) = (&instance.graph, &instance.cluster);
    let groups = build_groups(graph)?;
    println!("{}", args.instance.display());
    println!(
        "  {} vertices ({} sources, {} sinks), {} edges",
        graph.len(),
        graph.sources().count(),
        graph.sinks().count(),
        graph.edge_count()
    );
    println!(
        "  {} collocation groups with two or more members, {} pinned vertices",
        groups
            .groups()
            .iter()
            .filter(|g| g.members.len() > 1)
            .count(),
        graph
            .vertices()
            .iter()
            .filter(|v| v.device_constraint.is_some())
            .count()
    );
    println!(
        "  {} devices, makespan lower bound {:.4}",
        cluster.len(),
        lower_bound(&instance)
    );
    partition(Strategy::BatchSplit, graph, cluster, &groups, 0)
        .context("no placement satisfies the memory and device constraints")?;
    println!("  constraints are satisfiable");

    if let Some(path) = args.assignment {
        let assignment = load_assignment(&path, &instance)?;
        let violations = check_assignment(graph, cluster, &groups, &assignment);
        if !violations.is_empty() {
            for v in &violations {
                println!("  {}: {v}", path.display());
            }
            bail!(
                "{} constraint violations in {}",
                violations.len(),
                path.display()
            );
        }
        println!("  {}: assignment is valid", path.display());
    }
    Ok(())
}

fn run_partition(args: PartitionArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let groups = build_groups(&instance.graph)?;
    let p = partition(
        args.strategy,
        &instance.graph,
        &instance.cluster,
        &groups,
        args.seed,
    )?;
    save_assignment(&args.out, &AssignmentFile::from_partition(&p, &instance))?;
    let mut used = vec![0usize; instance.cluster.len()];
    for &d in &p.assignment {
        used[d] += 1;
    }
    let busiest = used
        .iter()
        .enumerate()
        .max_by_key(|(d, n)| (**n, std::cmp::Reverse(*d)));
    println!(
        "{} placed {} vertices on {} of {} devices -> {}",
        args.strategy,
        instance.graph.len(),
        used.iter().filter(|&&n| n > 0).count(),
        instance.cluster.len(),
        args.out.display()
    );
    if let Some((d, n)) = busiest {
        println!(
            "  busiest device {} holds {n} vertices",
            instance.cluster.id(d)
        );
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let assignment = load_assignment(&args.assignment, &instance)?;
    let policy = Policy::from_name(&args.policy, args.msr_weights)?;
    let (trace, report) = sim::run(
        &instance.graph,
        &instance.cluster,
        &assignment,
        &policy,
        args.seed,
    )?;
    println!("policy {policy}, seed {}", args.seed);
    println!(
        "  makespan {:.4} (lower bound {:.4})",
        report.makespan,
        lower_bound(&instance)
    );
    println!("  mean utilization {:.3}", report.mean_utilization());
    println!("  {} events processed", report.event_count);
    if report.memory_violations.is_empty() {
        println!("  no memory capacity exceeded");
    }
    for breach in &report.memory_violations {
        println!(
            "  memory exceeded on {} at t={:.4}: {:.1} of {:.1}",
            instance.cluster.id(breach.device),
            breach.time,
            breach.usage,
            breach.capacity
        );
    }
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(
            &dir.join("trace.csv"),
            &trace.export_lines(&instance.graph, &instance.cluster),
        )?;
        write(
            &dir.join("report.json"),
            &(serde_json::to_string_pretty(&report)? + "\n"),
        )?;
        println!("  trace and report written to {}", dir.display());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    if let Some(w) = args.msr_weights {
        spec.msr_weights = w;
    }
    if let Some(s) = args.seed {
        spec.seed_base = s;
    }
    let base = args.spec.parent().unwrap_or(Path::new("."));
    let instance = spec.instance(base)?;
    let results = run_experiment(&spec, &instance)?;
    let out = args
        .out
        .or_else(|| spec.output.as_ref().map(|p| base.join(p)))
        .unwrap_or_else(|| PathBuf::from("results"));
    results.write_to_dir(&out)?;

    println!(
        "{} vertices, {} devices, {} repetitions per cell",
        instance.graph.len(),
        instance.cluster.len(),
        spec.repetitions
    );
    println!(
        "{:<14}{:<10}{:>14}{:>12}{:>8}",
        "partitioner", "scheduler", "mean", "std", "failed"
    );
    for row in &results.aggregate {
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<14}{:<10}{:>14}{:>12}{:>8}",
            row.partitioner.name(),
            row.scheduler,
            fmt(row.mean_makespan),
            fmt(row.std_makespan),
            row.failed
        );
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn run_oracle(args: OracleArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let groups = build_groups(&instance.graph)?;
    let limits = Limits {
        max_vertices: args.max_vertices,
        max_devices: args.max_devices,
    };
    let best = optimal(&instance.graph, &instance.cluster, &groups, limits)?;
    println!(
        "optimal makespan {:.6} ({} schedules timed)",
        best.makespan, best.evaluated
    );
    for (d, order) in best.device_order.iter().enumerate() {
        let ids: Vec<&str> = order.iter().map(|&v| instance.graph.id(v)).collect();
        println!("  {}: {}", instance.cluster.id(d), ids.join(" "));
    }
    if let Some(path) = args.out {
        let file = AssignmentFile {
            strategy: None,
            seed: None,
            assignment: (0..instance.graph.len())
                .map(|v| {
                    (
                        instance.graph.id(v).to_string(),
                        instance.cluster.id(best.assignment[v]).to_string(),
                    )
                })
                .collect(),
        };
        save_assignment(&path, &file)?;
        println!("assignment written to {}", path.display());
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
