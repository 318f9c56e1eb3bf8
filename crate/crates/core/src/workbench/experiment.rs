//! Partitioner by scheduler matrix over repeated seeded runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::generate::{generate_instance, GenerateError, GeneratorParams};
use super::io::{load_instance, FileError};
use super::Instance;
use crate::cluster::DeviceCluster;
use crate::constraints::{build_groups, CollocationGroups, ConstraintError};
use crate::graph::DataflowGraph;
use crate::partition::{partition, Partition, PartitionError, Strategy};
use crate::sched::{MsrWeights, Policy, SchedError};
use crate::sim::{self, ExecutionTrace, SimError, SimReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    /// Path to an instance file, relative to the experiment file.
    File(PathBuf),
    /// Named preset, optionally with its own seed.
    Preset {
        name: String,
        seed: Option<u64>,
    },
    Generate(GeneratorParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub partitioners: Vec<Strategy>,
    pub schedulers: Vec<String>,
    #[serde(default)]
    pub msr_weights: MsrWeights,
    pub repetitions: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Directory for the CSV files, relative to the experiment file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read experiment file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid experiment file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("cannot write results: {0}")]
    Write(#[from] std::io::Error),
    #[error("cannot write results: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.policies()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn policies(&self) -> Result<Vec<Policy>, ExperimentError> {
        if self.repetitions == 0 {
            return Err(ExperimentError::Invalid(
                "repetitions must be at least 1".into(),
            ));
        }
        if self.partitioners.is_empty() || self.schedulers.is_empty() {
            return Err(ExperimentError::Invalid(
                "need at least one partitioner and one scheduler".into(),
            ));
        }
        self.schedulers
            .iter()
            .map(|s| Policy::from_name(s, self.msr_weights).map_err(Into::into))
            .collect()
    }

    /// Loads or generates the instance; relative paths resolve against `base`.
    pub fn instance(&self, base: &Path) -> Result<Instance, ExperimentError> {
        Ok(match &self.instance {
            InstanceSource::File(path) => load_instance(base.join(path))?,
            InstanceSource::Preset { name, seed } => {
                let mut params = GeneratorParams::preset(name)
                    .ok_or_else(|| ExperimentError::Invalid(format!("unknown preset {name:?}")))?;
                params.seed = seed.unwrap_or(self.seed_base);
                generate_instance(&params)?
            }
            InstanceSource::Generate(params) => generate_instance(params)?,
        })
    }
}

/// Seed handed to the simulator for a cell whose partition used `seed`.
pub fn simulation_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5DEE_CE66_D
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub partition: Partition,
    pub trace: ExecutionTrace,
    pub report: SimReport,
}

/// One partition plus one simulation.
pub fn run_cell(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    strategy: Strategy,
    policy: &Policy,
    seed: u64,
) -> Result<CellOutcome, CellError> {
    let partition = partition(strategy, graph, cluster, groups, seed)?;
    simulate_partition(graph, cluster, partition, policy, seed)
}

fn simulate_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    partition: Partition,
    policy: &Policy,
    seed: u64,
) -> Result<CellOutcome, CellError> {
    let (trace, report) = sim::run(
        graph,
        cluster,
        &partition.assignment,
        policy,
        simulation_seed(seed),
    )?;
    Ok(CellOutcome {
        partition,
        trace,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawRow {
    pub partitioner: Strategy,
    pub scheduler: String,
    pub repetition: usize,
    pub seed: u64,
    pub makespan: Option<f64>,
    pub peak_memory_violations: Option<usize>,
    pub mean_utilization: Option<f64>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub partitioner: Strategy,
    pub scheduler: String,
    pub runs: usize,
    pub failed: usize,
    pub mean_makespan: Option<f64>,
    /// Sample standard deviation; zero for a single run.
    pub std_makespan: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
}

pub const RAW_FILE: &str = "raw.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

impl ExperimentResults {
    pub fn aggregate_for(&self, partitioner: Strategy, scheduler: &str) -> Option<&AggregateRow> {
        self.aggregate
            .iter()
            .find(|r| r.partitioner == partitioner && r.scheduler == scheduler)
    }

    pub fn write_raw(&self, out: impl Write) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.raw {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate(&self, out: impl Write) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.aggregate {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `raw.csv` and `aggregate.csv` into `dir`, creating it if needed.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        self.write_raw(std::fs::File::create(dir.join(RAW_FILE))?)?;
        self.write_aggregate(std::fs::File::create(dir.join(AGGREGATE_FILE))?)?;
        Ok(())
    }
}

/// Runs every (partitioner, scheduler, repetition) cell on `instance`.
/// Repetition `r` uses seed `seed_base + r` for both partitioning and
/// simulation. Cells run in parallel; rows come out in matrix order.
pub fn run_experiment(
    spec: &ExperimentSpec,
    instance: &Instance,
) -> Result<ExperimentResults, ExperimentError> {
    let policies = spec.policies()?;
    let groups = build_groups(&instance.graph)?;
    let (graph, cluster) = (&instance.graph, &instance.cluster);

    let jobs: Vec<(Strategy, usize)> = spec
        .partitioners
        .iter()
        .flat_map(|&s| (0..spec.repetitions).map(move |r| (s, r)))
        .collect();
    let per_job: Vec<Vec<RawRow>> = jobs
        .par_iter()
        .map(|&(strategy, repetition)| {
            let seed = spec.seed_base.wrapping_add(repetition as u64);
            let partitioned = partition(strategy, graph, cluster, &groups, seed);
            policies
                .iter()
                .map(|policy| {
                    let outcome = partitioned
                        .clone()
                        .map_err(CellError::from)
                        .and_then(|p| simulate_partition(graph, cluster, p, policy, seed));
                    raw_row(strategy, policy, repetition, seed, outcome)
                })
                .collect()
        })
        .collect();

    // per_job is ordered (partitioner, repetition); regroup as (partitioner, scheduler, repetition)
    let mut raw = Vec::with_capacity(jobs.len() * policies.len());
    for (p, _) in spec.partitioners.iter().enumerate() {
        for s in 0..policies.len() {
            for r in 0..spec.repetitions {
                raw.push(per_job[p * spec.repetitions + r][s].clone());
            }
        }
    }
    let aggregate = raw.chunks(spec.repetitions).map(aggregate_rows).collect();
    Ok(ExperimentResults { raw, aggregate })
}

fn raw_row(
    strategy: Strategy,
    policy: &Policy,
    repetition: usize,
    seed: u64,
    outcome: Result<CellOutcome, CellError>,
) -> RawRow {
    let mut row = RawRow {
        partitioner: strategy,
        scheduler: policy.name().to_string(),
        repetition,
        seed,
        makespan: None,
        peak_memory_violations: None,
        mean_utilization: None,
        error: None,
    };
    match outcome {
        Ok(cell) => {
            row.makespan = Some(cell.report.makespan);
            row.peak_memory_violations = Some(cell.report.memory_violations.len());
            row.mean_utilization = Some(cell.report.mean_utilization());
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn aggregate_rows(rows: &[RawRow]) -> AggregateRow {
    let values: Vec<f64> = rows.iter().filter_map(|r| r.makespan).collect();
    let (mean, std) = mean_and_sample_std(&values);
    AggregateRow {
        partitioner: rows[0].partitioner,
        scheduler: rows[0].scheduler.clone(),
        runs: values.len(),
        failed: rows.len() - values.len(),
        mean_makespan: mean,
        std_makespan: std,
        error: rows.iter().find_map(|r| r.error.clone()),
    }
}

pub fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (Some(values[0]), Some(0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (Some(mean), Some(std))
}
