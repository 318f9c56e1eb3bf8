//! Instance generation, file formats and the experiment runner.

pub mod experiment;
pub mod generate;
pub mod io;

use crate::cluster::DeviceCluster;
use crate::graph::DataflowGraph;

pub use experiment::{run_cell, run_experiment, ExperimentResults, ExperimentSpec, InstanceSource};
pub use generate::{generate_instance, GeneratorParams, Range, PRESETS};
pub use io::{load_assignment, load_instance, save_assignment, save_instance, AssignmentFile};

/// A graph together with the cluster it runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: DataflowGraph,
    pub cluster: DeviceCluster,
}
