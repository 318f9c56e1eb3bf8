//! Partitioning and local scheduling of dataflow DAGs on heterogeneous
//! device clusters, with a deterministic discrete-event simulator to measure
//! the outcome and an exhaustive solver to certify it on tiny instances.

pub mod cluster;
pub mod constraints;
pub mod graph;
pub mod oracle;
pub mod partition;
pub mod sched;
pub mod sim;
pub mod workbench;

pub use cluster::{ClusterError, DeviceCluster, DeviceIndex, DeviceRecord};
pub use constraints::{
    build_groups, check_assignment, validate_solution, CollocationGroups, ConstraintError,
    SolutionViolation,
};
pub use graph::{DataflowGraph, EdgeRecord, GraphError, VertexIndex, VertexRecord};
pub use oracle::{optimal, Limits, OptimalSolution, OracleError};
pub use partition::{partition, Partition, PartitionError, Strategy};
pub use sched::{MsrWeights, Policy};
pub use sim::{ExecutionTrace, SimError, SimReport};
pub use workbench::Instance;
