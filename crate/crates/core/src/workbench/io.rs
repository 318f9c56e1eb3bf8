//! JSON instance and assignment files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Instance;
use crate::cluster::{ClusterError, DeviceCluster, DeviceIndex, DeviceRecord};
use crate::graph::{DataflowGraph, EdgeRecord, GraphError, VertexRecord};
use crate::partition::{Partition, Strategy};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
    #[error("{path}: {source}")]
    Cluster { path: PathBuf, source: ClusterError },
    #[error("{path}: {message}")]
    Assignment { path: PathBuf, message: String },
}

/// On-disk layout of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub devices: Vec<DeviceRecord>,
    /// Row-major, rows and columns in the order of `devices`.
    pub bandwidth: Vec<Vec<f64>>,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl From<&Instance> for InstanceFile {
    fn from(instance: &Instance) -> Self {
        InstanceFile {
            devices: instance.cluster.devices().to_vec(),
            bandwidth: instance.cluster.bandwidth_matrix().to_vec(),
            vertices: instance.graph.vertices().to_vec(),
            edges: instance.graph.edge_records(),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, InstanceError> {
        Ok(Instance {
            graph: DataflowGraph::new(self.vertices, self.edges)?,
            cluster: DeviceCluster::new(self.devices, self.bandwidth)?,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), FileError> {
    fs::write(path, text).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_instance(text: &str, path: &Path) -> Result<Instance, FileError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|source| FileError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    file.into_instance().map_err(|e| match e {
        InstanceError::Graph(source) => FileError::Graph {
            path: path.to_path_buf(),
            source,
        },
        InstanceError::Cluster(source) => FileError::Cluster {
            path: path.to_path_buf(),
            source,
        },
    })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, FileError> {
    let path = path.as_ref();
    parse_instance(&read(path)?, path)
}

pub fn instance_to_json(instance: &Instance) -> String {
    let mut text =
        serde_json::to_string_pretty(&InstanceFile::from(instance)).expect("plain data serializes");
    text.push('\n');
    text
}

pub fn save_instance(path: impl AsRef<Path>, instance: &Instance) -> Result<(), FileError> {
    write(path.as_ref(), &instance_to_json(instance))
}

/// On-disk partition: vertex id to device id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub assignment: BTreeMap<String, String>,
}

impl AssignmentFile {
    pub fn from_partition(partition: &Partition, instance: &Instance) -> Self {
        AssignmentFile {
            strategy: partition.strategy,
            seed: partition.seed,
            assignment: (0..instance.graph.len())
                .map(|v| {
                    (
                        instance.graph.id(v).to_string(),
                        instance.cluster.id(partition.assignment[v]).to_string(),
                    )
                })
                .collect(),
        }
    }

    /// Resolves ids against `instance`; every vertex must be covered.
    pub fn to_assignment(&self, instance: &Instance) -> Result<Vec<DeviceIndex>, String> {
        for v in self.assignment.keys() {
            if instance.graph.index_of(v).is_none() {
                return Err(format!("unknown vertex {v:?}"));
            }
        }
        (0..instance.graph.len())
            .map(|v| {
                let id = instance.graph.id(v);
                let device = self
                    .assignment
                    .get(id)
                    .ok_or_else(|| format!("vertex {id:?} is not assigned"))?;
                instance
                    .cluster
                    .index_of(device)
                    .ok_or_else(|| format!("vertex {id:?} assigned to unknown device {device:?}"))
            })
            .collect()
    }
}

pub fn save_assignment(path: impl AsRef<Path>, file: &AssignmentFile) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(file).expect("plain data serializes");
    text.push('\n');
    write(path.as_ref(), &text)
}

pub fn load_assignment(
    path: impl AsRef<Path>,
    instance: &Instance,
) -> Result<Vec<DeviceIndex>, FileError> {
    let path = path.as_ref();
    let file: AssignmentFile =
        serde_json::from_str(&read(path)?).map_err(|source| FileError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    file.to_assignment(instance)
        .map_err(|message| FileError::Assignment {
            path: path.to_path_buf(),
            message,
        })
}
