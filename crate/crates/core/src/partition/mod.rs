//! The six partitioning strategies. Every strategy places whole collocation
//! groups atomically and respects device constraints and the static memory
//! bound; ties always go to the smallest device index, then the smallest
//! group index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterError, DeviceCluster, DeviceIndex};
use crate::constraints::{
    feasible_devices, CollocationGroups, ConstraintError, GroupIndex, PartialAssignment,
};
use crate::graph::{DataflowGraph, RankTable};

mod hash;
mod heft;
mod multi;
mod path;

pub use hash::hash_partition;
pub use heft::heft_partition;
pub use multi::{dfs_order, dfs_partition, mite_partition, mite_score, traffic_score, MiteScore};
pub use path::{batch_split_partition, critical_path_partition};

/// Added to every factor of the MITE and DFS products so that one zero factor
/// does not erase the others.
pub const SCORE_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Hash,
    BatchSplit,
    CriticalPath,
    Mite,
    Dfs,
    Heft,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Hash,
        Strategy::BatchSplit,
        Strategy::CriticalPath,
        Strategy::Mite,
        Strategy::Dfs,
        Strategy::Heft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Hash => "hash",
            Strategy::BatchSplit => "batch_split",
            Strategy::CriticalPath => "critical_path",
            Strategy::Mite => "mite",
            Strategy::Dfs => "dfs",
            Strategy::Heft => "heft",
        }
    }

    pub fn is_randomized(self) -> bool {
        self == Strategy::Hash
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| PartitionError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("infeasible instance: no feasible device for group {group}")]
    Infeasible { group: String },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("unknown partitioning strategy {0:?} (expected hash|batch_split|critical_path|mite|dfs|heft)")]
    UnknownStrategy(String),
}

/// Total mapping from vertices to devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignment: Vec<DeviceIndex>,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
}

impl Partition {
    pub fn device_of(&self, v: usize) -> DeviceIndex {
        self.assignment[v]
    }
}

/// Runs `strategy`. The seed only matters for randomized strategies.
pub fn partition(
    strategy: Strategy,
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    seed: u64,
) -> Result<Partition, PartitionError> {
    match strategy {
        Strategy::Hash => hash_partition(graph, cluster, groups, seed),
        Strategy::BatchSplit => batch_split_partition(graph, cluster, groups),
        Strategy::CriticalPath => critical_path_partition(graph, cluster, groups),
        Strategy::Mite => mite_partition(graph, cluster, groups),
        Strategy::Dfs => dfs_partition(graph, cluster, groups),
        Strategy::Heft => heft_partition(graph, cluster, groups),
    }
}

fn infeasible(groups: &CollocationGroups, g: GroupIndex) -> PartitionError {
    PartitionError::Infeasible {
        group: groups.group(g).label.clone(),
    }
}

/// Feasible devices for `g`, or the infeasibility error.
fn require_feasible(
    g: GroupIndex,
    groups: &CollocationGroups,
    cluster: &DeviceCluster,
    current: &PartialAssignment,
) -> Result<Vec<DeviceIndex>, PartitionError> {
    let devices = feasible_devices(g, groups, cluster, current);
    if devices.is_empty() {
        Err(infeasible(groups, g))
    } else {
        Ok(devices)
    }
}

/// Largest member total rank.
fn group_rank(groups: &CollocationGroups, ranks: &RankTable, g: GroupIndex) -> f64 {
    groups
        .members(g)
        .iter()
        .map(|&v| ranks.total[v])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Groups by descending group rank, ties by ascending group index.
fn groups_by_rank(groups: &CollocationGroups, ranks: &RankTable) -> Vec<GroupIndex> {
    let rank: Vec<f64> = (0..groups.len())
        .map(|g| group_rank(groups, ranks, g))
        .collect();
    let mut order: Vec<GroupIndex> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| rank[b].total_cmp(&rank[a]).then(a.cmp(&b)));
    order
}

/// First device in `candidates` (ascending) minimising `score`.
fn argmin_device(
    candidates: &[DeviceIndex],
    mut score: impl FnMut(DeviceIndex) -> f64,
) -> DeviceIndex {
    let mut best = candidates[0];
    let mut best_score = score(best);
    for &d in &candidates[1..] {
        let s = score(d);
        if s < best_score {
            best = d;
            best_score = s;
        }
    }
    best
}

/// Fastest device in `candidates`, ties by smallest index.
fn fastest(candidates: &[DeviceIndex], cluster: &DeviceCluster) -> DeviceIndex {
    argmin_device(candidates, |d| -cluster.speed(d))
}

fn finish(current: PartialAssignment, strategy: Strategy, seed: Option<u64>) -> Partition {
    let assignment = current
        .into_assignment()
        .expect("every group is placed before finishing");
    Partition {
        assignment,
        strategy: Some(strategy),
        seed,
    }
}
