//! Path-based strategies: Batch Split and Critical Path.

use super::{
    argmin_device, fastest, finish, groups_by_rank, infeasible, require_feasible, Partition,
    PartitionError, Strategy,
};
use crate::cluster::{DeviceCluster, DeviceIndex};
use crate::constraints::{CollocationGroups, GroupIndex, PartialAssignment};
use crate::graph::{critical_path_with, total_rank, DataflowGraph};

/// Groups in descending total rank, each on the fastest feasible device.
pub fn batch_split_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
) -> Result<Partition, PartitionError> {
    let ranks = total_rank(graph);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    for g in groups_by_rank(groups, &ranks) {
        let devices = require_feasible(g, groups, cluster, &current)?;
        current.assign(g, fastest(&devices, cluster), groups);
    }
    Ok(finish(current, Strategy::BatchSplit, None))
}

/// Puts the whole critical path on the fastest device able to hold it (or
/// splits it into contiguous runs over the fastest devices), then places each
/// remaining group where the summed execution time of the device's vertices
/// plus its own is smallest.
pub fn critical_path_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
) -> Result<Partition, PartitionError> {
    let ranks = total_rank(graph);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    if graph.is_empty() {
        return Ok(finish(current, Strategy::CriticalPath, None));
    }
    let path = critical_path_with(graph, &ranks.down).expect("graph is nonempty");

    let mut path_groups: Vec<GroupIndex> = Vec::new();
    for &v in &path {
        let g = groups.group_of(v);
        if !path_groups.contains(&g) {
            path_groups.push(g);
        }
    }
    match whole_path_device(&path_groups, groups, cluster) {
        Some(d) => {
            for &g in &path_groups {
                current.assign(g, d, groups);
            }
        }
        None => split_path(&path_groups, groups, cluster, &mut current)?,
    }

    let mut load = vec![0.0; cluster.len()];
    for v in 0..graph.len() {
        if let Some(d) = current.device_of(v) {
            load[d] += cluster.exec_time(graph.cost(v), d);
        }
    }
    for g in groups_by_rank(groups, &ranks) {
        if current.group_device(g).is_some() {
            continue;
        }
        let devices = require_feasible(g, groups, cluster, &current)?;
        let cost = groups.group(g).cost;
        let d = argmin_device(&devices, |d| load[d] + cluster.exec_time(cost, d));
        load[d] += cluster.exec_time(cost, d);
        current.assign(g, d, groups);
    }
    Ok(finish(current, Strategy::CriticalPath, None))
}

/// Fastest device that satisfies every path group's pin and holds their
/// combined footprint.
fn whole_path_device(
    path_groups: &[GroupIndex],
    groups: &CollocationGroups,
    cluster: &DeviceCluster,
) -> Option<DeviceIndex> {
    let mut pin: Option<DeviceIndex> = None;
    for &g in path_groups {
        match groups.pinned_device(g, cluster) {
            Some(Some(d)) if pin.map_or(true, |p| p == d) => pin = Some(d),
            Some(_) => return None,
            None => {}
        }
    }
    let footprint: f64 = path_groups.iter().map(|&g| groups.group(g).footprint).sum();
    cluster
        .by_speed_desc()
        .into_iter()
        .filter(|&d| pin.map_or(true, |p| p == d))
        .find(|&d| footprint < cluster.memory(d))
}

/// Pinned groups go to their device; the others fill devices in descending
/// speed order, keeping consecutive path segments together.
fn split_path(
    path_groups: &[GroupIndex],
    groups: &CollocationGroups,
    cluster: &DeviceCluster,
    current: &mut PartialAssignment,
) -> Result<(), PartitionError> {
    let order = cluster.by_speed_desc();
    let mut cursor = 0;
    for &g in path_groups {
        if groups.pinned_device(g, cluster).is_some() {
            let devices = require_feasible(g, groups, cluster, current)?;
            current.assign(g, devices[0], groups);
            continue;
        }
        while cursor < order.len() && !current.fits(g, order[cursor], groups, cluster) {
            cursor += 1;
        }
        let d = match order.get(cursor) {
            Some(&d) => d,
            None => {
                let devices = require_feasible(g, groups, cluster, current)
                    .map_err(|_| infeasible(groups, g))?;
                fastest(&devices, cluster)
            }
        };
        current.assign(g, d, groups);
    }
    Ok(())
}
