//! Multi-objective strategies: MITE (memory, importance, traffic, execution
//! time) and DFS.

use super::{
    argmin_device, finish, group_rank, groups_by_rank, require_feasible, Partition, PartitionError,
    Strategy, SCORE_EPSILON,
};
use crate::cluster::{DeviceCluster, DeviceIndex};
use crate::constraints::{CollocationGroups, GroupIndex, PartialAssignment};
use crate::graph::{total_rank, DataflowGraph, RankTable, VertexIndex};

/// The four MITE factors for one (group, device) candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiteScore {
    /// Static memory utilisation after placing the group, in [0, 1).
    pub mem: f64,
    /// `1 - (rank / max rank) * (speed / max speed)`.
    pub imp: f64,
    pub traffic: f64,
    /// Execution time normalised by the slowest feasible device.
    pub exec: f64,
}

impl MiteScore {
    pub fn product(&self) -> f64 {
        (SCORE_EPSILON + self.mem)
            * (SCORE_EPSILON + self.imp)
            * (SCORE_EPSILON + self.traffic)
            * (SCORE_EPSILON + self.exec)
    }
}

/// Time to pull every input of `g` that comes from an already placed vertex
/// onto device `d`. Inputs from unplaced vertices count zero; an unreachable
/// link counts as infinite.
pub fn traffic_score(
    g: GroupIndex,
    d: DeviceIndex,
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    current: &PartialAssignment,
) -> f64 {
    let mut total = 0.0;
    for &v in groups.members(g) {
        for &(u, e) in graph.predecessors(v) {
            if let Some(src) = current.device_of(u) {
                total += cluster
                    .transfer_time(graph.edge(e).volume, src, d)
                    .unwrap_or(f64::INFINITY);
            }
        }
    }
    total
}

/// `exec_time(cost, d)` over the largest such time among `feasible`; 1 when
/// the group costs nothing.
fn exec_score(cost: f64, d: DeviceIndex, feasible: &[DeviceIndex], cluster: &DeviceCluster) -> f64 {
    let slowest = feasible
        .iter()
        .map(|&f| cluster.exec_time(cost, f))
        .fold(0.0, f64::max);
    if slowest > 0.0 {
        cluster.exec_time(cost, d) / slowest
    } else {
        1.0
    }
}

#[allow(clippy::too_many_arguments)]
pub fn mite_score(
    g: GroupIndex,
    d: DeviceIndex,
    feasible: &[DeviceIndex],
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
    ranks: &RankTable,
    current: &PartialAssignment,
) -> MiteScore {
    let mem = (current.used_memory(d) + groups.group(g).footprint) / cluster.memory(d);
    let max_rank = ranks.max_total();
    let rank_ratio = if max_rank > 0.0 {
        group_rank(groups, ranks, g) / max_rank
    } else {
        0.0
    };
    let imp = 1.0 - rank_ratio * (cluster.speed(d) / cluster.max_speed());
    MiteScore {
        mem,
        imp,
        traffic: traffic_score(g, d, graph, cluster, groups, current),
        exec: exec_score(groups.group(g).cost, d, feasible, cluster),
    }
}

/// Groups in descending total rank, each on the feasible device with the
/// smallest smoothed MITE product.
pub fn mite_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
) -> Result<Partition, PartitionError> {
    let ranks = total_rank(graph);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    for g in groups_by_rank(groups, &ranks) {
        let devices = require_feasible(g, groups, cluster, &current)?;
        let d = argmin_device(&devices, |d| {
            mite_score(g, d, &devices, graph, cluster, groups, &ranks, &current).product()
        });
        current.assign(g, d, groups);
    }
    Ok(finish(current, Strategy::Mite, None))
}

/// Preorder of a depth-first traversal that starts at the source with the
/// highest total rank and visits successors in descending total rank. When a
/// traversal is exhausted the next unvisited source by rank seeds another.
pub fn dfs_order(graph: &DataflowGraph, ranks: &RankTable) -> Vec<VertexIndex> {
    let by_rank = |a: &VertexIndex, b: &VertexIndex| {
        ranks.total[*b].total_cmp(&ranks.total[*a]).then(a.cmp(b))
    };
    let mut sources: Vec<VertexIndex> = graph.sources().collect();
    sources.sort_by(by_rank);
    let children: Vec<Vec<VertexIndex>> = (0..graph.len())
        .map(|v| {
            let mut c: Vec<VertexIndex> = graph.successors(v).iter().map(|&(s, _)| s).collect();
            c.sort_by(by_rank);
            c
        })
        .collect();

    let mut visited = vec![false; graph.len()];
    let mut order = Vec::with_capacity(graph.len());
    for root in sources {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        order.push(root);
        let mut stack: Vec<(VertexIndex, usize)> = vec![(root, 0)];
        while let Some((v, next)) = stack.last_mut() {
            match children[*v].get(*next) {
                Some(&child) => {
                    *next += 1;
                    if !visited[child] {
                        visited[child] = true;
                        order.push(child);
                        stack.push((child, 0));
                    }
                }
                None => {
                    stack.pop();
                }
            }
        }
    }
    order
}

/// Walks the DFS preorder; the first visit to a member places its group on
/// the feasible device minimising the smoothed traffic times execution score.
pub fn dfs_partition(
    graph: &DataflowGraph,
    cluster: &DeviceCluster,
    groups: &CollocationGroups,
) -> Result<Partition, PartitionError> {
    let ranks = total_rank(graph);
    let mut current = PartialAssignment::new(graph, groups, cluster);
    for v in dfs_order(graph, &ranks) {
        let g = groups.group_of(v);
        if current.group_device(g).is_some() {
            continue;
        }
        let devices = require_feasible(g, groups, cluster, &current)?;
        let cost = groups.group(g).cost;
        let d = argmin_device(&devices, |d| {
            (SCORE_EPSILON + traffic_score(g, d, graph, cluster, groups, &current))
                * (SCORE_EPSILON + exec_score(cost, d, &devices, cluster))
        });
        current.assign(g, d, groups);
    }
    Ok(finish(current, Strategy::Dfs, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::fixtures::cluster;
    use crate::cluster::DeviceRecord;
    use crate::constraints::build_groups;
    use crate::graph::fixtures::{chain, diamond};
    use crate::graph::{EdgeRecord, VertexRecord};

    #[test]
    fn importance_vanishes_for_top_vertex_on_fastest_device() {
        let g = diamond();
        let c = cluster(&[1.0, 4.0], 1.0);
        let groups = build_groups(&g).unwrap();
        let ranks = total_rank(&g);
        let current = PartialAssignment::new(&g, &groups, &c);
        let v3 = g.index_of("v3").unwrap();
        let s = mite_score(
            groups.group_of(v3),
            1,
            &[0, 1],
            &g,
            &c,
            &groups,
            &ranks,
            &current,
        );
        assert_eq!(s.imp, 0.0);
        let slow = mite_score(
            groups.group_of(v3),
            0,
            &[0, 1],
            &g,
            &c,
            &groups,
            &ranks,
            &current,
        );
        assert_eq!(slow.imp, 0.75);
        assert_eq!((slow.exec, s.exec), (1.0, 0.25));
    }

    #[test]
    fn traffic_single_term() {
        let g = chain(&[1.0, 1.0], 10.0);
        let c = cluster(&[1.0, 1.0], 5.0);
        let groups = build_groups(&g).unwrap();
        let mut current = PartialAssignment::new(&g, &groups, &c);
        current.assign(0, 0, &groups);
        assert_eq!(traffic_score(1, 1, &g, &c, &groups, &current), 2.0);
        assert_eq!(traffic_score(1, 0, &g, &c, &groups, &current), 0.0);
        // unplaced predecessor contributes nothing
        let empty = PartialAssignment::new(&g, &groups, &c);
        assert_eq!(traffic_score(1, 1, &g, &c, &groups, &empty), 0.0);
    }

    #[test]
    fn memory_score_counts_committed_and_new_footprint() {
        let g = chain(&[1.0, 1.0, 1.0], 10.0);
        let c = DeviceCluster::uniform(vec![DeviceRecord::new("d", 1.0, 40.0)], 1.0).unwrap();
        let groups = build_groups(&g).unwrap();
        let ranks = total_rank(&g);
        let mut current = PartialAssignment::new(&g, &groups, &c);
        current.assign(1, 0, &groups);
        let s = mite_score(2, 0, &[0], &g, &c, &groups, &ranks, &current);
        assert_eq!(s.mem, 0.5);
    }

    #[test]
    fn identical_devices_tie_to_smallest() {
        let g = diamond();
        let c = cluster(&[3.0, 3.0], 2.0);
        let groups = build_groups(&g).unwrap();
        let p = mite_partition(&g, &c, &groups).unwrap();
        assert_eq!(p, mite_partition(&g, &c, &groups).unwrap());
        // first placed group is v3 (highest total rank) on an empty cluster
        assert_eq!(p.assignment[g.index_of("v3").unwrap()], 0);
    }

    #[test]
    fn dfs_visits_by_rank() {
        let g = diamond();
        let order: Vec<&str> = dfs_order(&g, &total_rank(&g))
            .into_iter()
            .map(|v| g.id(v))
            .collect();
        assert_eq!(order, ["v1", "v3", "v4", "v2"]);
    }

    #[test]
    fn dfs_covers_disconnected_components() {
        let g = DataflowGraph::new(
            vec![
                VertexRecord::new("a", 1.0),
                VertexRecord::new("b", 5.0),
                VertexRecord::new("c", 1.0),
                VertexRecord::new("d", 1.0),
            ],
            vec![
                EdgeRecord::new("a", "c", 1.0),
                EdgeRecord::new("b", "d", 1.0),
            ],
        )
        .unwrap();
        let order: Vec<&str> = dfs_order(&g, &total_rank(&g))
            .into_iter()
            .map(|v| g.id(v))
            .collect();
        assert_eq!(order, ["b", "d", "a", "c"]);
    }

    #[test]
    fn dfs_source_without_traffic_takes_fastest() {
        let g = chain(&[6.0], 0.0);
        let c = cluster(&[1.0, 3.0, 2.0], 1.0);
        let p = dfs_partition(&g, &c, &build_groups(&g).unwrap()).unwrap();
        assert_eq!(p.assignment, vec![1]);
    }

    #[test]
    fn dfs_keeps_heavy_chain_together() {
        // moving v2 away costs 1000/1 in traffic against a 2x speedup
        let g = chain(&[4.0, 4.0], 1000.0);
        let c = cluster(&[1.0, 2.0], 1.0);
        let p = dfs_partition(&g, &c, &build_groups(&g).unwrap()).unwrap();
        assert_eq!(p.assignment, vec![1, 1]);
    }
}
